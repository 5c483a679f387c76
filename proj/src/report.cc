/*
 * Copyright 2026 The dfprobe Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dfprobe/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "dfprobe/io.h"
#include "json.hpp"

namespace dfprobe {

namespace {

using nlohmann::json;

std::string Num(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::vector<std::pair<std::string, double>> MetricList(const EvalResult& r) {
  std::vector<std::pair<std::string, double>> out = {
      {"mAP", r.mAP}, {"CP", r.CP}, {"CR", r.CR}, {"CF1", r.CF1},
      {"OP", r.OP},   {"OR", r.OR}, {"OF1", r.OF1}};
  if (r.top1) out.emplace_back("top1", *r.top1);
  if (r.top5) out.emplace_back("top5", *r.top5);
  if (r.error_rate) out.emplace_back("error_rate", *r.error_rate);
  return out;
}

void SetMetric(EvalResult& r, const std::string& name, double v) {
  if (name == "mAP") r.mAP = v;
  else if (name == "CP") r.CP = v;
  else if (name == "CR") r.CR = v;
  else if (name == "CF1") r.CF1 = v;
  else if (name == "OP") r.OP = v;
  else if (name == "OR") r.OR = v;
  else if (name == "OF1") r.OF1 = v;
  else if (name == "top1") r.top1 = v;
  else if (name == "top5") r.top5 = v;
  else if (name == "error_rate") r.error_rate = v;
  else throw Error(ErrorKind::kIo, "unknown metric '" + name + "'");
}

json ToJson(const EvalResult& r) {
  json j = json::object();
  for (const auto& [name, v] : MetricList(r)) j[name] = v;
  j["classes_without_positives"] = r.classes_without_positives;
  j["classes_with_empty_denominator"] = r.classes_with_empty_denominator;
  return j;
}

EvalResult EvalFromJson(const json& j) {
  EvalResult r;
  for (const char* name : {"mAP", "CP", "CR", "CF1", "OP", "OR", "OF1", "top1",
                           "top5", "error_rate"}) {
    if (j.contains(name)) SetMetric(r, name, j.at(name).get<double>());
  }
  if (j.contains("classes_without_positives")) {
    r.classes_without_positives = j.at("classes_without_positives").get<std::vector<int>>();
  }
  if (j.contains("classes_with_empty_denominator")) {
    r.classes_with_empty_denominator =
        j.at("classes_with_empty_denominator").get<std::vector<int>>();
  }
  return r;
}

json ToJson(const ConfigPoint& p) {
  return {{"modality", std::string(ModalityName(p.modality))},
          {"t_index", p.t_index},
          {"b_index", p.b_index},
          {"t", p.t},
          {"b", p.b}};
}

ConfigPoint PointFromJson(const json& j) {
  ConfigPoint p;
  p.modality = ParseModality(j.at("modality").get<std::string>());
  p.t_index = j.at("t_index").get<int>();
  p.b_index = j.at("b_index").get<int>();
  p.t = j.at("t").get<int>();
  p.b = j.at("b").get<int>();
  return p;
}

json ToJson(const FusionPair& p) {
  return {{"image", ToJson(p.image)}, {"text", ToJson(p.text)}};
}

FusionPair PairFromJson(const json& j) {
  return {PointFromJson(j.at("image")), PointFromJson(j.at("text"))};
}

json ToJson(std::span<const GridCell> cells) {
  json a = json::array();
  for (const auto& c : cells) a.push_back({{"point", ToJson(c.point)}, {"result", ToJson(c.result)}});
  return a;
}

std::vector<GridCell> CellsFromJson(const json& a) {
  std::vector<GridCell> out;
  for (const auto& c : a) out.push_back({PointFromJson(c.at("point")), EvalFromJson(c.at("result"))});
  return out;
}

json ToJson(const FusionCandidate& c) {
  return {{"pair", ToJson(c.pair)}, {"result", ToJson(c.result)}};
}

FusionCandidate CandidateFromJson(const json& j) {
  return {PairFromJson(j.at("pair")), EvalFromJson(j.at("result"))};
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string LossCsv(const LossLog& log) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < log.loss.size(); ++i) {
    out += std::to_string(i + 1) + "," + Num(log.loss[i], "%.9g") + "\n";
  }
  return out;
}

std::string HeatmapCsv(std::span<const GridCell> cells) {
  std::string out = "modality,timestep,block,metric,value\n";
  for (const auto& c : cells) {
    for (const auto& [name, v] : MetricList(c.result)) {
      out += std::string(ModalityName(c.point.modality)) + "," +
             std::to_string(c.point.t) + "," + std::to_string(c.point.b) + "," +
             name + "," + Num(v) + "\n";
    }
  }
  return out;
}

std::string GridTableCsv(std::span<const GridCell> cells) {
  std::string out = std::string("timestep,block,") + kEvalColumns + "\n";
  for (const auto& c : cells) {
    out += std::to_string(c.point.t) + "," + std::to_string(c.point.b) + "," +
           FormatEvalRow(c.result) + "\n";
  }
  return out;
}

std::string EvalCsv(std::span<const std::pair<std::string, EvalResult>> rows) {
  const bool named = std::any_of(rows.begin(), rows.end(),
                                 [](const auto& r) { return !r.first.empty(); });
  std::string out = named ? std::string("config,") + kEvalColumns : kEvalColumns;
  out += "\n";
  for (const auto& [name, r] : rows) {
    if (named) out += name + ",";
    out += FormatEvalRow(r) + "\n";
  }
  return out;
}

std::string PerClassCsv(const EvalResult& result, const ClassCatalog& catalog) {
  std::string out = "class,name,count,ap,f1\n";
  for (std::size_t k = 0; k < result.per_class_AP.size(); ++k) {
    const bool known = k < catalog.names.size();
    out += std::to_string(k) + "," + (known ? catalog.names[k] : "") + "," +
           (k < catalog.counts.size() ? std::to_string(catalog.counts[k]) : "") + ",";
    if (!std::isnan(result.per_class_AP[k])) out += Num(result.per_class_AP[k]);
    out += ",";
    if (k < result.per_class_F1.size()) out += Num(result.per_class_F1[k]);
    out += "\n";
  }
  return out;
}

std::string RareStatsCsv(std::span<const RareCategoryRow> rows) {
  std::string out = "name,count,percentage\n";
  for (const auto& r : rows) {
    out += r.name + "," + std::to_string(r.count) + "," + Num(r.percentage, "%.4f") + "\n";
  }
  return out;
}

std::string LengthHistogramCsv(std::span<const LengthBucket> buckets) {
  std::string out = "lo,hi,count\n";
  for (const auto& b : buckets) {
    out += std::to_string(b.lo) + "," + std::to_string(b.hi) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::string EvalResultJson(const EvalResult& r) {
  json j = ToJson(r);
  json ap = json::array();
  for (double v : r.per_class_AP) ap.push_back(std::isnan(v) ? json(nullptr) : json(v));
  j["per_class_AP"] = ap;
  j["per_class_F1"] = r.per_class_F1;
  return j.dump(2) + "\n";
}

std::string PowersetJson(const PowersetReport& report) {
  json top = json::array();
  for (const auto& b : report.top) {
    top.push_back({{"labels", b.labels},
                   {"count", b.count},
                   {"exact_matches", b.exact_matches},
                   {"accuracy", b.accuracy}});
  }
  json j = {{"total", report.total}, {"distinct", report.distinct}, {"top", top}};
  return j.dump(2) + "\n";
}

std::string ClusterQualityJson(std::span<const std::pair<std::string, ClusterQuality>> rows) {
  json j = json::object();
  for (const auto& [name, q] : rows) {
    // JSON has no infinity; an unbounded DBI is written as null.
    j[name] = {{"dbi", std::isfinite(q.dbi) ? json(q.dbi) : json(nullptr)},
               {"chi", q.chi},
               {"silhouette", q.silhouette}};
  }
  return j.dump(2) + "\n";
}

std::string TTestJson(const TTestResult& r) {
  json j = {{"n", r.n},           {"mean_a", r.mean_a},       {"mean_b", r.mean_b},
            {"std_a", r.std_a},   {"std_b", r.std_b},         {"mean_diff", r.mean_diff},
            {"std_diff", r.std_diff}, {"t_value", r.t_value}, {"p_value", r.p_value}};
  return j.dump(2) + "\n";
}

std::string SearchReportJson(const SearchReport& report) {
  json fusion = json::array();
  for (const auto& c : report.fusion_results) fusion.push_back(ToJson(c));
  json neighborhood = json::array();
  for (const auto& p : report.neighborhood) neighborhood.push_back(ToJson(p));
  json j = {
      {"schema", "dfprobe.search_report/1"},
      {"exhaustive", report.exhaustive},
      {"strategy", report.strategy},
      {"radius", report.radius},
      {"image_grid", ToJson(report.image_grid)},
      {"text_grid", ToJson(report.text_grid)},
      {"image_optimum", ToJson(report.image_optimum)},
      {"text_optimum", ToJson(report.text_optimum)},
      {"neighborhood", neighborhood},
      {"fusion_results", fusion},
      {"winner", ToJson(report.winner)},
      {"counts",
       {{"image", report.counts.image},
        {"text", report.counts.text},
        {"fusion", report.counts.fusion},
        {"total", report.counts.total()}}},
  };
  return j.dump(2) + "\n";
}

SearchReport ParseSearchReport(const std::string& text) {
  SearchReport r;
  try {
    const json j = json::parse(text);
    r.exhaustive = j.at("exhaustive").get<bool>();
    r.strategy = j.at("strategy").get<std::string>();
    r.radius = j.at("radius").get<int>();
    r.image_grid = CellsFromJson(j.at("image_grid"));
    r.text_grid = CellsFromJson(j.at("text_grid"));
    r.image_optimum = PointFromJson(j.at("image_optimum"));
    r.text_optimum = PointFromJson(j.at("text_optimum"));
    for (const auto& p : j.at("neighborhood")) r.neighborhood.push_back(PairFromJson(p));
    for (const auto& c : j.at("fusion_results")) r.fusion_results.push_back(CandidateFromJson(c));
    r.winner = CandidateFromJson(j.at("winner"));
    const json& c = j.at("counts");
    r.counts.image = c.at("image").get<std::int64_t>();
    r.counts.text = c.at("text").get<std::int64_t>();
    r.counts.fusion = c.at("fusion").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, std::string("malformed search report: ") + e.what());
  }
  return r;
}

std::vector<GridCell> ParseHeatmapCsv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "modality,timestep,block,metric,value") {
    throw Error(ErrorKind::kIo, "heatmap CSV header mismatch");
  }
  std::map<std::tuple<int, int, int>, EvalResult> cells;
  std::map<int, std::set<int>> ts, bs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != 5) throw Error(ErrorKind::kIo, "bad heatmap row: " + line);
    try {
      const int m = static_cast<int>(ParseModality(f[0]));
      const int t = std::stoi(f[1]);
      const int b = std::stoi(f[2]);
      SetMetric(cells[{m, t, b}], f[3], std::stod(f[4]));
      ts[m].insert(t);
      bs[m].insert(b);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kIo, "bad heatmap row: " + line);
    }
  }
  std::vector<GridCell> out;
  for (const auto& [key, result] : cells) {
    const auto [m, t, b] = key;
    GridCell c;
    c.point.modality = static_cast<Modality>(m);
    c.point.t = t;
    c.point.b = b;
    c.point.t_index = static_cast<int>(std::distance(ts[m].begin(), ts[m].find(t)));
    c.point.b_index = static_cast<int>(std::distance(bs[m].begin(), bs[m].find(b)));
    c.result = result;
    out.push_back(std::move(c));
  }
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + p.parent_path().string());
  }
  WriteFileBytes(path, text);
}

}  // namespace dfprobe
