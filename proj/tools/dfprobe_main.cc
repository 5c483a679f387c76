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

// Command-line driver. Every subcommand loads a RunConfig (file plus --set
// overrides), writes its outputs and a config snapshot under the run
// directory, and reports failures as a single stderr line:
//
//   error code=<kind> message="<text>"
//
// Exit codes: 0 ok, 2 usage/config, 3 io, 4 budget, 5 numerical,
// 6 invalid argument.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfprobe/config.h"
#include "dfprobe/experiment.h"
#include "dfprobe/io.h"
#include "dfprobe/report.h"

namespace fs = std::filesystem;
using namespace dfprobe;

namespace {

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kBudget:
      return 4;
    case ErrorKind::kNumerical:
      return 5;
    case ErrorKind::kInvalidArgument:
      return 6;
  }
  return 1;
}

void PrintError(std::string_view code, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped.push_back('\\');
    escaped.push_back(c == '\n' ? ' ' : c);
  }
  std::cerr << "error code=" << code << " message=\"" << escaped << "\"\n";
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;

  RunConfig Load() const {
    RunConfig c = LoadRunConfig(config_path, overrides);
    if (!out.empty()) c.output_dir = out;
    return c;
  }
};

void AddCommon(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_path, "Run configuration (JSON)");
  cmd->add_option("--set", common.overrides, "Override a config key: dotted.key=value")
      ->take_all();
  cmd->add_option("-o,--out", common.out, "Run directory (overrides output_dir)");
}

std::string Out(const RunConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

void Begin(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + c.output_dir);
  WriteConfigSnapshot(c, c.output_dir);
}

std::pair<int, int> ParseCell(const std::string& s) {
  int t = 0, b = 0;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> t >> comma >> b) || comma != ',' || !in.eof()) {
    throw Error(ErrorKind::kConfig, "cell must be 't_index,b_index': '" + s + "'");
  }
  return {t, b};
}

std::vector<double> ReadNumbers(const std::string& path) {
  std::istringstream in(ReadFileBytes(path));
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(line, &used));
    } catch (const std::logic_error&) {
      if (out.empty()) continue;  // header line
      throw Error(ErrorKind::kIo, path + ": not a number: '" + line + "'");
    }
  }
  return out;
}

std::vector<FusionStrategy> ParseStrategies(const std::string& s) {
  if (s == "all") return {std::begin(kAllFusionStrategies), std::end(kAllFusionStrategies)};
  std::vector<FusionStrategy> out;
  std::istringstream in(s);
  std::string name;
  while (std::getline(in, name, ',')) out.push_back(ParseFusionStrategy(name));
  if (out.empty()) throw Error(ErrorKind::kConfig, "no fusion strategy given");
  return out;
}

// ---------------------------------------------------------------------------

void CmdGenSynthetic(const Common& common) {
  RunConfig c = common.Load();
  if (!c.data.train_path.empty()) throw Error(ErrorKind::kConfig, "config selects record files, not the synthetic benchmark");
  Begin(c);
  const auto bench = SyntheticBenchmark::Generate(MakeSyntheticSpec(c));
  WriteRecords(Out(c, "train.jsonl"), bench.records(Split::kTrain));
  WriteRecords(Out(c, "val.jsonl"), bench.records(Split::kVal));
  WriteCatalog(Out(c, "catalog.json"), bench.catalog());
}

void CmdAugment(const Common& common, const std::string& records_path,
                const std::string& catalog_path) {
  RunConfig c = common.Load();
  Begin(c);
  auto records = ReadRecords(records_path);
  const ClassCatalog catalog = ReadCatalog(catalog_path);
  for (auto& r : records) {
    r.caption = AugmentCaption(r, catalog);
    r.tokens.clear();  // stale after the caption changed
  }
  WriteRecords(Out(c, "augmented.jsonl"), records);
}

void CmdExtract(const Common& common, const std::string& modality_name,
                const std::string& split_name, const std::string& cell) {
  RunConfig c = common.Load();
  Begin(c);
  const Workspace ws(c);
  const Modality m = ParseModality(modality_name);
  if (m == Modality::kFused) throw Error(ErrorKind::kConfig, "extract needs image or text");
  const Split split = split_name == "val" ? Split::kVal : Split::kTrain;
  if (split_name != "train" && split_name != "val") throw Error(ErrorKind::kConfig, "split must be train or val");
  const auto [ti, bi] = ParseCell(cell);
  const ConfigPoint p = MakePoint(m, ws.space(m), ti, bi);
  const InputBatch batch = ws.data().Inputs(m, split, ti, bi);
  const ExtractRequest req{p.t, p.b, c.noise_mode, c.seed};
  const FeatureMatrix f = ws.backbone(m).Extract(batch, req, ws.schedule());
  WriteFeatureCache(Out(c, "features_" + std::string(ModalityName(m)) + "_" + split_name + "_t" +
                               std::to_string(p.t) + "_b" + std::to_string(p.b) + ".dfft"),
                    f);
}

void CmdProbe(const Common& common, const std::string& modality_name, const std::string& cell,
              const std::string& train_features, const std::string& val_features) {
  RunConfig c = common.Load();
  Begin(c);
  const Workspace ws(c);
  const MatrixD ytr = ws.data().Labels(Split::kTrain);
  const MatrixD yva = ws.data().Labels(Split::kVal);
  MatrixF xtr, xva;
  int t = 0, b = 0;
  if (!train_features.empty() || !val_features.empty()) {
    if (train_features.empty() || val_features.empty()) {
      throw Error(ErrorKind::kConfig, "--train-features and --val-features go together");
    }
    FeatureMatrix ftr = ReadFeatureCache(train_features);
    FeatureMatrix fva = ReadFeatureCache(val_features);
    t = ftr.t;
    b = ftr.b;
    xtr = std::move(ftr.data);
    xva = std::move(fva.data);
  } else {
    const Modality m = ParseModality(modality_name);
    const auto [ti, bi] = ParseCell(cell);
    auto evaluator = ws.MakeEvaluator();
    const ConfigPoint p = MakePoint(m, ws.space(m), ti, bi);
    const auto feats = evaluator->Features(p);
    t = p.t;
    b = p.b;
    xtr = feats->train.pooled.cast<float>();
    xva = feats->val.pooled.cast<float>();
  }
  if (xtr.rows() != ytr.rows() || xva.rows() != yva.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "feature rows do not match the dataset splits");
  }
  const auto trained = TrainProbe(xtr, ytr, c.loss, c.train);
  const MatrixD scores = Predict(trained.model, xva);
  EvalResult r = Evaluate(scores, yva, c.threshold);
  if (c.loss == LossKind::kCeSingleLabel) {
    std::vector<int> truth;
    for (Eigen::Index i = 0; i < yva.rows(); ++i) {
      Eigen::Index k = 0;
      yva.row(i).maxCoeff(&k);
      truth.push_back(static_cast<int>(k));
    }
    r.top1 = TopKAccuracy(scores, truth, 1);
    r.top5 = TopKAccuracy(scores, truth, std::min<int>(5, static_cast<int>(scores.cols())));
    r.error_rate = ErrorRate(scores, truth);
  }
  WriteText(Out(c, "loss.csv"), LossCsv(trained.log));
  WriteProbeModel(Out(c, "model.dfft"), trained.model, t, b);
  const std::pair<std::string, EvalResult> row{"", r};
  WriteText(Out(c, "eval.csv"), EvalCsv(std::span(&row, 1)));
  WriteText(Out(c, "eval.json"), EvalResultJson(r));
  ClassCatalog catalog;
  if (ws.synthetic()) catalog = ws.synthetic()->catalog();
  else if (!c.data.catalog_path.empty()) catalog = ReadCatalog(c.data.catalog_path);
  WriteText(Out(c, "per_class.csv"), PerClassCsv(r, catalog));
}

void CmdSearch(const Common& common, bool exhaustive) {
  RunConfig c = common.Load();
  Begin(c);
  const Workspace ws(c);
  auto evaluator = ws.MakeEvaluator();
  const SearchReport report =
      exhaustive ? ExhaustiveSearch(ws.space(Modality::kImage), ws.space(Modality::kText), *evaluator, c.max_pairs)
                 : HeuristicSearch(ws.space(Modality::kImage), ws.space(Modality::kText), *evaluator, c.search_radius);
  WriteText(Out(c, "search_report.json"), SearchReportJson(report));
  std::vector<GridCell> cells = report.image_grid;
  cells.insert(cells.end(), report.text_grid.begin(), report.text_grid.end());
  WriteText(Out(c, "heatmap.csv"), HeatmapCsv(cells));
  WriteText(Out(c, "grid_image.csv"), GridTableCsv(report.image_grid));
  WriteText(Out(c, "grid_text.csv"), GridTableCsv(report.text_grid));
  std::vector<std::pair<std::string, EvalResult>> rows;
  for (const auto& f : report.fusion_results) {
    rows.emplace_back("(" + std::to_string(f.pair.image.t) + " " + std::to_string(f.pair.image.b) + ") & (" +
                          std::to_string(f.pair.text.t) + " " + std::to_string(f.pair.text.b) + ")",
                      f.result);
  }
  WriteText(Out(c, "fusion.csv"), EvalCsv(rows));
  std::cout << "winner image(t=" << report.winner.pair.image.t << ",b=" << report.winner.pair.image.b
            << ") text(t=" << report.winner.pair.text.t << ",b=" << report.winner.pair.text.b
            << ") mAP=" << FormatEvalRow(report.winner.result).substr(0, FormatEvalRow(report.winner.result).find(','))
            << " evals image=" << report.counts.image << " text=" << report.counts.text
            << " fusion=" << report.counts.fusion << "\n";
}

void CmdFuse(const Common& common, const std::string& report_path, const std::string& image_cell,
             const std::string& text_cell, const std::string& strategies) {
  RunConfig c = common.Load();
  Begin(c);
  const Workspace ws(c);
  FusionPair pair;
  if (!report_path.empty()) {
    pair = ParseSearchReport(ReadFileBytes(report_path)).winner.pair;
  } else {
    if (image_cell.empty() || text_cell.empty()) {
      throw Error(ErrorKind::kConfig, "fuse needs --report or both --image-cell and --text-cell");
    }
    const auto [it, ib] = ParseCell(image_cell);
    const auto [tt, tb] = ParseCell(text_cell);
    pair = {MakePoint(Modality::kImage, ws.space(Modality::kImage), it, ib),
            MakePoint(Modality::kText, ws.space(Modality::kText), tt, tb)};
  }
  const auto list = ParseStrategies(strategies);
  const FusionStrategy cluster_strategy =
      std::find(list.begin(), list.end(), c.fusion) != list.end() ? c.fusion : list.front();
  auto evaluator = ws.MakeEvaluator();
  const MatrixD ytr = ws.data().Labels(Split::kTrain);
  const MatrixD yva = ws.data().Labels(Split::kVal);
  const FusionComparison cmp = CompareFusion(*evaluator, pair, list, ytr, yva, cluster_strategy);

  std::vector<std::pair<std::string, EvalResult>> rows{{"image", cmp.image}, {"text", cmp.text}};
  WriteText(Out(c, "loss_image.csv"), LossCsv(cmp.image_log));
  WriteText(Out(c, "loss_text.csv"), LossCsv(cmp.text_log));
  for (const auto& o : cmp.fused) {
    const std::string name(FusionStrategyName(o.strategy));
    rows.emplace_back(name, o.result);
    WriteText(Out(c, "loss_" + name + ".csv"), LossCsv(o.log));
  }
  WriteText(Out(c, "fusion_eval.csv"), EvalCsv(rows));
  WriteText(Out(c, "cluster.json"), ClusterQualityJson(cmp.clusters));
  WriteText(Out(c, "powerset.json"),
            PowersetJson(MakePowersetReport(ThresholdSets(cmp.fused_scores, c.threshold), TruthSets(yva))));
  const EvalResult& fused = cmp.outcome(cluster_strategy).result;
  WriteText(Out(c, "per_class.csv"),
            PerClassCsv(fused, ws.synthetic() ? ws.synthetic()->catalog()
                                              : (c.data.catalog_path.empty() ? ClassCatalog{}
                                                                             : ReadCatalog(c.data.catalog_path))));

  // Embeddings behind the cluster indices, for external 2-D projection.
  const auto [sel, labels] = SingleLabelRows(yva);
  const auto img = evaluator->Features(pair.image);
  const auto txt = evaluator->Features(pair.text);
  const auto trained = TrainFused(img->train, txt->train, ytr, cluster_strategy, c.loss,
                                  evaluator->options().train, evaluator->options().dims);
  const MatrixD fused_rep = Fuse(trained.fusion, img->val, txt->val);
  auto dump = [&, &sel = sel](const MatrixD& m, Modality mod, int t, int b, const std::string& name) {
    FeatureMatrix f;
    f.modality = mod;
    f.t = t;
    f.b = b;
    f.data.resize(static_cast<Eigen::Index>(sel.size()), m.cols());
    for (std::size_t i = 0; i < sel.size(); ++i) f.data.row(static_cast<Eigen::Index>(i)) = m.row(sel[i]).cast<float>();
    WriteFeatureCache(Out(c, name), f);
  };
  dump(img->val.pooled, Modality::kImage, pair.image.t, pair.image.b, "embedding_image.dfft");
  dump(txt->val.pooled, Modality::kText, pair.text.t, pair.text.b, "embedding_text.dfft");
  dump(fused_rep, Modality::kFused, 0, 0, "embedding_fused.dfft");
  std::string lab = "row,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) lab += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  WriteText(Out(c, "cluster_labels.csv"), lab);
}

void CmdReport(const Common& common, const std::string& heatmap, const std::string& modality,
               const std::string& report_path) {
  RunConfig c = common.Load();
  if (heatmap.empty() && report_path.empty()) {
    throw Error(ErrorKind::kConfig, "report needs --heatmap and/or --search-report");
  }
  Begin(c);
  if (!heatmap.empty()) {
    const Modality m = ParseModality(modality);
    std::vector<GridCell> cells;
    for (auto& cell : ParseHeatmapCsv(ReadFileBytes(heatmap))) {
      if (cell.point.modality == m) cells.push_back(std::move(cell));
    }
    if (cells.empty()) throw Error(ErrorKind::kIo, "heatmap has no " + modality + " rows");
    WriteText(Out(c, "table_" + std::string(ModalityName(m)) + ".csv"), GridTableCsv(cells));
  }
  if (!report_path.empty()) {
    const SearchReport r = ParseSearchReport(ReadFileBytes(report_path));
    const auto& w = r.winner.pair;
    const std::pair<std::string, EvalResult> row{
        "(" + std::to_string(w.image.t) + " " + std::to_string(w.image.b) + ") & (" +
            std::to_string(w.text.t) + " " + std::to_string(w.text.b) + ")",
        r.winner.result};
    WriteText(Out(c, "winner.csv"), EvalCsv(std::span(&row, 1)));
  }
}

void CmdStats(const Common& common, const std::string& records_path, const std::string& catalog_path,
              int bucket_width) {
  RunConfig c = common.Load();
  Begin(c);
  std::vector<DatasetRecord> records;
  ClassCatalog catalog;
  if (records_path.empty()) {
    const auto bench = SyntheticBenchmark::Generate(MakeSyntheticSpec(c));
    records = bench.records(Split::kTrain);
    catalog = bench.catalog();
  } else {
    if (catalog_path.empty()) throw Error(ErrorKind::kConfig, "--records needs --catalog");
    records = ReadRecords(records_path);
    catalog = ReadCatalog(catalog_path);
  }
  WriteText(Out(c, "rare_stats.csv"), RareStatsCsv(RareCategoryStats(records, catalog)));
  const HashTokenizer tokenizer(c.text_backbone.vocab_size);
  std::vector<int> lengths;
  for (const auto& r : records) lengths.push_back(static_cast<int>(tokenizer.Encode(r.caption).size()));
  WriteText(Out(c, "length_histogram.csv"), LengthHistogramCsv(TokenLengthHistogram(lengths, bucket_width)));
}

void CmdTTest(const Common& common, const std::string& a_path, const std::string& b_path,
              bool noise, const std::string& modality, const std::string& cell, int repeats) {
  RunConfig c = common.Load();
  Begin(c);
  TTestResult r;
  if (noise) {
    const Workspace ws(c);
    const Modality m = ParseModality(modality);
    const auto [ti, bi] = ParseCell(cell);
    const NoiseComparison cmp = CompareNoiseModes(ws, MakePoint(m, ws.space(m), ti, bi), repeats);
    std::string csv = "repeat,deterministic,stochastic\n";
    for (std::size_t i = 0; i < cmp.deterministic.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", i, cmp.deterministic[i], cmp.stochastic[i]);
      csv += buf;
    }
    WriteText(Out(c, "noise_comparison.csv"), csv);
    r = cmp.test;
  } else {
    if (a_path.empty() || b_path.empty()) throw Error(ErrorKind::kConfig, "ttest needs --a and --b, or --noise");
    r = PairedTTest(ReadNumbers(a_path), ReadNumbers(b_path));
  }
  WriteText(Out(c, "ttest.json"), TTestJson(r));
  std::printf("t=%.6f p=%.6g n=%zu\n", r.t_value, r.p_value, r.n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-feature probing, fusion and configuration search"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-synthetic", "Write the synthetic benchmark records");
  AddCommon(gen, common);

  std::string records, catalog;
  auto* augment = app.add_subcommand("augment", "Append label sentences to captions");
  AddCommon(augment, common);
  augment->add_option("--records", records, "Input records (JSONL)")->required();
  augment->add_option("--catalog", catalog, "Class catalog (JSON)")->required();

  std::string modality = "image", split = "train", cell = "0,0";
  auto* extract = app.add_subcommand("extract", "Extract pooled features of one cell");
  AddCommon(extract, common);
  extract->add_option("--modality", modality)->check(CLI::IsMember({"image", "text"}));
  extract->add_option("--split", split)->check(CLI::IsMember({"train", "val"}));
  extract->add_option("--cell", cell, "t_index,b_index in the configured grid");

  std::string train_features, val_features;
  auto* probe = app.add_subcommand("probe", "Train and evaluate a linear probe");
  AddCommon(probe, common);
  probe->add_option("--modality", modality)->check(CLI::IsMember({"image", "text"}));
  probe->add_option("--cell", cell, "t_index,b_index in the configured grid");
  probe->add_option("--train-features", train_features, "Feature cache instead of extraction");
  probe->add_option("--val-features", val_features);

  bool exhaustive = false;
  auto* search = app.add_subcommand("search", "Grid + local search over block/timestep pairs");
  AddCommon(search, common);
  search->add_flag("--exhaustive", exhaustive, "Evaluate every cross-modal pair");

  std::string report_path, image_cell, text_cell, strategies = "all";
  auto* fuse = app.add_subcommand("fuse", "Compare fusion strategies on one pair");
  AddCommon(fuse, common);
  fuse->add_option("--report", report_path, "Use the winner of a search report");
  fuse->add_option("--image-cell", image_cell);
  fuse->add_option("--text-cell", text_cell);
  fuse->add_option("--strategies", strategies, "'all' or a comma-separated list");

  std::string heatmap;
  auto* report = app.add_subcommand("report", "Tabulate heatmap and search outputs");
  AddCommon(report, common);
  report->add_option("--heatmap", heatmap);
  report->add_option("--modality", modality)->check(CLI::IsMember({"image", "text"}));
  report->add_option("--search-report", report_path);

  int bucket_width = 15;
  auto* stats = app.add_subcommand("stats", "Rare-category and token-length statistics");
  AddCommon(stats, common);
  stats->add_option("--records", records);
  stats->add_option("--catalog", catalog);
  stats->add_option("--bucket-width", bucket_width)->check(CLI::PositiveNumber);

  std::string a_path, b_path;
  bool noise = false;
  int repeats = 5;
  auto* ttest = app.add_subcommand("ttest", "Paired t-test");
  AddCommon(ttest, common);
  ttest->add_option("--a", a_path, "One value per line");
  ttest->add_option("--b", b_path);
  ttest->add_flag("--noise", noise, "Compare deterministic and stochastic noising");
  ttest->add_option("--modality", modality)->check(CLI::IsMember({"image", "text"}));
  ttest->add_option("--cell", cell);
  ttest->add_option("--repeats", repeats)->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return 2;
  }

  try {
    if (*gen) CmdGenSynthetic(common);
    if (*augment) CmdAugment(common, records, catalog);
    if (*extract) CmdExtract(common, modality, split, cell);
    if (*probe) CmdProbe(common, modality, cell, train_features, val_features);
    if (*search) CmdSearch(common, exhaustive);
    if (*fuse) CmdFuse(common, report_path, image_cell, text_cell, strategies);
    if (*report) CmdReport(common, heatmap, modality, report_path);
    if (*stats) CmdStats(common, records, catalog, bucket_width);
    if (*ttest) CmdTTest(common, a_path, b_path, noise, modality, cell, repeats);
  } catch (const Error& e) {
    PrintError(ErrorKindName(e.kind()), e.what());
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return 1;
  }
  return 0;
}
