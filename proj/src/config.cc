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

#include "dfprobe/config.h"

#include <cmath>
#include <filesystem>

#include "dfprobe/io.h"
#include "dfprobe/report.h"
#include "json.hpp"

namespace dfprobe {

namespace {

using nlohmann::json;

std::string_view NoiseModeName(NoiseMode m) {
  return m == NoiseMode::kDeterministic ? "deterministic" : "stochastic";
}

NoiseMode ParseNoiseMode(std::string_view s) {
  if (s == "deterministic") return NoiseMode::kDeterministic;
  if (s == "stochastic") return NoiseMode::kStochastic;
  throw InvalidArgument("unknown noise mode '" + std::string(s) + "'");
}

std::string_view PrecisionName(Precision p) {
  return p == Precision::kSingle ? "single" : "double";
}

Precision ParsePrecision(std::string_view s) {
  if (s == "single") return Precision::kSingle;
  if (s == "double") return Precision::kDouble;
  throw InvalidArgument("unknown precision '" + std::string(s) + "'");
}

json BackboneJson(const BackboneConfig& b) {
  return {{"depth", b.depth},
          {"width", b.width},
          {"heads", b.heads},
          {"seq_len", b.seq_len},
          {"vocab_size", b.vocab_size},
          {"patch_input_dim", b.patch_input_dim},
          {"mlp_ratio", b.mlp_ratio},
          {"init_seed", b.init_seed}};
}

BackboneConfig BackboneFrom(const json& j, Modality m) {
  BackboneConfig b;
  b.modality = m;
  b.depth = j.at("depth").get<int>();
  b.width = j.at("width").get<int>();
  b.heads = j.at("heads").get<int>();
  b.seq_len = j.at("seq_len").get<int>();
  b.vocab_size = j.at("vocab_size").get<int>();
  b.patch_input_dim = j.at("patch_input_dim").get<int>();
  b.mlp_ratio = j.at("mlp_ratio").get<int>();
  b.init_seed = j.at("init_seed").get<std::uint64_t>();
  return b;
}

json GridJson(const GridParams& g) {
  return {{"timesteps", g.timesteps},
          {"blocks", g.blocks},
          {"reference_depth", g.reference_depth}};
}

GridParams GridFrom(const json& j) {
  GridParams g;
  g.timesteps = j.at("timesteps").get<std::vector<int>>();
  g.blocks = j.at("blocks").get<std::vector<int>>();
  g.reference_depth = j.at("reference_depth").get<int>();
  return g;
}

json ToJson(const RunConfig& c) {
  const SyntheticParams& s = c.data.synthetic;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"schedule",
       {{"steps", c.schedule.steps},
        {"beta_min", c.schedule.beta_min},
        {"beta_max", c.schedule.beta_max}}},
      {"noise_mode", std::string(NoiseModeName(c.noise_mode))},
      {"image_backbone", BackboneJson(c.image_backbone)},
      {"text_backbone", BackboneJson(c.text_backbone)},
      {"image_grid", GridJson(c.image_grid)},
      {"text_grid", GridJson(c.text_grid)},
      {"train",
       {{"lr0", c.train.lr0},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"adam_eps", c.train.adam_eps},
        {"precision", std::string(PrecisionName(c.train.precision))}}},
      {"loss", std::string(LossKindName(c.loss))},
      {"fusion",
       {{"strategy", std::string(FusionStrategyName(c.fusion))},
        {"d_alg", c.fusion_dims.d_alg},
        {"d_k", c.fusion_dims.d_k}}},
      {"search",
       {{"radius", c.search_radius},
        {"max_pairs", c.max_pairs},
        {"threads", c.threads}}},
      {"threshold", c.threshold},
      {"data",
       {{"train_path", c.data.train_path},
        {"val_path", c.data.val_path},
        {"catalog_path", c.data.catalog_path},
        {"synthetic",
         {{"n_train", s.n_train},
          {"n_val", s.n_val},
          {"classes", s.classes},
          {"label_density", s.label_density},
          {"image_signal", s.image_signal},
          {"text_spurious_rate", s.text_spurious_rate},
          {"image_peak_t_index", s.image_peak_t_index},
          {"image_peak_b_index", s.image_peak_b_index},
          {"image_floor", s.image_floor},
          {"image_width", s.image_width},
          {"text_low", s.text_low},
          {"text_high", s.text_high}}}}},
  };
}

RunConfig FromJson(const json& j) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  const json& sch = j.at("schedule");
  c.schedule.steps = sch.at("steps").get<int>();
  c.schedule.beta_min = sch.at("beta_min").get<double>();
  c.schedule.beta_max = sch.at("beta_max").get<double>();
  c.noise_mode = ParseNoiseMode(j.at("noise_mode").get<std::string>());
  c.image_backbone = BackboneFrom(j.at("image_backbone"), Modality::kImage);
  c.text_backbone = BackboneFrom(j.at("text_backbone"), Modality::kText);
  c.image_grid = GridFrom(j.at("image_grid"));
  c.text_grid = GridFrom(j.at("text_grid"));
  const json& tr = j.at("train");
  c.train.lr0 = tr.at("lr0").get<double>();
  c.train.epochs = tr.at("epochs").get<int>();
  c.train.batch_size = tr.at("batch_size").get<int>();
  c.train.adam_beta1 = tr.at("adam_beta1").get<double>();
  c.train.adam_beta2 = tr.at("adam_beta2").get<double>();
  c.train.adam_eps = tr.at("adam_eps").get<double>();
  c.train.precision = ParsePrecision(tr.at("precision").get<std::string>());
  c.train.seed = c.seed;
  c.loss = ParseLossKind(j.at("loss").get<std::string>());
  const json& fu = j.at("fusion");
  c.fusion = ParseFusionStrategy(fu.at("strategy").get<std::string>());
  c.fusion_dims.d_alg = fu.at("d_alg").get<Eigen::Index>();
  c.fusion_dims.d_k = fu.at("d_k").get<Eigen::Index>();
  const json& se = j.at("search");
  c.search_radius = se.at("radius").get<int>();
  c.max_pairs = se.at("max_pairs").get<std::size_t>();
  c.threads = se.at("threads").get<int>();
  c.threshold = j.at("threshold").get<double>();
  const json& d = j.at("data");
  c.data.train_path = d.at("train_path").get<std::string>();
  c.data.val_path = d.at("val_path").get<std::string>();
  c.data.catalog_path = d.at("catalog_path").get<std::string>();
  const json& s = d.at("synthetic");
  SyntheticParams& p = c.data.synthetic;
  p.n_train = s.at("n_train").get<int>();
  p.n_val = s.at("n_val").get<int>();
  p.classes = s.at("classes").get<int>();
  p.label_density = s.at("label_density").get<double>();
  p.image_signal = s.at("image_signal").get<double>();
  p.text_spurious_rate = s.at("text_spurious_rate").get<double>();
  p.image_peak_t_index = s.at("image_peak_t_index").get<int>();
  p.image_peak_b_index = s.at("image_peak_b_index").get<int>();
  p.image_floor = s.at("image_floor").get<double>();
  p.image_width = s.at("image_width").get<double>();
  p.text_low = s.at("text_low").get<double>();
  p.text_high = s.at("text_high").get<double>();
  return c;
}

// Every key of `doc` must exist in `schema`, recursively through objects.
void CheckKeys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) throw Error(ErrorKind::kConfig, "config" + prefix + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix + "." + key;
    if (!schema.contains(key)) throw Error(ErrorKind::kConfig, "unknown config key '" + path.substr(1) + "'");
    if (schema.at(key).is_object()) CheckKeys(value, schema.at(key), path);
  }
}

RunConfig FromJsonChecked(const json& doc) {
  const json defaults = ToJson(RunConfig());
  CheckKeys(doc, defaults, "");
  json merged = defaults;
  merged.merge_patch(doc);
  RunConfig c;
  try {
    c = FromJson(merged);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("bad config value: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  c.Validate();
  return c;
}

}  // namespace

RunConfig::RunConfig() {
  image_backbone.modality = Modality::kImage;
  image_backbone.patch_input_dim = 16;
  image_backbone.init_seed = 1;
  text_backbone.modality = Modality::kText;
  text_backbone.vocab_size = 256;
  text_backbone.init_seed = 2;
  image_grid.timesteps = {10, 20, 30, 50, 100, 150};
  text_grid.timesteps = {0, 10, 20, 30};
}

void RunConfig::Validate() const {
  try {
    NoiseSchedule::Linear(schedule.steps, schedule.beta_min, schedule.beta_max);
    image_backbone.Validate();
    text_backbone.Validate();
    ResolveSpace(image_grid, image_backbone.depth).Validate(image_backbone.depth, schedule.steps);
    ResolveSpace(text_grid, text_backbone.depth).Validate(text_backbone.depth, schedule.steps);
    train.Validate();
    if (fusion_dims.d_alg < 1 || fusion_dims.d_k < 1) throw InvalidArgument("fusion dims must be positive");
    if (search_radius < 0) throw InvalidArgument("search radius must be >= 0");
    if (threads < 0) throw InvalidArgument("threads must be >= 0");
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
    if (output_dir.empty()) throw InvalidArgument("output_dir must be set");
    if (data.train_path.empty() != data.val_path.empty()) {
      throw InvalidArgument("train_path and val_path must be given together");
    }
    if (data.train_path.empty()) MakeSyntheticSpec(*this).Validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    throw Error(ErrorKind::kConfig, e.what());
  }
}

RunConfig ParseRunConfig(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return FromJsonChecked(doc);
}

RunConfig ApplyOverrides(const RunConfig& config,
                         const std::vector<std::string>& overrides) {
  json doc = ToJson(config);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::kConfig, "override must be key=value: '" + o + "'");
    }
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // bare string
    }
    std::string pointer = "/" + key;
    for (char& ch : pointer) {
      if (ch == '.') ch = '/';
    }
    const json::json_pointer ptr(pointer);
    if (!doc.contains(ptr)) throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
    if (doc.at(ptr).is_string() && !value.is_string()) value = raw;
    doc[ptr] = value;
  }
  return FromJsonChecked(doc);
}

RunConfig LoadRunConfig(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c;
  if (!path.empty()) {
    std::string text;
    try {
      text = ReadFileBytes(path);
    } catch (const Error& e) {
      throw Error(ErrorKind::kIo, e.what());
    }
    c = ParseRunConfig(text);
  }
  return ApplyOverrides(c, overrides);
}

std::string RunConfigJson(const RunConfig& config) { return ToJson(config).dump(2) + "\n"; }

void WriteConfigSnapshot(const RunConfig& config, const std::string& dir) {
  WriteText((std::filesystem::path(dir) / "config.json").string(), RunConfigJson(config));
}

std::vector<int> RescaleBlocks(const std::vector<int>& blocks, int reference_depth, int depth) {
  if (reference_depth < 1 || depth < 1) throw InvalidArgument("depths must be positive");
  std::vector<int> out;
  out.reserve(blocks.size());
  for (int b : blocks) {
    if (b < 1 || b > reference_depth) {
      throw InvalidArgument("block " + std::to_string(b) + " outside 1.." + std::to_string(reference_depth));
    }
    // Halves round up: 24 -> depth, 12 -> depth / 2.
    const int mapped = depth == reference_depth
                           ? b
                           : static_cast<int>(std::floor(static_cast<double>(b) * depth / reference_depth + 0.5));
    out.push_back(std::max(1, mapped));
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) {
      throw InvalidArgument("blocks collapse after rescaling to depth " + std::to_string(depth));
    }
  }
  return out;
}

SearchSpace ResolveSpace(const GridParams& grid, int depth) {
  return {grid.timesteps, RescaleBlocks(grid.blocks, grid.reference_depth, depth)};
}

NoiseSchedule MakeSchedule(const RunConfig& config) {
  return NoiseSchedule::Linear(config.schedule.steps, config.schedule.beta_min,
                               config.schedule.beta_max);
}

SyntheticSpec MakeSyntheticSpec(const RunConfig& config) {
  const SyntheticParams& p = config.data.synthetic;
  SyntheticSpec s;
  s.n_train = p.n_train;
  s.n_val = p.n_val;
  s.classes = p.classes;
  s.label_density = p.label_density;
  s.seq_len = config.image_backbone.seq_len;
  if (config.text_backbone.seq_len != s.seq_len) {
    throw InvalidArgument("synthetic benchmark needs equal image/text seq_len");
  }
  s.patch_input_dim = config.image_backbone.patch_input_dim;
  s.vocab_size = config.text_backbone.vocab_size;
  s.image_signal = p.image_signal;
  s.text_spurious_rate = p.text_spurious_rate;
  const int it = static_cast<int>(config.image_grid.timesteps.size());
  const int ib = static_cast<int>(config.image_grid.blocks.size());
  const int tt = static_cast<int>(config.text_grid.timesteps.size());
  const int tb = static_cast<int>(config.text_grid.blocks.size());
  s.image_profile = UnimodalProfile(it, ib, p.image_peak_t_index, p.image_peak_b_index,
                                    p.image_floor, p.image_width);
  s.text_profile = MonotoneProfile(tt, tb, p.text_low, p.text_high);
  s.seed = config.seed;
  return s;
}

ProbeEvaluatorOptions MakeEvaluatorOptions(const RunConfig& config) {
  ProbeEvaluatorOptions o;
  o.noise_mode = config.noise_mode;
  o.noise_seed = config.seed;
  o.train = config.train;
  o.train.seed = config.seed;
  o.loss = config.loss;
  o.strategy = config.fusion;
  o.dims = config.fusion_dims;
  o.threshold = config.threshold;
  o.threads = config.threads;
  return o;
}

}  // namespace dfprobe
