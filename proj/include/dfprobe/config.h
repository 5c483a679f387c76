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

#ifndef DFPROBE_CONFIG_H_
#define DFPROBE_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dfprobe/backbone.h"
#include "dfprobe/dataio.h"
#include "dfprobe/fusion.h"
#include "dfprobe/probe.h"
#include "dfprobe/schedule.h"
#include "dfprobe/search.h"

namespace dfprobe {

struct ScheduleParams {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

// Candidate grid in reference-depth block numbering; blocks are mapped onto
// the actual backbone depth by round(b * depth / reference_depth).
struct GridParams {
  std::vector<int> timesteps;
  std::vector<int> blocks = {8, 12, 16, 20, 24};
  int reference_depth = 24;
};

struct SyntheticParams {
  int n_train = 600;
  int n_val = 400;
  int classes = 8;
  double label_density = 2.0;
  double image_signal = 0.4;
  double text_spurious_rate = 0.05;
  int image_peak_t_index = 2;
  int image_peak_b_index = 1;
  double image_floor = 0.15;
  double image_width = 1.0;
  double text_low = 0.2;
  double text_high = 1.0;
};

struct DataParams {
  // Empty train path selects the synthetic benchmark.
  std::string train_path;
  std::string val_path;
  std::string catalog_path;
  SyntheticParams synthetic;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  ScheduleParams schedule;
  NoiseMode noise_mode = NoiseMode::kDeterministic;
  BackboneConfig image_backbone;
  BackboneConfig text_backbone;
  GridParams image_grid;
  GridParams text_grid;
  TrainConfig train;
  LossKind loss = LossKind::kBceMultiLabel;
  FusionStrategy fusion = FusionStrategy::kLinearAddition;
  FusionDims fusion_dims;
  int search_radius = 1;
  std::size_t max_pairs = 1000;
  int threads = 0;
  double threshold = 0.5;
  DataParams data;

  RunConfig();
  void Validate() const;
};

// Parses a JSON document over the defaults. Unknown keys are rejected.
RunConfig ParseRunConfig(const std::string& json_text);
// Applies "dotted.key=value" overrides; values are JSON literals or bare
// strings.
RunConfig ApplyOverrides(const RunConfig& config,
                         const std::vector<std::string>& overrides);
RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::string>& overrides = {});
// Fully specified JSON; ParseRunConfig(RunConfigJson(c)) reproduces c.
std::string RunConfigJson(const RunConfig& config);
// Writes <dir>/config.json.
void WriteConfigSnapshot(const RunConfig& config, const std::string& dir);

// Maps reference-depth blocks onto `depth`; throws when two collapse.
std::vector<int> RescaleBlocks(const std::vector<int>& blocks,
                               int reference_depth, int depth);
SearchSpace ResolveSpace(const GridParams& grid, int depth);

NoiseSchedule MakeSchedule(const RunConfig& config);
SyntheticSpec MakeSyntheticSpec(const RunConfig& config);
ProbeEvaluatorOptions MakeEvaluatorOptions(const RunConfig& config);

}  // namespace dfprobe

#endif  // DFPROBE_CONFIG_H_
