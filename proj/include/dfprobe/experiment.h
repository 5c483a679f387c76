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

#ifndef DFPROBE_EXPERIMENT_H_
#define DFPROBE_EXPERIMENT_H_

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfprobe/config.h"

namespace dfprobe {

// Everything a run needs, built once from a RunConfig.
class Workspace {
 public:
  explicit Workspace(const RunConfig& config);

  const RunConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const DatasetSource& data() const { return *data_; }
  // Null unless the run uses the synthetic benchmark.
  const SyntheticBenchmark* synthetic() const { return synthetic_; }
  const Backbone& backbone(Modality m) const;
  const SearchSpace& space(Modality m) const;

  // Fresh evaluator, by default with the configured options.
  std::unique_ptr<ProbeEvaluator> MakeEvaluator() const;
  std::unique_ptr<ProbeEvaluator> MakeEvaluator(const ProbeEvaluatorOptions& options) const;

 private:
  RunConfig config_;
  NoiseSchedule schedule_;
  std::unique_ptr<DatasetSource> data_;
  const SyntheticBenchmark* synthetic_ = nullptr;
  Backbone image_;
  Backbone text_;
  SearchSpace image_space_;
  SearchSpace text_space_;
};

struct StrategyOutcome {
  FusionStrategy strategy = FusionStrategy::kLinearAddition;
  EvalResult result;
  LossLog log;
};

struct FusionComparison {
  FusionPair pair;
  EvalResult image;
  EvalResult text;
  LossLog image_log;
  LossLog text_log;
  std::vector<StrategyOutcome> fused;
  // Cluster indices of the unimodal and fused validation features, keyed
  // "image", "text" and "fused".
  std::vector<std::pair<std::string, ClusterQuality>> clusters;
  std::size_t cluster_samples = 0;
  // Validation scores of the cluster strategy, for powerset accounting.
  MatrixD fused_scores;

  const StrategyOutcome& outcome(FusionStrategy s) const;
};

// Trains unimodal probes on both cells and every requested fusion strategy
// on the pair. Cluster indices use validation samples carrying exactly one
// label, with the fused representation of `cluster_strategy`.
FusionComparison CompareFusion(ProbeEvaluator& evaluator, const FusionPair& pair,
                               std::span<const FusionStrategy> strategies,
                               const MatrixD& train_labels, const MatrixD& val_labels,
                               FusionStrategy cluster_strategy = FusionStrategy::kLinearAddition);

// Rows with exactly one positive label and that label's index.
std::pair<std::vector<Eigen::Index>, std::vector<int>> SingleLabelRows(const MatrixD& labels);

struct NoiseComparison {
  std::vector<double> deterministic;  // validation mAP per repeat
  std::vector<double> stochastic;
  TTestResult test;  // deterministic - stochastic
};

// Probes one cell under both noising modes for `repeats` seeds (noise and
// training seed = base seed + r) and runs a paired t-test on the mAPs.
NoiseComparison CompareNoiseModes(const Workspace& ws, const ConfigPoint& point,
                                  int repeats);

}  // namespace dfprobe

#endif  // DFPROBE_EXPERIMENT_H_
