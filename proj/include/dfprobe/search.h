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

#ifndef DFPROBE_SEARCH_H_
#define DFPROBE_SEARCH_H_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "dfprobe/backbone.h"
#include "dfprobe/dataio.h"
#include "dfprobe/fusion.h"
#include "dfprobe/metrics.h"
#include "dfprobe/probe.h"
#include "dfprobe/schedule.h"

namespace dfprobe {

// Candidate timesteps and blocks of one modality, both strictly increasing.
struct SearchSpace {
  std::vector<int> timesteps;
  std::vector<int> blocks;

  std::size_t size() const { return timesteps.size() * blocks.size(); }
  void Validate(int depth, int steps) const;
};

struct ConfigPoint {
  Modality modality = Modality::kImage;
  int t_index = 0;
  int b_index = 0;
  int t = 0;
  int b = 0;

  friend bool operator==(const ConfigPoint&, const ConfigPoint&) = default;
};

ConfigPoint MakePoint(Modality modality, const SearchSpace& space, int t_index,
                      int b_index);

struct FusionPair {
  ConfigPoint image;
  ConfigPoint text;

  friend bool operator==(const FusionPair&, const FusionPair&) = default;
};

struct EvalCounts {
  std::int64_t image = 0;
  std::int64_t text = 0;
  std::int64_t fusion = 0;

  std::int64_t total() const { return image + text + fusion; }
};

struct GridCell {
  ConfigPoint point;
  EvalResult result;
};

struct FusionCandidate {
  FusionPair pair;
  EvalResult result;
};

struct SearchReport {
  bool exhaustive = false;
  std::string strategy;
  int radius = 1;
  std::vector<GridCell> image_grid;
  std::vector<GridCell> text_grid;
  ConfigPoint image_optimum;
  ConfigPoint text_optimum;
  std::vector<FusionPair> neighborhood;
  std::vector<FusionCandidate> fusion_results;
  FusionCandidate winner;
  EvalCounts counts;
};

// Scores configurations. Implementations count every probe they train so
// the search can report its cost.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::vector<EvalResult> EvaluateCells(
      std::span<const ConfigPoint> points) = 0;
  virtual std::vector<EvalResult> EvaluatePairs(
      std::span<const FusionPair> pairs) = 0;
  virtual std::string strategy_name() const { return ""; }

  EvalCounts counts() const;

 protected:
  void CountCell(Modality modality);
  void CountPair();

 private:
  std::atomic<std::int64_t> image_{0};
  std::atomic<std::int64_t> text_{0};
  std::atomic<std::int64_t> fusion_{0};
};

// Every cell of the grid in (t, b) order with its argmax. Ties keep the
// smaller timestep, then the smaller block.
struct UnimodalResult {
  std::vector<GridCell> grid;
  ConfigPoint best;
};
UnimodalResult UnimodalGrid(Modality modality, const SearchSpace& space,
                            Evaluator& evaluator);

// Grid points whose timestep and block indices lie within +/- radius of
// opt, clipped to the grid; includes opt.
std::vector<ConfigPoint> Neighborhood(const ConfigPoint& opt,
                                      const SearchSpace& space, int radius = 1);

// Cartesian product of the two neighborhoods.
std::vector<FusionPair> PairProduct(std::span<const ConfigPoint> image,
                                    std::span<const ConfigPoint> text);

// Unimodal grids, local neighborhoods, then fusion within the product.
SearchReport HeuristicSearch(const SearchSpace& image_space,
                             const SearchSpace& text_space, Evaluator& evaluator,
                             int radius = 1);

// Evaluates every cross-modal pair. Throws a budget error when the pair
// count exceeds max_pairs.
SearchReport ExhaustiveSearch(const SearchSpace& image_space,
                              const SearchSpace& text_space, Evaluator& evaluator,
                              std::size_t max_pairs);

// Index of the best candidate by mAP; ties keep the earlier entry.
std::size_t BestCandidate(std::span<const FusionCandidate> candidates);

struct ProbeEvaluatorOptions {
  NoiseMode noise_mode = NoiseMode::kDeterministic;
  std::uint64_t noise_seed = 0;
  TrainConfig train;
  LossKind loss = LossKind::kBceMultiLabel;
  FusionStrategy strategy = FusionStrategy::kLinearAddition;
  FusionDims dims;
  double threshold = 0.5;
  int threads = 0;  // 0 = hardware concurrency
};

// Extracted train/val features of one cell.
struct CellFeatures {
  ModalityView train;
  ModalityView val;
};

// Extracts backbone features for each cell, trains linear probes on the
// training split and scores the validation split. Features and unimodal
// results are cached by cell.
class ProbeEvaluator : public Evaluator {
 public:
  ProbeEvaluator(const DatasetSource& data, const Backbone& image_backbone,
                 const Backbone& text_backbone, const NoiseSchedule& schedule,
                 const SearchSpace& image_space, const SearchSpace& text_space,
                 ProbeEvaluatorOptions options);

  std::vector<EvalResult> EvaluateCells(std::span<const ConfigPoint> points) override;
  std::vector<EvalResult> EvaluatePairs(std::span<const FusionPair> pairs) override;
  std::string strategy_name() const override;

  // Cached features of a cell, extracting on first use.
  std::shared_ptr<const CellFeatures> Features(const ConfigPoint& point);

  const ProbeEvaluatorOptions& options() const { return options_; }

 private:
  const Backbone& BackboneFor(Modality m) const;
  void Prepare(std::span<const ConfigPoint> points);
  template <typename Fn>
  void RunParallel(std::size_t count, Fn&& fn) const;

  const DatasetSource& data_;
  const Backbone& image_backbone_;
  const Backbone& text_backbone_;
  const NoiseSchedule& schedule_;
  SearchSpace image_space_;
  SearchSpace text_space_;
  ProbeEvaluatorOptions options_;
  MatrixD train_labels_;
  MatrixD val_labels_;

  std::mutex mu_;
  std::map<std::tuple<int, int, int>, std::shared_ptr<const CellFeatures>> features_;
  std::map<std::tuple<int, int, int>, EvalResult> cell_results_;
};

}  // namespace dfprobe

#endif  // DFPROBE_SEARCH_H_
