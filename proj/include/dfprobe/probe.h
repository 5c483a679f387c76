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

#ifndef DFPROBE_PROBE_H_
#define DFPROBE_PROBE_H_

#include <cstdint>
#include <utility>
#include <vector>

#include "dfprobe/common.h"

namespace dfprobe {

enum class LossKind { kBceMultiLabel, kCeSingleLabel };
enum class Precision { kSingle, kDouble };

std::string_view LossKindName(LossKind k);
LossKind ParseLossKind(std::string_view name);

struct TrainConfig {
  double lr0 = 1e-3;
  int epochs = 40;
  int batch_size = 128;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Precision precision = Precision::kSingle;

  void Validate() const;
};

struct LossLog {
  std::vector<double> loss;     // mean training loss per epoch
  std::vector<double> seconds;  // wall clock per epoch
};

// scores = act(features * weight^T + bias)
struct ProbeModel {
  MatrixD weight;  // K x d
  VectorD bias;    // K
  LossKind loss = LossKind::kBceMultiLabel;

  Eigen::Index classes() const { return weight.rows(); }
  Eigen::Index dim() const { return weight.cols(); }
};

// Per-step cosine annealing from lr0 down to 0 over total_steps.
double CosineLearningRate(double lr0, std::int64_t step,
                          std::int64_t total_steps);

// Uniform(-1/sqrt(d), 1/sqrt(d)) weights, zero bias.
ProbeModel InitProbe(Eigen::Index dim, Eigen::Index classes, LossKind loss,
                     std::uint64_t seed);

// Checks that labels are binary (BCE) or one-hot rows (CE).
void ValidateLabels(const MatrixD& labels, LossKind loss);

struct TrainedProbe {
  ProbeModel model;
  LossLog log;
};

TrainedProbe TrainProbe(const MatrixF& features, const MatrixD& labels,
                        LossKind loss, const TrainConfig& cfg);

// Sigmoid scores for BCE models, row-wise softmax for CE models.
MatrixD Predict(const ProbeModel& model, const MatrixF& features);
MatrixD PredictD(const ProbeModel& model, const MatrixD& features);

struct ProbeGradient {
  double loss = 0.0;
  MatrixD weight;
  VectorD bias;
};

// Mean loss over the full set and its analytic gradient, double precision.
ProbeGradient ProbeLossAndGradient(const ProbeModel& model,
                                   const MatrixD& features,
                                   const MatrixD& labels);

}  // namespace dfprobe

#endif  // DFPROBE_PROBE_H_
