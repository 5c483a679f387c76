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

#ifndef DFPROBE_FUSION_H_
#define DFPROBE_FUSION_H_

#include <optional>
#include <string_view>
#include <vector>

#include "dfprobe/backbone.h"
#include "dfprobe/common.h"
#include "dfprobe/probe.h"

namespace dfprobe {

enum class FusionStrategy {
  kSimpleConcat,
  kLinearConcat,
  kLinearAddition,
  kCrossAttention,
};

inline constexpr FusionStrategy kAllFusionStrategies[] = {
    FusionStrategy::kSimpleConcat, FusionStrategy::kLinearConcat,
    FusionStrategy::kLinearAddition, FusionStrategy::kCrossAttention};

std::string_view FusionStrategyName(FusionStrategy s);
FusionStrategy ParseFusionStrategy(std::string_view name);

// Projections act on column vectors: W_img is d_alg x d_img, and so on.
// Matrices a strategy does not use are left empty.
struct FusionModel {
  FusionStrategy strategy = FusionStrategy::kLinearAddition;
  Eigen::Index d_img = 0;
  Eigen::Index d_txt = 0;
  Eigen::Index d_alg = 512;
  Eigen::Index d_k = 512;
  MatrixD w_img;
  MatrixD w_txt;
  MatrixD w_q;
  MatrixD w_k;
  MatrixD w_v;

  Eigen::Index OutputDim() const;
};

// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) projections, no biases.
FusionModel InitFusion(FusionStrategy strategy, Eigen::Index d_img,
                       Eigen::Index d_txt, Eigen::Index d_alg,
                       Eigen::Index d_k, std::uint64_t seed);

// One modality's view of the samples. Token matrices are needed only by
// cross attention; without them each pooled row acts as a single token.
struct ModalityView {
  MatrixD pooled;                // N x d
  std::vector<MatrixD> tokens;   // N matrices of S x d, optional

  Eigen::Index rows() const { return pooled.rows(); }
  Eigen::Index dim() const { return pooled.cols(); }
  bool has_tokens() const { return !tokens.empty(); }
};

ModalityView MakeView(const FeatureMatrix& pooled,
                      const TokenFeatures* tokens = nullptr);

// Row-wise l2 normalization; throws on a zero-norm row.
MatrixD L2NormalizeRows(const MatrixD& x);

// N x OutputDim() fused representation.
MatrixD Fuse(const FusionModel& model, const ModalityView& img,
             const ModalityView& txt);

// Row-stochastic attention weights of one sample (queries = image tokens).
MatrixD CrossAttentionWeights(const FusionModel& model, const MatrixD& img_tokens,
                              const MatrixD& txt_tokens);

struct FusionDims {
  Eigen::Index d_alg = 512;
  Eigen::Index d_k = 512;
};

struct TrainedFusion {
  FusionModel fusion;
  ProbeModel probe;
  LossLog log;
};

// Trains fusion projections and the linear classifier jointly. Simple
// concat has no trainable fusion parameters and reduces to TrainProbe on
// the normalized concatenation.
TrainedFusion TrainFused(const ModalityView& img, const ModalityView& txt,
                         const MatrixD& labels, FusionStrategy strategy,
                         LossKind loss, const TrainConfig& cfg,
                         const FusionDims& dims = {});

// Scores of the trained fused classifier.
MatrixD PredictFused(const TrainedFusion& trained, const ModalityView& img,
                     const ModalityView& txt);

struct FusedGradient {
  double loss = 0.0;
  MatrixD w_img, w_txt, w_q, w_k, w_v;  // empty when unused
  MatrixD probe_weight;
  VectorD probe_bias;
};

// Full-set loss of the fused objective with analytic gradients for every
// trainable parameter, double precision.
FusedGradient FusedLossAndGradient(const FusionModel& fusion,
                                   const ProbeModel& probe,
                                   const ModalityView& img,
                                   const ModalityView& txt,
                                   const MatrixD& labels);

}  // namespace dfprobe

#endif  // DFPROBE_FUSION_H_
