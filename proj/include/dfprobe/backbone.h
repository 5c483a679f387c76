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

#ifndef DFPROBE_BACKBONE_H_
#define DFPROBE_BACKBONE_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dfprobe/common.h"
#include "dfprobe/schedule.h"

namespace dfprobe {

struct BackboneConfig {
  Modality modality = Modality::kImage;
  int depth = 8;
  int width = 64;
  int heads = 4;
  int seq_len = 16;
  int vocab_size = 0;       // text only
  int patch_input_dim = 0;  // image only
  int mlp_ratio = 4;
  std::uint64_t init_seed = 0;

  void Validate() const;
};

// One batch of raw inputs. Text samples carry seq_len token ids; image
// samples carry a seq_len x patch_input_dim patch matrix.
struct InputBatch {
  Modality modality = Modality::kImage;
  std::vector<std::uint64_t> sample_ids;
  std::vector<std::vector<std::int32_t>> tokens;
  std::vector<MatrixF> patches;

  std::size_t size() const { return sample_ids.size(); }
};

// Pooled representations, one row per sample, tagged with where they came
// from.
struct FeatureMatrix {
  MatrixF data;
  Modality modality = Modality::kImage;
  int t = 0;
  int b = 0;
  std::string pooling = "mean";
  std::string provenance;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
};

// Block outputs before pooling, one seq_len x width matrix per sample.
struct TokenFeatures {
  std::vector<MatrixF> tokens;
  Modality modality = Modality::kImage;
  int t = 0;
  int b = 0;

  std::size_t size() const { return tokens.size(); }
  FeatureMatrix MeanPool() const;
};

struct ExtractRequest {
  int t = 0;
  int block = 1;
  NoiseMode mode = NoiseMode::kDeterministic;
  std::uint64_t seed = 0;
};

// Frozen pre-norm transformer with additive sinusoidal position and timestep
// embeddings. Every block output (after its residual add) is tappable.
class Backbone {
 public:
  explicit Backbone(const BackboneConfig& config);
  ~Backbone();
  Backbone(Backbone&&) noexcept;
  Backbone& operator=(Backbone&&) noexcept;
  Backbone(const Backbone&) = delete;
  Backbone& operator=(const Backbone&) = delete;

  const BackboneConfig& config() const { return config_; }

  // Pooled block-b features for the batch; rows follow batch order.
  FeatureMatrix Extract(const InputBatch& batch, const ExtractRequest& req,
                        const NoiseSchedule& schedule) const;

  TokenFeatures ExtractTokens(const InputBatch& batch,
                              const ExtractRequest& req,
                              const NoiseSchedule& schedule) const;

  // Pooled features for every block 1..req.block from one forward pass.
  std::vector<FeatureMatrix> ExtractAllBlocks(
      const InputBatch& batch, const ExtractRequest& req,
      const NoiseSchedule& schedule) const;

  // Single-sample forward in double precision, returning every block output
  // up to `block`. Reference path for invariant tests.
  std::vector<MatrixD> ForwardReference(const InputBatch& batch,
                                        std::size_t index,
                                        const ExtractRequest& req,
                                        const NoiseSchedule& schedule) const;

  // Clean input in the space where noise is applied: raw patches for
  // images, token embeddings for text.
  MatrixF CleanInput(const InputBatch& batch, std::size_t index) const;

  std::uint64_t ParameterChecksum() const;

 private:
  struct Weights;

  void CheckRequest(const InputBatch& batch, const ExtractRequest& req,
                    const NoiseSchedule& schedule) const;
  std::vector<MatrixF> ForwardSample(const InputBatch& batch,
                                     std::size_t index,
                                     const ExtractRequest& req,
                                     const NoiseSchedule& schedule) const;

  BackboneConfig config_;
  std::unique_ptr<Weights> weights_;
};

// Sinusoidal embedding of a scalar position into `width` channels.
VectorD SinusoidalEmbedding(double position, int width);

}  // namespace dfprobe

#endif  // DFPROBE_BACKBONE_H_
