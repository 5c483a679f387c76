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

#include "dfprobe/backbone.h"

#include <cmath>
#include <cstring>
#include <numbers>

#include "dfprobe/random.h"

namespace dfprobe {

void BackboneConfig::Validate() const {
  if (depth < 1) throw InvalidArgument("backbone depth must be >= 1");
  if (width < 1 || heads < 1 || width % heads != 0) {
    throw InvalidArgument("backbone width must be a positive multiple of heads");
  }
  if (seq_len < 1) throw InvalidArgument("backbone seq_len must be >= 1");
  if (mlp_ratio < 1) throw InvalidArgument("backbone mlp_ratio must be >= 1");
  if (modality == Modality::kText && vocab_size < 2) {
    throw InvalidArgument("text backbone needs vocab_size >= 2");
  }
  if (modality == Modality::kImage && patch_input_dim < 1) {
    throw InvalidArgument("image backbone needs patch_input_dim >= 1");
  }
  if (modality == Modality::kFused) {
    throw InvalidArgument("backbone modality must be image or text");
  }
}

VectorD SinusoidalEmbedding(double position, int width) {
  VectorD e(width);
  const int half = width / 2;
  for (int i = 0; i < width; ++i) {
    const int k = i % std::max(half, 1);
    const double freq =
        std::exp(-std::log(10000.0) * k / std::max(half, 1));
    e[i] = i < half ? std::sin(position * freq) : std::cos(position * freq);
  }
  return e;
}

FeatureMatrix TokenFeatures::MeanPool() const {
  FeatureMatrix out;
  out.modality = modality;
  out.t = t;
  out.b = b;
  if (tokens.empty()) return out;
  out.data.resize(static_cast<Eigen::Index>(tokens.size()), tokens[0].cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.data.row(static_cast<Eigen::Index>(i)) = tokens[i].colwise().mean();
  }
  return out;
}

namespace {

template <typename Scalar>
struct BlockParams {
  Vector<Scalar> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  Matrix<Scalar> wq, wk, wv, wo;  // width x width, applied as x * W
  Matrix<Scalar> w1;              // width x hidden
  Vector<Scalar> b1;
  Matrix<Scalar> w2;  // hidden x width
  Vector<Scalar> b2;
};

template <typename Scalar>
struct ParamSet {
  Matrix<Scalar> input_proj;  // patch_dim x width (image) or vocab x width
  Vector<Scalar> input_bias;  // image only
  Matrix<Scalar> position;    // seq_len x width
  std::vector<BlockParams<Scalar>> blocks;

  template <typename Other>
  ParamSet<Other> Cast() const {
    ParamSet<Other> out;
    out.input_proj = input_proj.template cast<Other>();
    out.input_bias = input_bias.template cast<Other>();
    out.position = position.template cast<Other>();
    out.blocks.reserve(blocks.size());
    for (const auto& b : blocks) {
      BlockParams<Other> c;
      c.ln1_gain = b.ln1_gain.template cast<Other>();
      c.ln1_bias = b.ln1_bias.template cast<Other>();
      c.ln2_gain = b.ln2_gain.template cast<Other>();
      c.ln2_bias = b.ln2_bias.template cast<Other>();
      c.wq = b.wq.template cast<Other>();
      c.wk = b.wk.template cast<Other>();
      c.wv = b.wv.template cast<Other>();
      c.wo = b.wo.template cast<Other>();
      c.w1 = b.w1.template cast<Other>();
      c.b1 = b.b1.template cast<Other>();
      c.w2 = b.w2.template cast<Other>();
      c.b2 = b.b2.template cast<Other>();
      out.blocks.push_back(std::move(c));
    }
    return out;
  }
};

MatrixD RandomMatrix(Rng& rng, int rows, int cols, double scale) {
  MatrixD m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.Normal();
  return m;
}

template <typename Scalar>
Matrix<Scalar> LayerNorm(const Matrix<Scalar>& x, const Vector<Scalar>& gain,
                         const Vector<Scalar>& bias) {
  constexpr Scalar kEps = Scalar(1e-5);
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + kEps);
    y.row(r) = (((x.row(r).array() - mean) * inv).transpose() * gain.array() +
                bias.array())
                   .transpose();
  }
  return y;
}

template <typename Scalar>
Scalar Gelu(Scalar v) {
  constexpr Scalar kC = Scalar(0.7978845608028654);  // sqrt(2/pi)
  return Scalar(0.5) * v *
         (Scalar(1) + std::tanh(kC * (v + Scalar(0.044715) * v * v * v)));
}

template <typename Scalar>
Matrix<Scalar> SelfAttention(const Matrix<Scalar>& x,
                             const BlockParams<Scalar>& p, int heads) {
  const Eigen::Index width = x.cols();
  const Eigen::Index head_dim = width / heads;
  const Matrix<Scalar> q = x * p.wq;
  const Matrix<Scalar> k = x * p.wk;
  const Matrix<Scalar> v = x * p.wv;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  Matrix<Scalar> out(x.rows(), width);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index off = h * head_dim;
    Matrix<Scalar> scores = q.middleCols(off, head_dim) *
                            k.middleCols(off, head_dim).transpose() * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      const Scalar m = scores.row(r).maxCoeff();
      scores.row(r) = (scores.row(r).array() - m).exp();
      scores.row(r) /= scores.row(r).sum();
    }
    out.middleCols(off, head_dim) = scores * v.middleCols(off, head_dim);
  }
  return out * p.wo;
}

template <typename Scalar>
Matrix<Scalar> BlockForward(const Matrix<Scalar>& x,
                            const BlockParams<Scalar>& p, int heads) {
  Matrix<Scalar> h =
      x + SelfAttention<Scalar>(LayerNorm<Scalar>(x, p.ln1_gain, p.ln1_bias),
                                p, heads);
  Matrix<Scalar> mid = LayerNorm<Scalar>(h, p.ln2_gain, p.ln2_bias) * p.w1;
  mid.rowwise() += p.b1.transpose();
  mid = mid.unaryExpr([](Scalar v) { return Gelu(v); });
  Matrix<Scalar> ff = mid * p.w2;
  ff.rowwise() += p.b2.transpose();
  return h + ff;
}

// Embeds the noised input and runs blocks 1..last, collecting each output.
template <typename Scalar>
std::vector<Matrix<Scalar>> RunBlocks(const ParamSet<Scalar>& params,
                                      const BackboneConfig& cfg,
                                      const Matrix<Scalar>& noised, int t,
                                      int last) {
  Matrix<Scalar> x;
  if (cfg.modality == Modality::kImage) {
    x = noised * params.input_proj;
    x.rowwise() += params.input_bias.transpose();
  } else {
    x = noised;
  }
  x += params.position;
  const Vector<Scalar> temb =
      SinusoidalEmbedding(static_cast<double>(t), cfg.width).cast<Scalar>();
  x.rowwise() += temb.transpose();

  std::vector<Matrix<Scalar>> taps;
  taps.reserve(last);
  for (int b = 0; b < last; ++b) {
    x = BlockForward<Scalar>(x, params.blocks[b], cfg.heads);
    taps.push_back(x);
  }
  return taps;
}

template <typename Scalar>
void HashMatrix(std::uint64_t& h, const Scalar* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, data + i, sizeof(Scalar));
    h = Mix64(h ^ bits);
  }
}

}  // namespace

struct Backbone::Weights {
  ParamSet<double> reference;
  ParamSet<float> fast;
};

Backbone::Backbone(const BackboneConfig& config) : config_(config) {
  config_.Validate();
  Rng rng(HashKey({config_.init_seed, 0x424b42}));
  const int w = config_.width;
  const int hidden = w * config_.mlp_ratio;
  ParamSet<double> p;
  if (config_.modality == Modality::kImage) {
    p.input_proj = RandomMatrix(rng, config_.patch_input_dim, w,
                                1.0 / std::sqrt(config_.patch_input_dim));
    p.input_bias = VectorD::Zero(w);
  } else {
    p.input_proj = RandomMatrix(rng, config_.vocab_size, w, 1.0);
    p.input_bias = VectorD::Zero(w);
  }
  p.position.resize(config_.seq_len, w);
  for (int s = 0; s < config_.seq_len; ++s) {
    p.position.row(s) = SinusoidalEmbedding(s, w).transpose();
  }
  const double attn_scale = 1.0 / std::sqrt(w);
  // Output projections are shrunk so the residual stream stays O(1) deep
  // into the stack.
  const double out_scale = attn_scale / std::sqrt(2.0 * config_.depth);
  for (int b = 0; b < config_.depth; ++b) {
    BlockParams<double> bp;
    bp.ln1_gain = VectorD::Ones(w);
    bp.ln1_bias = VectorD::Zero(w);
    bp.ln2_gain = VectorD::Ones(w);
    bp.ln2_bias = VectorD::Zero(w);
    bp.wq = RandomMatrix(rng, w, w, attn_scale);
    bp.wk = RandomMatrix(rng, w, w, attn_scale);
    bp.wv = RandomMatrix(rng, w, w, attn_scale);
    bp.wo = RandomMatrix(rng, w, w, out_scale);
    bp.w1 = RandomMatrix(rng, w, hidden, attn_scale);
    bp.b1 = VectorD::Zero(hidden);
    bp.w2 = RandomMatrix(rng, hidden, w,
                         1.0 / std::sqrt(hidden * 2.0 * config_.depth));
    bp.b2 = VectorD::Zero(w);
    p.blocks.push_back(std::move(bp));
  }
  weights_ = std::make_unique<Weights>();
  weights_->fast = p.Cast<float>();
  weights_->reference = std::move(p);
}

Backbone::~Backbone() = default;
Backbone::Backbone(Backbone&&) noexcept = default;
Backbone& Backbone::operator=(Backbone&&) noexcept = default;

MatrixF Backbone::CleanInput(const InputBatch& batch, std::size_t index) const {
  if (config_.modality == Modality::kImage) {
    const MatrixF& patches = batch.patches.at(index);
    if (patches.rows() != config_.seq_len ||
        patches.cols() != config_.patch_input_dim) {
      throw InvalidArgument("image sample has wrong patch matrix shape");
    }
    return patches;
  }
  const auto& toks = batch.tokens.at(index);
  if (static_cast<int>(toks.size()) != config_.seq_len) {
    throw InvalidArgument("text sample is not padded to seq_len");
  }
  MatrixF out(config_.seq_len, config_.width);
  for (int s = 0; s < config_.seq_len; ++s) {
    const int id = toks[s];
    if (id < 0 || id >= config_.vocab_size) {
      throw InvalidArgument("token id " + std::to_string(id) +
                            " outside vocabulary");
    }
    out.row(s) = weights_->fast.input_proj.row(id);
  }
  return out;
}

void Backbone::CheckRequest(const InputBatch& batch, const ExtractRequest& req,
                            const NoiseSchedule& schedule) const {
  if (batch.size() == 0) throw InvalidArgument("empty batch");
  if (batch.modality != config_.modality) {
    throw InvalidArgument("batch modality does not match backbone");
  }
  const std::size_t n = batch.size();
  if ((config_.modality == Modality::kText && batch.tokens.size() != n) ||
      (config_.modality == Modality::kImage && batch.patches.size() != n)) {
    throw InvalidArgument("batch payload size differs from sample_ids");
  }
  if (req.block < 1 || req.block > config_.depth) {
    throw InvalidArgument("block " + std::to_string(req.block) +
                          " outside [1, " + std::to_string(config_.depth) +
                          "]");
  }
  if (req.t < 0 || req.t > schedule.steps()) {
    throw InvalidArgument("timestep " + std::to_string(req.t) +
                          " outside schedule");
  }
}

std::vector<MatrixF> Backbone::ForwardSample(
    const InputBatch& batch, std::size_t index, const ExtractRequest& req,
    const NoiseSchedule& schedule) const {
  const MatrixF clean = CleanInput(batch, index);
  const auto noised = Noise(std::span<const float>(clean.data(), clean.size()),
                            req.t, schedule, req.mode, req.seed,
                            batch.sample_ids[index]);
  const MatrixF xt = Eigen::Map<const MatrixF>(noised.xt.data(), clean.rows(),
                                               clean.cols());
  return RunBlocks<float>(weights_->fast, config_, xt, req.t, req.block);
}

FeatureMatrix Backbone::Extract(const InputBatch& batch,
                                const ExtractRequest& req,
                                const NoiseSchedule& schedule) const {
  return ExtractTokens(batch, req, schedule).MeanPool();
}

TokenFeatures Backbone::ExtractTokens(const InputBatch& batch,
                                      const ExtractRequest& req,
                                      const NoiseSchedule& schedule) const {
  CheckRequest(batch, req, schedule);
  TokenFeatures out;
  out.modality = config_.modality;
  out.t = req.t;
  out.b = req.block;
  out.tokens.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto taps = ForwardSample(batch, i, req, schedule);
    out.tokens.push_back(std::move(taps.back()));
  }
  return out;
}

std::vector<FeatureMatrix> Backbone::ExtractAllBlocks(
    const InputBatch& batch, const ExtractRequest& req,
    const NoiseSchedule& schedule) const {
  CheckRequest(batch, req, schedule);
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<FeatureMatrix> out(req.block);
  for (int b = 0; b < req.block; ++b) {
    out[b].modality = config_.modality;
    out[b].t = req.t;
    out[b].b = b + 1;
    out[b].data.resize(n, config_.width);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto taps = ForwardSample(batch, static_cast<std::size_t>(i), req,
                                    schedule);
    for (int b = 0; b < req.block; ++b) {
      out[b].data.row(i) = taps[b].colwise().mean();
    }
  }
  return out;
}

std::vector<MatrixD> Backbone::ForwardReference(
    const InputBatch& batch, std::size_t index, const ExtractRequest& req,
    const NoiseSchedule& schedule) const {
  CheckRequest(batch, req, schedule);
  MatrixD clean;
  if (config_.modality == Modality::kImage) {
    clean = CleanInput(batch, index).cast<double>();
  } else {
    const auto& toks = batch.tokens.at(index);
    clean.resize(config_.seq_len, config_.width);
    for (int s = 0; s < config_.seq_len; ++s) {
      clean.row(s) = weights_->reference.input_proj.row(toks.at(s));
    }
  }
  const auto eps = DrawEpsilon(static_cast<std::size_t>(clean.size()), req.t,
                               req.mode, req.seed, batch.sample_ids.at(index));
  MatrixD xt = clean;
  const double a = schedule.alpha(req.t);
  const double s = schedule.sigma(req.t);
  for (Eigen::Index i = 0; i < xt.size(); ++i) {
    xt.data()[i] = a * clean.data()[i] + s * eps[static_cast<std::size_t>(i)];
  }
  return RunBlocks<double>(weights_->reference, config_, xt, req.t, req.block);
}

std::uint64_t Backbone::ParameterChecksum() const {
  std::uint64_t h = 0;
  auto add = [&h](const auto& m) {
    HashMatrix(h, m.data(), static_cast<std::size_t>(m.size()));
  };
  for (const auto* set : {&weights_->reference}) {
    add(set->input_proj);
    add(set->input_bias);
    add(set->position);
    for (const auto& b : set->blocks) {
      add(b.ln1_gain), add(b.ln1_bias), add(b.ln2_gain), add(b.ln2_bias);
      add(b.wq), add(b.wk), add(b.wv), add(b.wo);
      add(b.w1), add(b.b1), add(b.w2), add(b.b2);
    }
  }
  const auto& f = weights_->fast;
  add(f.input_proj);
  add(f.position);
  for (const auto& b : f.blocks) {
    add(b.wq), add(b.wk), add(b.wv), add(b.wo), add(b.w1), add(b.w2);
  }
  return h;
}

}  // namespace dfprobe
