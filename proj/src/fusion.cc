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

#include "dfprobe/fusion.h"

#include <cmath>

#include "training.h"

namespace dfprobe {

std::string_view FusionStrategyName(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kSimpleConcat:
      return "simple_concat";
    case FusionStrategy::kLinearConcat:
      return "linear_concat";
    case FusionStrategy::kLinearAddition:
      return "linear_addition";
    case FusionStrategy::kCrossAttention:
      return "cross_attention";
  }
  return "unknown";
}

FusionStrategy ParseFusionStrategy(std::string_view name) {
  for (FusionStrategy s : kAllFusionStrategies) {
    if (FusionStrategyName(s) == name) return s;
  }
  throw InvalidArgument("unknown fusion strategy '" + std::string(name) + "'");
}

Eigen::Index FusionModel::OutputDim() const {
  switch (strategy) {
    case FusionStrategy::kSimpleConcat:
      return d_img + d_txt;
    case FusionStrategy::kLinearConcat:
      return 2 * d_alg;
    case FusionStrategy::kLinearAddition:
      return d_alg;
    case FusionStrategy::kCrossAttention:
      return d_k;
  }
  return 0;
}

namespace {

MatrixD UniformMatrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-bound, bound);
  return m;
}

bool UsesProjections(FusionStrategy s) {
  return s == FusionStrategy::kLinearConcat || s == FusionStrategy::kLinearAddition;
}

}  // namespace

FusionModel InitFusion(FusionStrategy strategy, Eigen::Index d_img,
                       Eigen::Index d_txt, Eigen::Index d_alg,
                       Eigen::Index d_k, std::uint64_t seed) {
  if (d_img < 1 || d_txt < 1) throw InvalidArgument("fusion input dims must be >= 1");
  FusionModel m;
  m.strategy = strategy;
  m.d_img = d_img;
  m.d_txt = d_txt;
  m.d_alg = d_alg;
  m.d_k = d_k;
  Rng rng(HashKey({internal::kFusionInitTag, seed}));
  if (UsesProjections(strategy)) {
    if (d_alg < 1) throw InvalidArgument("d_alg must be >= 1");
    m.w_img = UniformMatrix(rng, d_alg, d_img);
    m.w_txt = UniformMatrix(rng, d_alg, d_txt);
  } else if (strategy == FusionStrategy::kCrossAttention) {
    if (d_k < 1) throw InvalidArgument("d_k must be >= 1");
    m.w_q = UniformMatrix(rng, d_k, d_img);
    m.w_k = UniformMatrix(rng, d_k, d_txt);
    m.w_v = UniformMatrix(rng, d_k, d_txt);
  }
  return m;
}

ModalityView MakeView(const FeatureMatrix& pooled, const TokenFeatures* tokens) {
  ModalityView v;
  v.pooled = pooled.data.cast<double>();
  if (tokens) {
    if (tokens->size() != static_cast<std::size_t>(pooled.rows())) {
      throw InvalidArgument("token and pooled features differ in sample count");
    }
    v.tokens.reserve(tokens->size());
    for (const auto& t : tokens->tokens) v.tokens.push_back(t.cast<double>());
  }
  return v;
}

MatrixD L2NormalizeRows(const MatrixD& x) {
  MatrixD out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (!(norm > 0.0)) {
      throw InvalidArgument("zero-norm row cannot be l2-normalized (row " +
                            std::to_string(i) + ")");
    }
    out.row(i) /= norm;
  }
  return out;
}

namespace {

void CheckInputs(const FusionModel& model, const ModalityView& img,
                 const ModalityView& txt) {
  if (img.rows() != txt.rows()) {
    throw InvalidArgument("image and text views differ in sample count");
  }
  if (img.dim() != model.d_img || txt.dim() != model.d_txt) {
    throw InvalidArgument("feature dimensions do not match the fusion model");
  }
  if (img.has_tokens() != txt.has_tokens()) {
    throw InvalidArgument("token features must be given for both modalities or neither");
  }
  if (img.has_tokens() &&
      (img.tokens.size() != static_cast<std::size_t>(img.rows()) ||
       txt.tokens.size() != static_cast<std::size_t>(txt.rows()))) {
    throw InvalidArgument("token feature count differs from pooled rows");
  }
}

template <typename Scalar>
struct ViewT {
  Matrix<Scalar> pooled;
  std::vector<Matrix<Scalar>> tokens;

  explicit ViewT(const ModalityView& v) : pooled(v.pooled.cast<Scalar>()) {
    if (v.has_tokens()) {
      tokens.reserve(v.tokens.size());
      for (const auto& t : v.tokens) tokens.push_back(t.cast<Scalar>());
    } else {
      // Each pooled row becomes a one-token sequence.
      tokens.reserve(static_cast<std::size_t>(v.rows()));
      for (Eigen::Index i = 0; i < v.rows(); ++i) tokens.push_back(pooled.row(i));
    }
  }
};

template <typename Scalar>
struct Params {
  Matrix<Scalar> w_img, w_txt, w_q, w_k, w_v;
};

// Single-sample cross attention; accumulates parameter gradients when
// `dfused` is given.
template <typename Scalar>
Vector<Scalar> CrossAttend(const Params<Scalar>& p, const Matrix<Scalar>& xi,
                           const Matrix<Scalar>& xt,
                           const Vector<Scalar>* dfused,
                           Params<Scalar>* grads) {
  const Scalar inv_sqrt_dk = Scalar(1) / std::sqrt(static_cast<Scalar>(p.w_q.rows()));
  const Matrix<Scalar> q = xi * p.w_q.transpose();
  const Matrix<Scalar> k = xt * p.w_k.transpose();
  const Matrix<Scalar> v = xt * p.w_v.transpose();
  Matrix<Scalar> a = q * k.transpose() * inv_sqrt_dk;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const Scalar m = a.row(r).maxCoeff();
    a.row(r) = (a.row(r).array() - m).exp();
    a.row(r) /= a.row(r).sum();
  }
  const Matrix<Scalar> o = a * v;
  Vector<Scalar> fused = o.colwise().mean().transpose();
  if (dfused) {
    const auto rows = static_cast<Scalar>(o.rows());
    Matrix<Scalar> d_o(o.rows(), o.cols());
    d_o.rowwise() = (*dfused).transpose() / rows;
    const Matrix<Scalar> d_a = d_o * v.transpose();
    const Matrix<Scalar> d_v = a.transpose() * d_o;
    const Vector<Scalar> inner = (d_a.cwiseProduct(a)).rowwise().sum();
    const Matrix<Scalar> d_s =
        (a.array() * (d_a.colwise() - inner).array()).matrix();
    const Matrix<Scalar> d_q = d_s * k * inv_sqrt_dk;
    const Matrix<Scalar> d_k = d_s.transpose() * q * inv_sqrt_dk;
    grads->w_q.noalias() += d_q.transpose() * xi;
    grads->w_k.noalias() += d_k.transpose() * xt;
    grads->w_v.noalias() += d_v.transpose() * xt;
  }
  return fused;
}

template <typename Scalar>
Matrix<Scalar> ForwardRows(FusionStrategy strategy, const Params<Scalar>& p,
                           const ViewT<Scalar>& img, const ViewT<Scalar>& txt,
                           std::span<const Eigen::Index> idx) {
  if (strategy == FusionStrategy::kCrossAttention) {
    Matrix<Scalar> out(static_cast<Eigen::Index>(idx.size()), p.w_q.rows());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.row(static_cast<Eigen::Index>(r)) =
          CrossAttend<Scalar>(p, img.tokens[idx[r]], txt.tokens[idx[r]],
                              nullptr, nullptr)
              .transpose();
    }
    return out;
  }
  const Matrix<Scalar> hi = internal::GatherRows<Scalar>(img.pooled, idx);
  const Matrix<Scalar> ht = internal::GatherRows<Scalar>(txt.pooled, idx);
  if (strategy == FusionStrategy::kLinearAddition) {
    return hi * p.w_img.transpose() + ht * p.w_txt.transpose();
  }
  Matrix<Scalar> out(hi.rows(), 2 * p.w_img.rows());
  out.leftCols(p.w_img.rows()) = hi * p.w_img.transpose();
  out.rightCols(p.w_txt.rows()) = ht * p.w_txt.transpose();
  return out;
}

template <typename Scalar>
void BackwardRows(FusionStrategy strategy, const Params<Scalar>& p,
                  const ViewT<Scalar>& img, const ViewT<Scalar>& txt,
                  std::span<const Eigen::Index> idx,
                  const Matrix<Scalar>& dfused, Params<Scalar>* grads) {
  if (strategy == FusionStrategy::kCrossAttention) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const Vector<Scalar> d = dfused.row(static_cast<Eigen::Index>(r)).transpose();
      CrossAttend<Scalar>(p, img.tokens[idx[r]], txt.tokens[idx[r]], &d, grads);
    }
    return;
  }
  const Matrix<Scalar> hi = internal::GatherRows<Scalar>(img.pooled, idx);
  const Matrix<Scalar> ht = internal::GatherRows<Scalar>(txt.pooled, idx);
  if (strategy == FusionStrategy::kLinearAddition) {
    grads->w_img.noalias() += dfused.transpose() * hi;
    grads->w_txt.noalias() += dfused.transpose() * ht;
    return;
  }
  const Eigen::Index d_alg = p.w_img.rows();
  grads->w_img.noalias() += dfused.leftCols(d_alg).transpose() * hi;
  grads->w_txt.noalias() += dfused.rightCols(d_alg).transpose() * ht;
}

template <typename Scalar>
Params<Scalar> CastParams(const FusionModel& m) {
  Params<Scalar> p;
  p.w_img = m.w_img.cast<Scalar>();
  p.w_txt = m.w_txt.cast<Scalar>();
  p.w_q = m.w_q.cast<Scalar>();
  p.w_k = m.w_k.cast<Scalar>();
  p.w_v = m.w_v.cast<Scalar>();
  return p;
}

template <typename Scalar>
Params<Scalar> ZeroLike(const Params<Scalar>& p) {
  Params<Scalar> z;
  z.w_img = Matrix<Scalar>::Zero(p.w_img.rows(), p.w_img.cols());
  z.w_txt = Matrix<Scalar>::Zero(p.w_txt.rows(), p.w_txt.cols());
  z.w_q = Matrix<Scalar>::Zero(p.w_q.rows(), p.w_q.cols());
  z.w_k = Matrix<Scalar>::Zero(p.w_k.rows(), p.w_k.cols());
  z.w_v = Matrix<Scalar>::Zero(p.w_v.rows(), p.w_v.cols());
  return z;
}

template <typename Scalar>
std::vector<Matrix<Scalar>*> TrainableSlots(FusionStrategy s, Params<Scalar>& p) {
  if (UsesProjections(s)) return {&p.w_img, &p.w_txt};
  if (s == FusionStrategy::kCrossAttention) return {&p.w_q, &p.w_k, &p.w_v};
  return {};
}

std::vector<Eigen::Index> AllRows(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return idx;
}

template <typename Scalar>
TrainedFusion TrainJoint(const ModalityView& img, const ModalityView& txt,
                         const MatrixD& labels, FusionStrategy strategy,
                         LossKind loss, const TrainConfig& cfg,
                         const FusionDims& dims) {
  TrainedFusion out;
  out.fusion = InitFusion(strategy, img.dim(), txt.dim(), dims.d_alg, dims.d_k,
                          cfg.seed);
  const ProbeModel init =
      InitProbe(out.fusion.OutputDim(), labels.cols(), loss, cfg.seed);

  const ViewT<Scalar> vi(img);
  const ViewT<Scalar> vt(txt);
  Params<Scalar> p = CastParams<Scalar>(out.fusion);
  Matrix<Scalar> weight = init.weight.cast<Scalar>();
  Matrix<Scalar> bias = init.bias.transpose().cast<Scalar>();

  std::vector<Matrix<Scalar>*> slots = {&weight, &bias};
  for (auto* s : TrainableSlots(strategy, p)) slots.push_back(s);

  auto batch_fn = [&](std::span<const Eigen::Index> idx,
                      std::vector<Matrix<Scalar>>& grads) {
    const Matrix<Scalar> fused = ForwardRows<Scalar>(strategy, p, vi, vt, idx);
    const Matrix<Scalar> y = internal::GatherRows<Scalar>(labels, idx);
    Matrix<Scalar> logits = fused * weight.transpose();
    logits.rowwise() += bias.row(0);
    Matrix<Scalar> dlogits;
    const Scalar l = internal::LogitLoss<Scalar>(logits, y, loss, &dlogits);
    grads[0] = dlogits.transpose() * fused;
    grads[1] = dlogits.colwise().sum();
    Params<Scalar> g = ZeroLike(p);
    BackwardRows<Scalar>(strategy, p, vi, vt, idx, dlogits * weight, &g);
    auto gslots = TrainableSlots(strategy, g);
    for (std::size_t i = 0; i < gslots.size(); ++i) grads[2 + i] = std::move(*gslots[i]);
    return l;
  };
  out.log = internal::RunTraining<Scalar>(slots, labels.rows(), cfg, batch_fn);

  out.probe.loss = loss;
  out.probe.weight = weight.template cast<double>();
  out.probe.bias = bias.row(0).transpose().template cast<double>();
  out.fusion.w_img = p.w_img.template cast<double>();
  out.fusion.w_txt = p.w_txt.template cast<double>();
  out.fusion.w_q = p.w_q.template cast<double>();
  out.fusion.w_k = p.w_k.template cast<double>();
  out.fusion.w_v = p.w_v.template cast<double>();
  return out;
}

}  // namespace

MatrixD Fuse(const FusionModel& model, const ModalityView& img,
             const ModalityView& txt) {
  CheckInputs(model, img, txt);
  if (model.strategy == FusionStrategy::kSimpleConcat) {
    MatrixD out(img.rows(), model.OutputDim());
    out.leftCols(model.d_img) = L2NormalizeRows(img.pooled);
    out.rightCols(model.d_txt) = L2NormalizeRows(txt.pooled);
    return out;
  }
  const ViewT<double> vi(img);
  const ViewT<double> vt(txt);
  const auto idx = AllRows(img.rows());
  return ForwardRows<double>(model.strategy, CastParams<double>(model), vi, vt, idx);
}

MatrixD CrossAttentionWeights(const FusionModel& model, const MatrixD& img_tokens,
                              const MatrixD& txt_tokens) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(model.d_k));
  MatrixD a = (img_tokens * model.w_q.transpose()) *
              (txt_tokens * model.w_k.transpose()).transpose() * inv_sqrt_dk;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    a.row(r) = (a.row(r).array() - m).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

TrainedFusion TrainFused(const ModalityView& img, const ModalityView& txt,
                         const MatrixD& labels, FusionStrategy strategy,
                         LossKind loss, const TrainConfig& cfg,
                         const FusionDims& dims) {
  cfg.Validate();
  if (img.rows() != txt.rows()) {
    throw InvalidArgument("image and text features are not aligned");
  }
  if (img.rows() != labels.rows()) {
    throw InvalidArgument("features and labels differ in row count");
  }
  if (img.rows() == 0) throw InvalidArgument("empty training set");
  ValidateLabels(labels, loss);

  if (strategy == FusionStrategy::kSimpleConcat) {
    TrainedFusion out;
    out.fusion = InitFusion(strategy, img.dim(), txt.dim(), dims.d_alg, dims.d_k,
                            cfg.seed);
    const MatrixF fused = Fuse(out.fusion, img, txt).cast<float>();
    auto trained = TrainProbe(fused, labels, loss, cfg);
    out.probe = std::move(trained.model);
    out.log = std::move(trained.log);
    return out;
  }
  if (strategy == FusionStrategy::kCrossAttention &&
      img.has_tokens() != txt.has_tokens()) {
    throw InvalidArgument("cross attention needs token features for both modalities");
  }
  return cfg.precision == Precision::kDouble
             ? TrainJoint<double>(img, txt, labels, strategy, loss, cfg, dims)
             : TrainJoint<float>(img, txt, labels, strategy, loss, cfg, dims);
}

MatrixD PredictFused(const TrainedFusion& trained, const ModalityView& img,
                     const ModalityView& txt) {
  return PredictD(trained.probe, Fuse(trained.fusion, img, txt));
}

FusedGradient FusedLossAndGradient(const FusionModel& fusion,
                                   const ProbeModel& probe,
                                   const ModalityView& img,
                                   const ModalityView& txt,
                                   const MatrixD& labels) {
  CheckInputs(fusion, img, txt);
  const MatrixD fused = Fuse(fusion, img, txt);
  if (fused.cols() != probe.dim() || labels.cols() != probe.classes() ||
      labels.rows() != fused.rows()) {
    throw InvalidArgument("shape mismatch in fused gradient");
  }
  MatrixD logits = fused * probe.weight.transpose();
  logits.rowwise() += probe.bias.transpose();
  MatrixD dlogits;
  FusedGradient g;
  g.loss = internal::LogitLoss<double>(logits, labels, probe.loss, &dlogits);
  g.probe_weight = dlogits.transpose() * fused;
  g.probe_bias = dlogits.colwise().sum().transpose();
  if (fusion.strategy == FusionStrategy::kSimpleConcat) return g;

  const ViewT<double> vi(img);
  const ViewT<double> vt(txt);
  const Params<double> p = CastParams<double>(fusion);
  Params<double> grads = ZeroLike(p);
  const auto idx = AllRows(img.rows());
  BackwardRows<double>(fusion.strategy, p, vi, vt, idx, dlogits * probe.weight,
                       &grads);
  if (UsesProjections(fusion.strategy)) {
    g.w_img = std::move(grads.w_img);
    g.w_txt = std::move(grads.w_txt);
  } else {
    g.w_q = std::move(grads.w_q);
    g.w_k = std::move(grads.w_k);
    g.w_v = std::move(grads.w_v);
  }
  return g;
}

}  // namespace dfprobe
