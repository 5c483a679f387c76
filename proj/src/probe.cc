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

#include "dfprobe/probe.h"

#include <cmath>
#include <numbers>

#include "training.h"

namespace dfprobe {

std::string_view LossKindName(LossKind k) {
  return k == LossKind::kBceMultiLabel ? "bce_multilabel" : "ce_singlelabel";
}

LossKind ParseLossKind(std::string_view name) {
  if (name == "bce_multilabel" || name == "bce") return LossKind::kBceMultiLabel;
  if (name == "ce_singlelabel" || name == "ce") return LossKind::kCeSingleLabel;
  throw InvalidArgument("unknown loss kind '" + std::string(name) + "'");
}

void TrainConfig::Validate() const {
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) {
    throw InvalidArgument("lr0 must be finite and non-negative");
  }
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw InvalidArgument("invalid Adam hyperparameters");
  }
}

double CosineLearningRate(double lr0, std::int64_t step,
                          std::int64_t total_steps) {
  if (total_steps <= 0 || step >= total_steps) return 0.0;
  if (step <= 0) return lr0;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

ProbeModel InitProbe(Eigen::Index dim, Eigen::Index classes, LossKind loss,
                     std::uint64_t seed) {
  if (dim < 1 || classes < 1) throw InvalidArgument("probe needs d >= 1 and K >= 1");
  Rng rng(HashKey({internal::kProbeInitTag, seed}));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  ProbeModel m;
  m.loss = loss;
  m.weight.resize(classes, dim);
  for (Eigen::Index i = 0; i < m.weight.size(); ++i) {
    m.weight.data()[i] = rng.Uniform(-bound, bound);
  }
  m.bias = VectorD::Zero(classes);
  return m;
}

void ValidateLabels(const MatrixD& labels, LossKind loss) {
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double v = labels.data()[i];
    if (v != 0.0 && v != 1.0) throw InvalidArgument("labels must be 0/1");
  }
  if (loss == LossKind::kCeSingleLabel) {
    for (Eigen::Index i = 0; i < labels.rows(); ++i) {
      if (labels.row(i).sum() != 1.0) {
        throw InvalidArgument("single-label targets must be one-hot");
      }
    }
  }
}

namespace {

template <typename Scalar>
TrainedProbe TrainImpl(const MatrixF& features, const MatrixD& labels,
                       LossKind loss, const TrainConfig& cfg) {
  const ProbeModel init = InitProbe(features.cols(), labels.cols(), loss, cfg.seed);
  Matrix<Scalar> weight = init.weight.cast<Scalar>();
  Matrix<Scalar> bias = init.bias.transpose().cast<Scalar>();

  auto batch_fn = [&](std::span<const Eigen::Index> idx,
                      std::vector<Matrix<Scalar>>& grads) {
    const Matrix<Scalar> x = internal::GatherRows<Scalar>(features, idx);
    const Matrix<Scalar> y = internal::GatherRows<Scalar>(labels, idx);
    Matrix<Scalar> logits = x * weight.transpose();
    logits.rowwise() += bias.row(0);
    Matrix<Scalar> dlogits;
    const Scalar l = internal::LogitLoss<Scalar>(logits, y, loss, &dlogits);
    grads[0] = dlogits.transpose() * x;
    grads[1] = dlogits.colwise().sum();
    return l;
  };
  TrainedProbe out;
  out.log = internal::RunTraining<Scalar>({&weight, &bias}, features.rows(),
                                          cfg, batch_fn);
  out.model.loss = loss;
  out.model.weight = weight.template cast<double>();
  out.model.bias = bias.row(0).transpose().template cast<double>();
  return out;
}

MatrixD Activate(MatrixD logits, LossKind loss) {
  if (loss == LossKind::kBceMultiLabel) {
    return logits.unaryExpr([](double z) {
      return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    });
  }
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

TrainedProbe TrainProbe(const MatrixF& features, const MatrixD& labels,
                        LossKind loss, const TrainConfig& cfg) {
  cfg.Validate();
  if (features.rows() == 0) throw InvalidArgument("empty training set");
  if (features.rows() != labels.rows()) {
    throw InvalidArgument("features and labels differ in row count");
  }
  if (labels.cols() < 1) throw InvalidArgument("labels need at least one class");
  ValidateLabels(labels, loss);
  if (!features.allFinite()) throw InvalidArgument("features contain non-finite values");
  return cfg.precision == Precision::kDouble
             ? TrainImpl<double>(features, labels, loss, cfg)
             : TrainImpl<float>(features, labels, loss, cfg);
}

MatrixD PredictD(const ProbeModel& model, const MatrixD& features) {
  if (features.cols() != model.dim()) {
    throw InvalidArgument("feature dimension does not match probe");
  }
  MatrixD logits = features * model.weight.transpose();
  logits.rowwise() += model.bias.transpose();
  return Activate(std::move(logits), model.loss);
}

MatrixD Predict(const ProbeModel& model, const MatrixF& features) {
  return PredictD(model, features.cast<double>());
}

ProbeGradient ProbeLossAndGradient(const ProbeModel& model,
                                   const MatrixD& features,
                                   const MatrixD& labels) {
  if (features.cols() != model.dim() || labels.cols() != model.classes() ||
      features.rows() != labels.rows()) {
    throw InvalidArgument("shape mismatch in probe gradient");
  }
  MatrixD logits = features * model.weight.transpose();
  logits.rowwise() += model.bias.transpose();
  MatrixD dlogits;
  ProbeGradient g;
  g.loss = internal::LogitLoss<double>(logits, labels, model.loss, &dlogits);
  g.weight = dlogits.transpose() * features;
  g.bias = dlogits.colwise().sum().transpose();
  return g;
}

}  // namespace dfprobe
