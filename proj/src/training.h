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

// Shared pieces of the probe and fusion trainers. Not installed.
#ifndef DFPROBE_SRC_TRAINING_H_
#define DFPROBE_SRC_TRAINING_H_

#include <chrono>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "dfprobe/common.h"
#include "dfprobe/probe.h"
#include "dfprobe/random.h"

namespace dfprobe::internal {

inline constexpr std::uint64_t kShuffleTag = 0x5348;
inline constexpr std::uint64_t kProbeInitTag = 0x5052;
inline constexpr std::uint64_t kFusionInitTag = 0x4655;

// Mean loss of a logit block and, when requested, d(loss)/d(logits).
// BCE averages over every (sample, class) entry; CE over samples.
template <typename Scalar>
Scalar LogitLoss(const Matrix<Scalar>& logits, const Matrix<Scalar>& labels,
                 LossKind kind, Matrix<Scalar>* grad) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index k = logits.cols();
  double total = 0.0;
  if (grad) grad->resize(n, k);
  if (kind == LossKind::kBceMultiLabel) {
    const double denom = static_cast<double>(n * k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < k; ++c) {
        const double z = logits(i, c);
        const double y = labels(i, c);
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        if (grad) {
          const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                  : std::exp(z) / (1.0 + std::exp(z));
          (*grad)(i, c) = static_cast<Scalar>((p - y) / denom);
        }
      }
    }
    return static_cast<Scalar>(total / denom);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    double z_sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) z_sum += std::exp(logits(i, c) - m);
    const double log_z = m + std::log(z_sum);
    for (Eigen::Index c = 0; c < k; ++c) {
      const double y = labels(i, c);
      total -= y * (logits(i, c) - log_z);
      if (grad) {
        (*grad)(i, c) = static_cast<Scalar>(
            (std::exp(logits(i, c) - log_z) - y) / static_cast<double>(n));
      }
    }
  }
  return static_cast<Scalar>(total / static_cast<double>(n));
}

template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Matrix<Scalar>*> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
    }
  }

  void Step(const std::vector<Matrix<Scalar>>& grads, double lr) {
    ++t_;
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const auto step = static_cast<Scalar>(lr / c1);
    const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
    const auto eps = static_cast<Scalar>(cfg_.adam_eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i] = Scalar(b1) * m_[i] + Scalar(1.0 - b1) * grads[i];
      v_[i] = Scalar(b2) * v_[i] +
              Scalar(1.0 - b2) * grads[i].cwiseProduct(grads[i]);
      params_[i]->array() -=
          step * m_[i].array() / (v_[i].array().sqrt() / root_c2 + eps);
    }
  }

 private:
  std::vector<Matrix<Scalar>*> params_;
  TrainConfig cfg_;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
  std::int64_t t_ = 0;
};

// Minibatch loop: seeded shuffle per epoch, last partial batch kept, one
// Adam step per batch at the cosine-annealed rate. `batch_fn(indices,
// grads)` fills grads (shaped like params) and returns the batch mean loss.
template <typename Scalar, typename BatchFn>
LossLog RunTraining(std::vector<Matrix<Scalar>*> params, Eigen::Index n,
                    const TrainConfig& cfg, BatchFn&& batch_fn) {
  Adam<Scalar> adam(params, cfg);
  Rng shuffler(HashKey({kShuffleTag, cfg.seed}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  const std::int64_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = batches_per_epoch * cfg.epochs;
  std::vector<Matrix<Scalar>> grads(params.size());

  LossLog log;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffler.Shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (Eigen::Index begin = 0; begin < n; begin += cfg.batch_size) {
      const Eigen::Index end = std::min<Eigen::Index>(n, begin + cfg.batch_size);
      std::span<const Eigen::Index> idx(order.data() + begin,
                                        static_cast<std::size_t>(end - begin));
      for (std::size_t i = 0; i < params.size(); ++i) {
        grads[i].setZero(params[i]->rows(), params[i]->cols());
      }
      const double loss = static_cast<double>(batch_fn(idx, grads));
      epoch_loss += loss * static_cast<double>(end - begin);
      adam.Step(grads, CosineLearningRate(cfg.lr0, step, total_steps));
      ++step;
    }
    log.loss.push_back(epoch_loss / static_cast<double>(n));
    log.seconds.push_back(std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count());
  }
  return log;
}

template <typename Scalar, typename Source>
Matrix<Scalar> GatherRows(const Source& src, std::span<const Eigen::Index> idx) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]).template cast<Scalar>();
  }
  return out;
}

}  // namespace dfprobe::internal

#endif  // DFPROBE_SRC_TRAINING_H_
