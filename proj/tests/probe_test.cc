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
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"

namespace dfprobe {
namespace {

MatrixD RandomMatrix(std::mt19937_64& gen, int r, int c) {
  std::normal_distribution<double> nd;
  MatrixD m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

MatrixD RandomLabels(std::mt19937_64& gen, int n, int k, LossKind loss) {
  MatrixD y = MatrixD::Zero(n, k);
  for (int i = 0; i < n; ++i) {
    if (loss == LossKind::kCeSingleLabel) {
      y(i, gen() % k) = 1.0;
    } else {
      for (int c = 0; c < k; ++c) y(i, c) = gen() % 2;
    }
  }
  return y;
}

TEST(CosineLearningRateTest, Endpoints) {
  EXPECT_DOUBLE_EQ(CosineLearningRate(1e-3, 0, 100), 1e-3);
  EXPECT_NEAR(CosineLearningRate(1e-3, 100, 100), 0.0, 1e-12);
  EXPECT_NEAR(CosineLearningRate(1e-3, 50, 100), 5e-4, 1e-15);
  for (int s = 1; s <= 100; ++s) {
    EXPECT_LE(CosineLearningRate(1.0, s, 100), CosineLearningRate(1.0, s - 1, 100));
  }
}

TEST(ProbeGradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 gen(11);
  for (LossKind loss : {LossKind::kBceMultiLabel, LossKind::kCeSingleLabel}) {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + gen() % 8, d = 1 + gen() % 8, k = 2 + gen() % 3;
      const MatrixD x = RandomMatrix(gen, n, d);
      const MatrixD y = RandomLabels(gen, n, k, loss);
      ProbeModel m = InitProbe(d, k, loss, gen());
      m.bias = RandomMatrix(gen, k, 1);
      const ProbeGradient g = ProbeLossAndGradient(m, x, y);
      auto f = [&] { return ProbeLossAndGradient(m, x, y).loss; };
      EXPECT_LT(oracle::RelativeError(g.weight, oracle::NumericGradient(m.weight, f)), 1e-6);
      EXPECT_LT(oracle::RelativeError(g.bias, oracle::NumericGradient(m.bias, f)), 1e-6);
    }
  }
}

TEST(ProbeLossTest, KnownValues) {
  ProbeModel m;
  m.weight = MatrixD::Zero(2, 1);
  m.bias = VectorD::Zero(2);
  const MatrixD x = MatrixD::Ones(3, 1);
  MatrixD y = MatrixD::Zero(3, 2);
  y(0, 0) = y(1, 1) = y(2, 0) = 1;
  m.loss = LossKind::kBceMultiLabel;
  EXPECT_NEAR(ProbeLossAndGradient(m, x, y).loss, std::log(2.0), 1e-12);
  m.loss = LossKind::kCeSingleLabel;
  EXPECT_NEAR(ProbeLossAndGradient(m, x, y).loss, std::log(2.0), 1e-12);
}

TEST(TrainProbeTest, SeparableOneHotFitsExactly) {
  const int k = 4;
  MatrixF x = MatrixF::Zero(k * 10, k);
  MatrixD y = MatrixD::Zero(k * 10, k);
  for (int i = 0; i < k * 10; ++i) {
    x(i, i % k) = 1.f;
    y(i, i % k) = 1.0;
  }
  TrainConfig cfg;
  cfg.lr0 = 0.1;
  cfg.epochs = 40;
  cfg.batch_size = 8;
  for (LossKind loss : {LossKind::kBceMultiLabel, LossKind::kCeSingleLabel}) {
    const auto trained = TrainProbe(x, y, loss, cfg);
    ASSERT_EQ(trained.log.loss.size(), 40u);
    ASSERT_EQ(trained.log.seconds.size(), 40u);
    for (int e = 1; e < 5; ++e) EXPECT_LT(trained.log.loss[e], trained.log.loss[e - 1]);
    const MatrixD p = Predict(trained.model, x);
    for (int i = 0; i < p.rows(); ++i) {
      Eigen::Index arg;
      p.row(i).maxCoeff(&arg);
      EXPECT_EQ(arg, i % k);
    }
  }
}

TEST(TrainProbeTest, ZeroLearningRateKeepsInitialization) {
  std::mt19937_64 gen(2);
  const MatrixF x = RandomMatrix(gen, 20, 5).cast<float>();
  const MatrixD y = RandomLabels(gen, 20, 3, LossKind::kBceMultiLabel);
  TrainConfig cfg;
  cfg.lr0 = 0.0;
  cfg.epochs = 1;
  cfg.seed = 9;
  const auto trained = TrainProbe(x, y, LossKind::kBceMultiLabel, cfg);
  const ProbeModel init = InitProbe(5, 3, LossKind::kBceMultiLabel, 9);
  // Single-precision training stores the initialization rounded to float.
  EXPECT_EQ(trained.model.weight, init.weight.cast<float>().cast<double>());
  EXPECT_EQ(trained.model.bias, init.bias);
  const double bound = 1.0 / std::sqrt(5.0);
  EXPECT_LE(init.weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(init.bias.isZero());
}

TEST(TrainProbeTest, DeterministicAndPrecisionsAgree) {
  std::mt19937_64 gen(4);
  const MatrixF x = RandomMatrix(gen, 50, 6).cast<float>();
  const MatrixD y = RandomLabels(gen, 50, 3, LossKind::kBceMultiLabel);
  TrainConfig cfg;
  cfg.lr0 = 0.01;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  const auto a = TrainProbe(x, y, LossKind::kBceMultiLabel, cfg);
  const auto b = TrainProbe(x, y, LossKind::kBceMultiLabel, cfg);
  EXPECT_EQ(a.model.weight, b.model.weight);
  EXPECT_EQ(a.log.loss, b.log.loss);
  cfg.precision = Precision::kDouble;
  const auto c = TrainProbe(x, y, LossKind::kBceMultiLabel, cfg);
  EXPECT_LT((a.model.weight - c.model.weight).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(TrainProbeTest, LossDecreasesOnSeparableData) {
  std::mt19937_64 gen(8);
  const MatrixD w = RandomMatrix(gen, 3, 6);
  const MatrixD xd = RandomMatrix(gen, 100, 6);
  const MatrixD y = ((xd * w.transpose()).array() > 0.0).cast<double>();
  TrainConfig cfg;
  cfg.lr0 = 0.05;
  const auto t = TrainProbe(xd.cast<float>(), y, LossKind::kBceMultiLabel, cfg);
  EXPECT_LT(t.log.loss.back(), t.log.loss.front());
}

TEST(PredictTest, SoftmaxRowsSumToOne) {
  ProbeModel m = InitProbe(3, 4, LossKind::kCeSingleLabel, 1);
  MatrixF x(1, 3);
  x << 100.f, -50.f, 3.f;
  const MatrixD p = Predict(m, x);
  EXPECT_NEAR(p.sum(), 1.0, 1e-6);
}

TEST(ValidateLabelsTest, Rejects) {
  MatrixD y(2, 2);
  y << 1, 1, 0, 1;
  EXPECT_NO_THROW(ValidateLabels(y, LossKind::kBceMultiLabel));
  EXPECT_THROW(ValidateLabels(y, LossKind::kCeSingleLabel), Error);
  y(0, 0) = 0.5;
  EXPECT_THROW(ValidateLabels(y, LossKind::kBceMultiLabel), Error);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.Validate(), Error);
}

}  // namespace
}  // namespace dfprobe
