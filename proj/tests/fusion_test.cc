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

#include <random>

#include "gtest/gtest.h"
#include "oracles.h"

namespace dfprobe {
namespace {

MatrixD Gaussian(std::mt19937_64& gen, int r, int c) {
  std::normal_distribution<double> nd;
  MatrixD m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
  return m;
}

ModalityView View(std::mt19937_64& gen, int n, int d, int tokens) {
  ModalityView v;
  for (int i = 0; i < n; ++i) v.tokens.push_back(Gaussian(gen, tokens, d));
  v.pooled.resize(n, d);
  for (int i = 0; i < n; ++i) v.pooled.row(i) = v.tokens[i].colwise().mean();
  return v;
}

MatrixD Labels(std::mt19937_64& gen, int n, int k, LossKind loss) {
  MatrixD y = MatrixD::Zero(n, k);
  for (int i = 0; i < n; ++i) {
    if (loss == LossKind::kCeSingleLabel) {
      y(i, gen() % k) = 1;
    } else {
      for (int c = 0; c < k; ++c) y(i, c) = gen() % 2;
    }
  }
  return y;
}

TEST(FusionTest, OutputDimensions) {
  std::mt19937_64 gen(1);
  const auto img = View(gen, 3, 5, 2), txt = View(gen, 3, 4, 3);
  const std::pair<FusionStrategy, int> cases[] = {{FusionStrategy::kSimpleConcat, 9},
                                                  {FusionStrategy::kLinearConcat, 12},
                                                  {FusionStrategy::kLinearAddition, 6},
                                                  {FusionStrategy::kCrossAttention, 7}};
  for (auto [s, dim] : cases) {
    const FusionModel m = InitFusion(s, 5, 4, 6, 7, 0);
    EXPECT_EQ(m.OutputDim(), dim);
    const MatrixD f = Fuse(m, img, txt);
    EXPECT_EQ(f.rows(), 3);
    EXPECT_EQ(f.cols(), dim);
  }
}

TEST(FusionTest, SimpleConcatHalvesAreUnitNorm) {
  std::mt19937_64 gen(2);
  const auto img = View(gen, 10, 5, 1), txt = View(gen, 10, 4, 1);
  const MatrixD f = Fuse(InitFusion(FusionStrategy::kSimpleConcat, 5, 4, 1, 1, 0), img, txt);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(f.row(i).squaredNorm(), 2.0, 1e-12);
    EXPECT_NEAR(f.row(i).head(5).norm(), 1.0, 1e-12);
  }
  ModalityView zero = img;
  zero.pooled.row(3).setZero();
  EXPECT_THROW(Fuse(InitFusion(FusionStrategy::kSimpleConcat, 5, 4, 1, 1, 0), zero, txt), Error);
}

TEST(FusionTest, LinearStrategiesMatchDirectMatrixEvaluation) {
  std::mt19937_64 gen(3);
  const auto img = View(gen, 4, 5, 1), txt = View(gen, 4, 3, 1);
  const FusionModel add = InitFusion(FusionStrategy::kLinearAddition, 5, 3, 6, 1, 9);
  const MatrixD expect_add = img.pooled * add.w_img.transpose() + txt.pooled * add.w_txt.transpose();
  EXPECT_LT((Fuse(add, img, txt) - expect_add).cwiseAbs().maxCoeff(), 1e-12);
  const FusionModel cat = InitFusion(FusionStrategy::kLinearConcat, 5, 3, 6, 1, 9);
  const MatrixD f = Fuse(cat, img, txt);
  EXPECT_LT((f.leftCols(6) - img.pooled * cat.w_img.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((f.rightCols(6) - txt.pooled * cat.w_txt.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FusionTest, CrossAttentionSingleKeyIgnoresQueries) {
  std::mt19937_64 gen(4);
  auto img = View(gen, 2, 5, 4);
  const auto txt = View(gen, 2, 3, 1);
  const FusionModel m = InitFusion(FusionStrategy::kCrossAttention, 5, 3, 1, 6, 2);
  const MatrixD f = Fuse(m, img, txt);
  for (int i = 0; i < 2; ++i) {
    const VectorD expect = m.w_v * txt.tokens[i].row(0).transpose();
    EXPECT_LT((f.row(i).transpose() - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
  img.tokens[0] *= 100.0;
  EXPECT_LT((Fuse(m, img, txt).row(0) - f.row(0)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FusionTest, CrossAttentionMatchesDirectFormula) {
  std::mt19937_64 gen(5);
  const auto img = View(gen, 1, 4, 3), txt = View(gen, 1, 5, 4);
  const FusionModel m = InitFusion(FusionStrategy::kCrossAttention, 4, 5, 1, 6, 3);
  const MatrixD q = img.tokens[0] * m.w_q.transpose();
  const MatrixD k = txt.tokens[0] * m.w_k.transpose();
  const MatrixD v = txt.tokens[0] * m.w_v.transpose();
  MatrixD s = q * k.transpose() / std::sqrt(6.0);
  for (int r = 0; r < s.rows(); ++r) {
    double z = 0;
    for (int c = 0; c < s.cols(); ++c) z += std::exp(s(r, c));
    for (int c = 0; c < s.cols(); ++c) s(r, c) = std::exp(s(r, c)) / z;
  }
  const MatrixD a = CrossAttentionWeights(m, img.tokens[0], txt.tokens[0]);
  EXPECT_LT((a - s).cwiseAbs().maxCoeff(), 1e-12);
  for (int r = 0; r < a.rows(); ++r) EXPECT_NEAR(a.row(r).sum(), 1.0, 1e-12);
  const Eigen::RowVectorXd expect = (s * v).colwise().mean();
  EXPECT_LT((Fuse(m, img, txt).row(0) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FusionGradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 gen(6);
  for (FusionStrategy s : kAllFusionStrategies) {
    for (LossKind loss : {LossKind::kBceMultiLabel, LossKind::kCeSingleLabel}) {
      for (int trial = 0; trial < 5; ++trial) {
        const int n = 2 + gen() % 7, di = 2 + gen() % 7, dt = 2 + gen() % 7, k = 2 + gen() % 3;
        const auto img = View(gen, n, di, 1 + gen() % 3);
        const auto txt = View(gen, n, dt, 1 + gen() % 3);
        const MatrixD y = Labels(gen, n, k, loss);
        FusionModel fm = InitFusion(s, di, dt, 3 + gen() % 5, 3 + gen() % 5, gen());
        ProbeModel pm = InitProbe(fm.OutputDim(), k, loss, gen());
        pm.bias = Gaussian(gen, k, 1);
        const FusedGradient g = FusedLossAndGradient(fm, pm, img, txt, y);
        auto f = [&] { return FusedLossAndGradient(fm, pm, img, txt, y).loss; };
        EXPECT_LT(oracle::RelativeError(g.probe_weight, oracle::NumericGradient(pm.weight, f)), 1e-6);
        EXPECT_LT(oracle::RelativeError(g.probe_bias, oracle::NumericGradient(pm.bias, f)), 1e-6);
        const std::pair<MatrixD*, const MatrixD*> slots[] = {
            {&fm.w_img, &g.w_img}, {&fm.w_txt, &g.w_txt}, {&fm.w_q, &g.w_q},
            {&fm.w_k, &g.w_k},     {&fm.w_v, &g.w_v}};
        for (auto [param, grad] : slots) {
          if (param->size() == 0) continue;
          EXPECT_LT(oracle::RelativeError(*grad, oracle::NumericGradient(*param, f)), 1e-6)
              << FusionStrategyName(s);
        }
      }
    }
  }
}

TEST(TrainFusedTest, SimpleConcatEqualsProbeOnNormalizedConcat) {
  std::mt19937_64 gen(7);
  const auto img = View(gen, 30, 5, 1), txt = View(gen, 30, 4, 1);
  const MatrixD y = Labels(gen, 30, 3, LossKind::kBceMultiLabel);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  const auto fused = TrainFused(img, txt, y, FusionStrategy::kSimpleConcat, LossKind::kBceMultiLabel, cfg);
  MatrixD cat(30, 9);
  cat << L2NormalizeRows(img.pooled), L2NormalizeRows(txt.pooled);
  const auto probe = TrainProbe(cat.cast<float>(), y, LossKind::kBceMultiLabel, cfg);
  EXPECT_EQ(fused.log.loss, probe.log.loss);
  EXPECT_EQ(fused.probe.weight, probe.model.weight);
}

TEST(TrainFusedTest, TrainableStrategiesReduceLoss) {
  std::mt19937_64 gen(8);
  const auto img = View(gen, 60, 6, 2), txt = View(gen, 60, 5, 2);
  const MatrixD w = Gaussian(gen, 3, 6);
  const MatrixD y = ((img.pooled * w.transpose()).array() > 0).cast<double>();
  TrainConfig cfg;
  cfg.lr0 = 0.01;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  for (FusionStrategy s : kAllFusionStrategies) {
    const auto t = TrainFused(img, txt, y, s, LossKind::kBceMultiLabel, cfg, {8, 8});
    EXPECT_LT(t.log.loss.back(), t.log.loss.front()) << FusionStrategyName(s);
    const auto again = TrainFused(img, txt, y, s, LossKind::kBceMultiLabel, cfg, {8, 8});
    EXPECT_EQ(t.log.loss, again.log.loss);
    EXPECT_EQ(PredictFused(t, img, txt).rows(), 60);
  }
}

TEST(TrainFusedTest, RejectsMisalignedInputs) {
  std::mt19937_64 gen(9);
  const auto img = View(gen, 5, 3, 1), txt = View(gen, 4, 3, 1);
  const MatrixD y = Labels(gen, 5, 2, LossKind::kBceMultiLabel);
  EXPECT_THROW(TrainFused(img, txt, y, FusionStrategy::kLinearAddition, LossKind::kBceMultiLabel, {}), Error);
  EXPECT_THROW(ParseFusionStrategy("concat_everything"), Error);
}

}  // namespace
}  // namespace dfprobe
