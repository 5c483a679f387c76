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

#include "dfprobe/schedule.h"

#include <cmath>
#include <cstring>

#include "dfprobe/common.h"
#include "gtest/gtest.h"

namespace dfprobe {
namespace {

TEST(NoiseScheduleTest, UnitVarianceAndMonotone) {
  const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  ASSERT_EQ(s.alphas().size(), 1001u);
  EXPECT_EQ(s.alpha(0), 1.0);
  EXPECT_EQ(s.sigma(0), 0.0);
  for (int t = 0; t <= 1000; ++t) {
    EXPECT_NEAR(s.alpha(t) * s.alpha(t) + s.sigma(t) * s.sigma(t), 1.0, 1e-12) << t;
    if (t > 0) {
      EXPECT_LT(s.alpha(t), s.alpha(t - 1));
      EXPECT_GT(s.sigma(t), s.sigma(t - 1));
    }
  }
}

TEST(NoiseScheduleTest, LinearBetas) {
  const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  EXPECT_DOUBLE_EQ(s.betas().front(), 1e-4);
  EXPECT_DOUBLE_EQ(s.betas().back(), 0.02);
  // alpha_t^2 is the running product of (1 - beta).
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    prod *= 1.0 - s.betas()[t - 1];
    EXPECT_NEAR(s.alpha(t) * s.alpha(t), prod, 1e-12);
  }
}

TEST(NoiseScheduleTest, RejectsBadParameters) {
  EXPECT_THROW(NoiseSchedule::Linear(0, 1e-4, 0.02), Error);
  EXPECT_THROW(NoiseSchedule::Linear(10, 0.0, 0.02), Error);
  EXPECT_THROW(NoiseSchedule::Linear(10, 0.02, 1e-4), Error);
  EXPECT_THROW(NoiseSchedule::Linear(10, 1e-4, 1.0), Error);
}

TEST(NoiseTest, TimestepZeroIsIdentity) {
  const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  const std::vector<float> x0 = {1.f, -2.f, 3.5f};
  const auto n = Noise(x0, 0, s, NoiseMode::kStochastic, 3, 9);
  EXPECT_EQ(n.xt, x0);
}

TEST(NoiseTest, DeterministicModeIsByteIdentical) {
  const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  const std::vector<float> x0(64, 0.25f);
  const auto a = Noise(x0, 37, s, NoiseMode::kDeterministic, 5, 11);
  const auto b = Noise(x0, 37, s, NoiseMode::kDeterministic, 5, 11);
  ASSERT_EQ(a.xt.size(), b.xt.size());
  EXPECT_EQ(std::memcmp(a.xt.data(), b.xt.data(), a.xt.size() * sizeof(float)), 0);
  // Deterministic epsilon is shared across timesteps.
  EXPECT_EQ(DrawEpsilon(8, 10, NoiseMode::kDeterministic, 5, 11),
            DrawEpsilon(8, 900, NoiseMode::kDeterministic, 5, 11));
}

TEST(NoiseTest, StochasticSeedsDiffer) {
  EXPECT_NE(DrawEpsilon(16, 10, NoiseMode::kStochastic, 1, 0),
            DrawEpsilon(16, 10, NoiseMode::kStochastic, 2, 0));
  EXPECT_NE(DrawEpsilon(16, 10, NoiseMode::kStochastic, 1, 0),
            DrawEpsilon(16, 11, NoiseMode::kStochastic, 1, 0));
}

TEST(NoiseTest, MatchesClosedForm) {
  const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  const std::vector<float> x0 = {0.5f, -1.f, 2.f, 0.f};
  const std::vector<float> eps = {1.f, 0.f, -1.f, 2.f};
  const auto n = NoiseWithEpsilon(x0, 500, s, eps);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(n.xt[i], s.alpha(500) * x0[i] + s.sigma(500) * eps[i], 1e-6);
  }
  EXPECT_THROW(NoiseWithEpsilon(x0, 1001, s, eps), Error);
  EXPECT_THROW(NoiseWithEpsilon(x0, 5, s, std::vector<float>(3)), Error);
}

TEST(NoiseTest, EpsilonIsRoughlyStandardNormal) {
  const auto e = DrawEpsilon(20000, 1, NoiseMode::kStochastic, 42, 7);
  double mean = 0, var = 0;
  for (float v : e) mean += v;
  mean /= e.size();
  for (float v : e) var += (v - mean) * (v - mean);
  var /= e.size() - 1;
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(ContinuousToStepTest, RoundsHalfAwayFromZero) {
  EXPECT_EQ(ContinuousToStep(0.0, 1000), 0);
  EXPECT_EQ(ContinuousToStep(1.0, 1000), 1000);
  EXPECT_EQ(ContinuousToStep(0.0305, 1000), 31);
  EXPECT_EQ(ContinuousToStep(0.0304, 1000), 30);
  EXPECT_EQ(ContinuousToStep(0.5, 3), 2);
  EXPECT_THROW(ContinuousToStep(-0.1, 1000), Error);
  EXPECT_THROW(ContinuousToStep(1.1, 1000), Error);
}

}  // namespace
}  // namespace dfprobe
