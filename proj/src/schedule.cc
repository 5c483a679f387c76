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
#include <string>

#include "dfprobe/common.h"
#include "dfprobe/random.h"

namespace dfprobe {

namespace {

// Stream tags keep the two noise modes from ever sharing a key.
constexpr std::uint64_t kStochasticTag = 0x5354;
constexpr std::uint64_t kDeterministicTag = 0x4454;

}  // namespace

NoiseSchedule NoiseSchedule::Linear(int steps, double beta_min,
                                    double beta_max) {
  if (steps < 1) throw InvalidArgument("schedule needs at least one step");
  if (!(beta_min > 0.0 && beta_min < 1.0) ||
      !(beta_max > 0.0 && beta_max < 1.0)) {
    throw InvalidArgument("beta bounds must lie in (0, 1)");
  }
  if (beta_min > beta_max) throw InvalidArgument("beta_min exceeds beta_max");

  NoiseSchedule s;
  s.steps_ = steps;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.betas_.resize(steps);
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas_[i] = beta_min + (beta_max - beta_min) * frac;
  }
  s.betas_.back() = beta_max;

  s.alphas_.resize(steps + 1);
  s.sigmas_.resize(steps + 1);
  s.alphas_[0] = 1.0;
  s.sigmas_[0] = 0.0;
  // Carry alpha^2 directly so sigma^2 = 1 - alpha^2 holds without a
  // square-then-root round trip.
  double alpha_sq = 1.0;
  for (int t = 1; t <= steps; ++t) {
    alpha_sq *= 1.0 - s.betas_[t - 1];
    s.alphas_[t] = std::sqrt(alpha_sq);
    s.sigmas_[t] = std::sqrt(1.0 - alpha_sq);
  }
  return s;
}

std::vector<float> DrawEpsilon(std::size_t dim, int t, NoiseMode mode,
                               std::uint64_t seed, std::uint64_t sample_id) {
  const std::uint64_t key =
      mode == NoiseMode::kDeterministic
          ? HashKey({kDeterministicTag, seed, sample_id})
          : HashKey({kStochasticTag, seed, sample_id,
                     static_cast<std::uint64_t>(t)});
  const CounterRng rng(key);
  std::vector<float> eps(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    eps[i] = static_cast<float>(rng.Normal(i));
  }
  return eps;
}

NoisedSample NoiseWithEpsilon(std::span<const float> x0, int t,
                              const NoiseSchedule& schedule,
                              std::span<const float> epsilon, NoiseMode mode) {
  if (t < 0 || t > schedule.steps()) {
    throw InvalidArgument("timestep " + std::to_string(t) +
                          " outside [0, " + std::to_string(schedule.steps()) +
                          "]");
  }
  if (epsilon.size() != x0.size()) {
    throw InvalidArgument("epsilon and x0 differ in dimension");
  }
  for (float v : x0) {
    if (!std::isfinite(v)) throw InvalidArgument("x0 has non-finite entries");
  }

  NoisedSample out;
  out.t = t;
  out.mode = mode;
  out.x0.assign(x0.begin(), x0.end());
  out.epsilon.assign(epsilon.begin(), epsilon.end());
  out.xt.resize(x0.size());
  const double a = schedule.alpha(t);
  const double s = schedule.sigma(t);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.xt[i] = static_cast<float>(a * x0[i] + s * epsilon[i]);
  }
  return out;
}

NoisedSample Noise(std::span<const float> x0, int t,
                   const NoiseSchedule& schedule, NoiseMode mode,
                   std::uint64_t seed, std::uint64_t sample_id) {
  if (t < 0 || t > schedule.steps()) {
    throw InvalidArgument("timestep " + std::to_string(t) +
                          " outside [0, " + std::to_string(schedule.steps()) +
                          "]");
  }
  const auto eps = DrawEpsilon(x0.size(), t, mode, seed, sample_id);
  return NoiseWithEpsilon(x0, t, schedule, eps, mode);
}

int ContinuousToStep(double u, int steps) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw InvalidArgument("continuous time must lie in [0, 1]");
  }
  if (steps < 1) throw InvalidArgument("step count must be positive");
  // Decimal inputs such as 0.0305 land a few ulps below the half; snap the
  // product to a 1e-9 grid before rounding.
  const double scaled = u * steps;
  const double snapped = std::round(scaled * 1e9) / 1e9;
  long step = std::lround(snapped);
  if (step < 0) step = 0;
  if (step > steps) step = steps;
  return static_cast<int>(step);
}

}  // namespace dfprobe
