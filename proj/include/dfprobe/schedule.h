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

#ifndef DFPROBE_SCHEDULE_H_
#define DFPROBE_SCHEDULE_H_

#include <cstdint>
#include <span>
#include <vector>

namespace dfprobe {

// Linear variance schedule over T discrete steps. Index 0 of the alpha and
// sigma tables is the noise-free state; index t >= 1 is after t steps.
// Immutable after construction.
class NoiseSchedule {
 public:
  // Throws on T == 0, bounds outside (0, 1) or beta_min > beta_max.
  static NoiseSchedule Linear(int steps, double beta_min, double beta_max);

  int steps() const { return steps_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }

  // betas()[i] is the rate of step i + 1.
  std::span<const double> betas() const { return betas_; }
  std::span<const double> alphas() const { return alphas_; }
  std::span<const double> sigmas() const { return sigmas_; }

  double alpha(int t) const { return alphas_.at(t); }
  double sigma(int t) const { return sigmas_.at(t); }

 private:
  NoiseSchedule() = default;

  int steps_ = 0;
  double beta_min_ = 0.0;
  double beta_max_ = 0.0;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> sigmas_;
};

enum class NoiseMode { kStochastic, kDeterministic };

struct NoisedSample {
  std::vector<float> x0;
  std::vector<float> xt;
  std::vector<float> epsilon;
  int t = 0;
  NoiseMode mode = NoiseMode::kStochastic;
};

// Draws the noise vector used for (seed, sample_id[, t]). Stochastic noise
// is keyed by t as well; deterministic noise is shared across timesteps.
std::vector<float> DrawEpsilon(std::size_t dim, int t, NoiseMode mode,
                               std::uint64_t seed, std::uint64_t sample_id);

// Forward corruption x_t = alpha_t * x0 + sigma_t * eps.
NoisedSample Noise(std::span<const float> x0, int t,
                   const NoiseSchedule& schedule, NoiseMode mode,
                   std::uint64_t seed, std::uint64_t sample_id);

// Same corruption with a caller-supplied epsilon.
NoisedSample NoiseWithEpsilon(std::span<const float> x0, int t,
                              const NoiseSchedule& schedule,
                              std::span<const float> epsilon,
                              NoiseMode mode = NoiseMode::kDeterministic);

// Maps continuous time u in [0, 1] to the nearest step, halves rounded away
// from zero.
int ContinuousToStep(double u, int steps);

}  // namespace dfprobe

#endif  // DFPROBE_SCHEDULE_H_
