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

#ifndef DFPROBE_RANDOM_H_
#define DFPROBE_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dfprobe {

// Stateless 64-bit mixer (splitmix64 finalizer).
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a key tuple into one 64-bit stream identifier.
std::uint64_t HashKey(std::initializer_list<std::uint64_t> parts);

// Counter-based generator: the n-th draw is a pure function of (key, n),
// so any element of a stream can be recomputed without replaying the rest.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t Bits(std::uint64_t counter) const {
    return Mix64(key_ ^ Mix64(counter));
  }
  // Uniform in the open interval (0, 1).
  double Uniform(std::uint64_t counter) const;
  // Standard normal via Box-Muller on draws (2n, 2n+1).
  double Normal(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

// Sequential generator for shuffles and weight init. The engine is fully
// specified by the standard; the distributions below are implemented here
// so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Bits() { return engine_(); }
  double Uniform();                       // (0, 1)
  double Uniform(double lo, double hi);   // (lo, hi)
  double Normal();
  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n);

  template <typename It>
  void Shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = Below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dfprobe

#endif  // DFPROBE_RANDOM_H_
