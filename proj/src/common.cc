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

#include "dfprobe/common.h"

#include <cmath>
#include <numbers>

#include "dfprobe/random.h"

namespace dfprobe {

std::string_view ModalityName(Modality m) {
  switch (m) {
    case Modality::kImage:
      return "image";
    case Modality::kText:
      return "text";
    case Modality::kFused:
      return "fused";
  }
  return "unknown";
}

Modality ParseModality(std::string_view name) {
  if (name == "image" || name == "img") return Modality::kImage;
  if (name == "text" || name == "txt") return Modality::kText;
  if (name == "fused") return Modality::kFused;
  throw InvalidArgument("unknown modality '" + std::string(name) + "'");
}

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "invalid_argument";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kBudget:
      return "budget";
    case ErrorKind::kNumerical:
      return "numerical";
  }
  return "unknown";
}

std::uint64_t HashKey(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = Mix64(h ^ Mix64(p));
  return h;
}

namespace {

// 53 random mantissa bits, shifted off zero.
double BitsToOpenUnit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double BoxMuller(double u1, double u2, bool second) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return second ? r * std::sin(theta) : r * std::cos(theta);
}

}  // namespace

double CounterRng::Uniform(std::uint64_t counter) const {
  return BitsToOpenUnit(Bits(counter));
}

double CounterRng::Normal(std::uint64_t counter) const {
  const std::uint64_t pair = counter >> 1;
  return BoxMuller(Uniform(2 * pair), Uniform(2 * pair + 1), counter & 1);
}

double Rng::Uniform() { return BitsToOpenUnit(engine_()); }

double Rng::Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

double Rng::Normal() {
  const double u1 = Uniform();
  const double u2 = Uniform();
  return BoxMuller(u1, u2, false);
}

std::uint64_t Rng::Below(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

}  // namespace dfprobe
