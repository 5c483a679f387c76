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

#ifndef DFPROBE_IO_H_
#define DFPROBE_IO_H_

#include <cstdint>
#include <string>

#include "dfprobe/backbone.h"
#include "dfprobe/probe.h"

namespace dfprobe {

// Binary feature cache, little-endian, no padding:
//
//   offset  size  field
//   0       4     magic "DFFT"
//   4       4     format version (u32)
//   8       1     kind (u8): 0 image, 1 text, 2 fused, 16 probe/BCE, 17 probe/CE
//   9       4     t (u32)
//   13      4     b (u32)
//   17      8     n (u64)
//   25      8     d (u64)
//   33      4*n*d payload, float32 row-major
//
// Probe models reuse the layout with n = K rows of d + 1 values (weights
// followed by the bias).
inline constexpr char kCacheMagic[4] = {'D', 'F', 'F', 'T'};
inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::size_t kCacheHeaderSize = 33;
inline constexpr std::uint8_t kKindProbeBce = 16;
inline constexpr std::uint8_t kKindProbeCe = 17;

struct CacheHeader {
  std::uint32_t version = kCacheVersion;
  std::uint8_t kind = 0;
  std::uint32_t t = 0;
  std::uint32_t b = 0;
  std::uint64_t n = 0;
  std::uint64_t d = 0;
};

std::string EncodeFeatureCache(const FeatureMatrix& features);
FeatureMatrix DecodeFeatureCache(const std::string& bytes);
CacheHeader DecodeCacheHeader(const std::string& bytes);

void WriteFeatureCache(const std::string& path, const FeatureMatrix& features);
FeatureMatrix ReadFeatureCache(const std::string& path);

void WriteProbeModel(const std::string& path, const ProbeModel& model, int t,
                     int b);
ProbeModel ReadProbeModel(const std::string& path);

std::string ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, const std::string& bytes);

}  // namespace dfprobe

#endif  // DFPROBE_IO_H_
