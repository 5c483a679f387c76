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

#include "dfprobe/io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace dfprobe {

namespace {

template <typename T>
void PutLe(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xff));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T GetLe(const std::string& in, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i));
  }
  return static_cast<T>(u);
}

std::string EncodeRaw(std::uint8_t kind, std::uint32_t t, std::uint32_t b,
                      const MatrixF& data) {
  std::string out;
  out.reserve(kCacheHeaderSize + 4 * static_cast<std::size_t>(data.size()));
  out.append(kCacheMagic, 4);
  PutLe<std::uint32_t>(out, kCacheVersion);
  PutLe<std::uint8_t>(out, kind);
  PutLe<std::uint32_t>(out, t);
  PutLe<std::uint32_t>(out, b);
  PutLe<std::uint64_t>(out, static_cast<std::uint64_t>(data.rows()));
  PutLe<std::uint64_t>(out, static_cast<std::uint64_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    PutLe<std::uint32_t>(out, std::bit_cast<std::uint32_t>(data.data()[i]));
  }
  return out;
}

MatrixF DecodePayload(const std::string& bytes, const CacheHeader& h) {
  if (h.d != 0 && h.n > std::numeric_limits<std::uint64_t>::max() / h.d / 4) {
    throw Error(ErrorKind::kIo, "feature cache dimensions overflow");
  }
  const std::uint64_t expected = kCacheHeaderSize + 4 * h.n * h.d;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kIo, "feature cache payload size mismatch");
  }
  MatrixF m(static_cast<Eigen::Index>(h.n), static_cast<Eigen::Index>(h.d));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = std::bit_cast<float>(
        GetLe<std::uint32_t>(bytes, kCacheHeaderSize + 4 * static_cast<std::size_t>(i)));
  }
  return m;
}

}  // namespace

CacheHeader DecodeCacheHeader(const std::string& bytes) {
  if (bytes.size() < kCacheHeaderSize || std::memcmp(bytes.data(), kCacheMagic, 4) != 0) {
    throw Error(ErrorKind::kIo, "not a feature cache (bad magic)");
  }
  CacheHeader h;
  h.version = GetLe<std::uint32_t>(bytes, 4);
  if (h.version != kCacheVersion) {
    throw Error(ErrorKind::kIo, "unsupported feature cache version " + std::to_string(h.version));
  }
  h.kind = GetLe<std::uint8_t>(bytes, 8);
  h.t = GetLe<std::uint32_t>(bytes, 9);
  h.b = GetLe<std::uint32_t>(bytes, 13);
  h.n = GetLe<std::uint64_t>(bytes, 17);
  h.d = GetLe<std::uint64_t>(bytes, 25);
  return h;
}

std::string EncodeFeatureCache(const FeatureMatrix& features) {
  if (!features.data.allFinite()) {
    throw InvalidArgument("feature matrix contains non-finite values");
  }
  return EncodeRaw(static_cast<std::uint8_t>(features.modality),
                   static_cast<std::uint32_t>(features.t),
                   static_cast<std::uint32_t>(features.b), features.data);
}

FeatureMatrix DecodeFeatureCache(const std::string& bytes) {
  const CacheHeader h = DecodeCacheHeader(bytes);
  if (h.kind > static_cast<std::uint8_t>(Modality::kFused)) {
    throw Error(ErrorKind::kIo, "cache holds a model, not features");
  }
  FeatureMatrix f;
  f.modality = static_cast<Modality>(h.kind);
  f.t = static_cast<int>(h.t);
  f.b = static_cast<int>(h.b);
  f.data = DecodePayload(bytes, h);
  return f;
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path);
}

void WriteFeatureCache(const std::string& path, const FeatureMatrix& features) {
  WriteFileBytes(path, EncodeFeatureCache(features));
}

FeatureMatrix ReadFeatureCache(const std::string& path) {
  return DecodeFeatureCache(ReadFileBytes(path));
}

void WriteProbeModel(const std::string& path, const ProbeModel& model, int t, int b) {
  MatrixF packed(model.classes(), model.dim() + 1);
  packed.leftCols(model.dim()) = model.weight.cast<float>();
  packed.col(model.dim()) = model.bias.cast<float>();
  const std::uint8_t kind =
      model.loss == LossKind::kBceMultiLabel ? kKindProbeBce : kKindProbeCe;
  WriteFileBytes(path, EncodeRaw(kind, static_cast<std::uint32_t>(t),
                                 static_cast<std::uint32_t>(b), packed));
}

ProbeModel ReadProbeModel(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  const CacheHeader h = DecodeCacheHeader(bytes);
  if (h.kind != kKindProbeBce && h.kind != kKindProbeCe) {
    throw Error(ErrorKind::kIo, path + " does not hold a probe model");
  }
  if (h.d < 2) throw Error(ErrorKind::kIo, "probe model has no weights");
  const MatrixF packed = DecodePayload(bytes, h);
  ProbeModel m;
  m.loss = h.kind == kKindProbeBce ? LossKind::kBceMultiLabel : LossKind::kCeSingleLabel;
  m.weight = packed.leftCols(packed.cols() - 1).cast<double>();
  m.bias = packed.col(packed.cols() - 1).cast<double>();
  return m;
}

}  // namespace dfprobe
