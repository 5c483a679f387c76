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

#include "dfprobe/backbone.h"

#include <cstring>

#include "gtest/gtest.h"

namespace dfprobe {
namespace {

BackboneConfig TextConfig(std::uint64_t seed = 7) {
  BackboneConfig c;
  c.modality = Modality::kText;
  c.depth = 4;
  c.width = 16;
  c.heads = 2;
  c.seq_len = 6;
  c.vocab_size = 40;
  c.init_seed = seed;
  return c;
}

BackboneConfig ImageConfig(std::uint64_t seed = 7) {
  BackboneConfig c;
  c.modality = Modality::kImage;
  c.depth = 4;
  c.width = 16;
  c.heads = 4;
  c.seq_len = 5;
  c.patch_input_dim = 3;
  c.init_seed = seed;
  return c;
}

InputBatch TextBatch() {
  InputBatch b;
  b.modality = Modality::kText;
  b.sample_ids = {10, 11, 12};
  b.tokens = {{2, 3, 4, 5, 0, 0}, {7, 7, 7, 1, 0, 0}, {39, 38, 2, 9, 10, 0}};
  return b;
}

InputBatch ImageBatch() {
  InputBatch b;
  b.modality = Modality::kImage;
  for (int i = 0; i < 3; ++i) {
    b.sample_ids.push_back(100 + i);
    MatrixF p(5, 3);
    for (int j = 0; j < p.size(); ++j) p.data()[j] = 0.1f * (i + 1) * (j - 7);
    b.patches.push_back(p);
  }
  return b;
}

const NoiseSchedule& Schedule() {
  static const auto s = NoiseSchedule::Linear(1000, 1e-4, 0.02);
  return s;
}

bool SameBytes(const MatrixF& a, const MatrixF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

TEST(BackboneTest, SameSeedSameOutput) {
  const Backbone a(TextConfig()), b(TextConfig());
  EXPECT_EQ(a.ParameterChecksum(), b.ParameterChecksum());
  const ExtractRequest req{10, 3, NoiseMode::kDeterministic, 1};
  EXPECT_TRUE(SameBytes(a.Extract(TextBatch(), req, Schedule()).data,
                        b.Extract(TextBatch(), req, Schedule()).data));
}

TEST(BackboneTest, DifferentSeedDifferentOutput) {
  const Backbone a(TextConfig(7)), b(TextConfig(8));
  const ExtractRequest req{10, 3, NoiseMode::kDeterministic, 1};
  const MatrixF fa = a.Extract(TextBatch(), req, Schedule()).data;
  const MatrixF fb = b.Extract(TextBatch(), req, Schedule()).data;
  EXPECT_GT((fa - fb).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(BackboneTest, ShapesAndProvenance) {
  const Backbone bb(ImageConfig());
  const ExtractRequest req{30, 2, NoiseMode::kDeterministic, 0};
  const FeatureMatrix f = bb.Extract(ImageBatch(), req, Schedule());
  EXPECT_EQ(f.rows(), 3);
  EXPECT_EQ(f.cols(), 16);
  EXPECT_EQ(f.t, 30);
  EXPECT_EQ(f.b, 2);
  EXPECT_EQ(f.modality, Modality::kImage);
  EXPECT_EQ(f.pooling, "mean");
}

TEST(BackboneTest, BatchPermutationEquivariance) {
  const Backbone bb(TextConfig());
  const ExtractRequest req{20, 4, NoiseMode::kStochastic, 3};
  InputBatch batch = TextBatch();
  const MatrixF f = bb.Extract(batch, req, Schedule()).data;
  std::swap(batch.sample_ids[0], batch.sample_ids[2]);
  std::swap(batch.tokens[0], batch.tokens[2]);
  const MatrixF g = bb.Extract(batch, req, Schedule()).data;
  EXPECT_TRUE(SameBytes(f.row(0), g.row(2)));
  EXPECT_TRUE(SameBytes(f.row(2), g.row(0)));
  EXPECT_TRUE(SameBytes(f.row(1), g.row(1)));
}

TEST(BackboneTest, AllBlocksMatchesSingleBlockExtraction) {
  const Backbone bb(ImageConfig());
  const ExtractRequest req{50, 4, NoiseMode::kDeterministic, 2};
  const auto all = bb.ExtractAllBlocks(ImageBatch(), req, Schedule());
  ASSERT_EQ(all.size(), 4u);
  for (int b = 1; b <= 4; ++b) {
    ExtractRequest one = req;
    one.block = b;
    EXPECT_TRUE(SameBytes(all[b - 1].data, bb.Extract(ImageBatch(), one, Schedule()).data)) << b;
    EXPECT_EQ(all[b - 1].b, b);
  }
}

TEST(BackboneTest, FloatPathTracksDoubleReference) {
  for (const auto& cfg : {TextConfig(), ImageConfig()}) {
    const Backbone bb(cfg);
    const InputBatch batch = cfg.modality == Modality::kText ? TextBatch() : ImageBatch();
    const ExtractRequest req{100, 4, NoiseMode::kDeterministic, 0};
    const TokenFeatures tokens = bb.ExtractTokens(batch, req, Schedule());
    const auto ref = bb.ForwardReference(batch, 1, req, Schedule());
    ASSERT_EQ(ref.size(), 4u);
    EXPECT_LT((tokens.tokens[1].cast<double>() - ref.back()).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(BackboneTest, MeanPoolOfTokensEqualsExtract) {
  const Backbone bb(TextConfig());
  const ExtractRequest req{0, 2, NoiseMode::kDeterministic, 0};
  const FeatureMatrix pooled = bb.ExtractTokens(TextBatch(), req, Schedule()).MeanPool();
  const FeatureMatrix direct = bb.Extract(TextBatch(), req, Schedule());
  EXPECT_LT((pooled.data - direct.data).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(BackboneTest, TimestepChangesFeatures) {
  const Backbone bb(ImageConfig());
  const MatrixF a = bb.Extract(ImageBatch(), {10, 2, NoiseMode::kDeterministic, 0}, Schedule()).data;
  const MatrixF b = bb.Extract(ImageBatch(), {150, 2, NoiseMode::kDeterministic, 0}, Schedule()).data;
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(BackboneTest, RejectsInvalidRequests) {
  const Backbone bb(TextConfig());
  EXPECT_THROW(bb.Extract(TextBatch(), {10, 0, NoiseMode::kDeterministic, 0}, Schedule()), Error);
  EXPECT_THROW(bb.Extract(TextBatch(), {10, 5, NoiseMode::kDeterministic, 0}, Schedule()), Error);
  EXPECT_THROW(bb.Extract(TextBatch(), {1001, 1, NoiseMode::kDeterministic, 0}, Schedule()), Error);
  InputBatch bad = TextBatch();
  bad.tokens[0][0] = 40;  // >= vocab_size
  EXPECT_THROW(bb.Extract(bad, {10, 1, NoiseMode::kDeterministic, 0}, Schedule()), Error);
  EXPECT_THROW(bb.Extract(ImageBatch(), {10, 1, NoiseMode::kDeterministic, 0}, Schedule()), Error);
}

TEST(BackboneTest, RejectsInvalidConfig) {
  BackboneConfig c = TextConfig();
  c.heads = 3;  // does not divide width
  EXPECT_THROW(Backbone{c}, Error);
  c = TextConfig();
  c.depth = 0;
  EXPECT_THROW(Backbone{c}, Error);
}

TEST(SinusoidalEmbeddingTest, KnownValues) {
  const VectorD e = SinusoidalEmbedding(0.0, 8);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(e[i], 0.0);
  for (int i = 4; i < 8; ++i) EXPECT_EQ(e[i], 1.0);
  const VectorD f = SinusoidalEmbedding(1.0, 8);
  EXPECT_NEAR(f[0], std::sin(1.0), 1e-15);
  EXPECT_NEAR(f[4], std::cos(1.0), 1e-15);
}

}  // namespace
}  // namespace dfprobe
