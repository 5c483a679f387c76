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

#include "dfprobe/dataio.h"

#include <filesystem>
#include <random>

#include "gtest/gtest.h"

namespace dfprobe {
namespace {

ClassCatalog SmallCatalog() {
  ClassCatalog c;
  c.names = {"person", "chair", "bottle", "toaster", "sheep"};
  c.counts = {900, 300, 250, 5, 40};
  c.total = 1000;
  c.plural_overrides = {{"person", "people"}};
  c.pluralizable = {true, true, true, true, false};
  return c;
}

TEST(AugmentCaptionTest, ReproducesPublishedExample) {
  DatasetRecord r;
  r.id = 190236;
  r.caption = "An office cubicle with four different types of computers.";
  r.labels = {2, 1};
  EXPECT_EQ(AugmentCaption(r, SmallCatalog()),
            "An office cubicle with four different types of computers. In this "
            "photo, there are also some chairs, bottles.");
}

TEST(AugmentCaptionTest, RareLabelsGetBackgroundSentence) {
  DatasetRecord r;
  r.caption = "A kitchen counter.";
  r.labels = {0, 3};
  EXPECT_EQ(AugmentCaption(r, SmallCatalog()),
            "A kitchen counter. In this photo, there are also some people, toasters. "
            "In the photo's subtle background, you can also spot some toasters.");
}

TEST(AugmentCaptionTest, EmptyLabelsAndMassNouns) {
  DatasetRecord r;
  r.caption = "A field.";
  EXPECT_EQ(AugmentCaption(r, SmallCatalog()), "A field.");
  r.labels = {4};
  EXPECT_EQ(AugmentCaption(r, SmallCatalog()), "A field. In this photo, there are also some sheep.");
  r.labels = {9};
  EXPECT_THROW(AugmentCaption(r, SmallCatalog()), Error);
}

TEST(AugmentCaptionTest, MarkerAppearsOnce) {
  DatasetRecord r;
  r.caption = "x";
  r.labels = {1, 2, 3};
  const std::string out = AugmentCaption(r, SmallCatalog());
  const auto first = out.find(kLabelPhrase);
  ASSERT_NE(first, std::string::npos);
  EXPECT_EQ(out.find(kLabelPhrase, first + 1), std::string::npos);
}

TEST(PadOrTruncateTest, Examples) {
  const std::vector<std::int32_t> three = {5, 6, 7};
  EXPECT_EQ(PadOrTruncate(three, 5, 0), (std::vector<std::int32_t>{5, 6, 7, 0, 0}));
  const std::vector<std::int32_t> seven = {1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(PadOrTruncate(seven, 5, 0), (std::vector<std::int32_t>{1, 2, 3, 4, 5}));
  EXPECT_THROW(PadOrTruncate(three, 0, 0), Error);
}

TEST(PadOrTruncateTest, LengthAndIdempotence) {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int32_t> x(gen() % 30);
    for (auto& v : x) v = static_cast<std::int32_t>(gen() % 50);
    const int len = 1 + static_cast<int>(gen() % 20);
    const auto once = PadOrTruncate(x, len, 0);
    EXPECT_EQ(once.size(), static_cast<std::size_t>(len));
    EXPECT_EQ(PadOrTruncate(once, len, 0), once);
  }
}

TEST(TokenLengthHistogramTest, MatchesBruteForceCounting) {
  std::mt19937 gen(3);
  std::vector<int> lengths(500);
  for (auto& l : lengths) l = static_cast<int>(gen() % 80);
  const auto h = TokenLengthHistogram(lengths, 15);
  for (const auto& b : h) {
    std::int64_t count = 0;
    for (int l : lengths) count += l >= b.lo && l <= b.hi;
    EXPECT_EQ(b.count, count);
  }
  EXPECT_EQ(h.front().lo, 1);
  EXPECT_EQ(h.front().hi, 15);
  EXPECT_EQ(h[1].lo, 16);
}

TEST(RareCategoryStatsTest, Boundaries) {
  std::vector<DatasetRecord> recs(200);
  for (auto& r : recs) r.labels = {0};
  recs[0].labels = {0, 3};
  const auto rows = RareCategoryStats(recs, SmallCatalog());
  // person is everywhere; chair, bottle and sheep never appear; toaster once.
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].name, "toaster");
  EXPECT_EQ(rows[0].count, 1);
  EXPECT_DOUBLE_EQ(rows[0].percentage, 0.5);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].percentage, 0.0);
  EXPECT_EQ(rows[1].name, "chair");  // zero-count ties keep catalog order
}

TEST(HashTokenizerTest, DeterministicAndInRange) {
  const HashTokenizer tok(100);
  const auto a = tok.Encode("A dog, a DOG!");
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0], a[2]);
  EXPECT_EQ(a[1], a[3]);
  for (auto id : a) {
    EXPECT_GE(id, HashTokenizer::kFirstWordId);
    EXPECT_LT(id, 100);
  }
}

TEST(RecordsIoTest, RoundTrip) {
  std::vector<DatasetRecord> recs(2);
  recs[0].id = 4;
  recs[0].caption = "quote \" and unicode é";
  recs[0].labels = {1, 3};
  recs[0].tokens = {5, 6};
  recs[1].id = 5;
  recs[1].caption = "plain";
  recs[1].image_patches = MatrixF::Constant(2, 3, 0.5f);
  const auto path = (std::filesystem::temp_directory_path() / "dfprobe_records.jsonl").string();
  WriteRecords(path, recs);
  const auto back = ReadRecords(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].caption, recs[0].caption);
  EXPECT_EQ(back[0].labels, recs[0].labels);
  EXPECT_EQ(back[0].tokens, recs[0].tokens);
  EXPECT_FALSE(back[0].image_patches.has_value());
  ASSERT_TRUE(back[1].image_patches.has_value());
  EXPECT_EQ(*back[1].image_patches, *recs[1].image_patches);

  const auto cpath = (std::filesystem::temp_directory_path() / "dfprobe_catalog.json").string();
  WriteCatalog(cpath, SmallCatalog());
  const auto cat = ReadCatalog(cpath);
  EXPECT_EQ(cat.names, SmallCatalog().names);
  EXPECT_EQ(cat.counts, SmallCatalog().counts);
  EXPECT_EQ(cat.Plural(0), "people");
  EXPECT_EQ(cat.Plural(4), "sheep");
  EXPECT_THROW(ReadRecords("/nonexistent/records.jsonl"), Error);
}

SyntheticSpec SmallSpec() {
  SyntheticSpec s;
  s.n_train = 50;
  s.n_val = 20;
  s.classes = 4;
  s.image_profile = UnimodalProfile(4, 3, 2, 1, 0.1, 1.0);
  s.text_profile = MonotoneProfile(3, 3, 0.2, 1.0);
  s.seed = 5;
  return s;
}

TEST(SyntheticTest, PlantedOptima) {
  const auto bench = SyntheticBenchmark::Generate(SmallSpec());
  EXPECT_EQ(bench.Planted(Modality::kImage), std::make_pair(2, 1));
  EXPECT_EQ(bench.Planted(Modality::kText), std::make_pair(0, 2));
}

TEST(SyntheticTest, ProfilesRealizeTrends) {
  const auto img = UnimodalProfile(6, 5, 2, 1, 0.15, 1.0);
  for (int b = 0; b < 5; ++b) {
    for (int t = 1; t <= 2; ++t) EXPECT_GT(img.at(t, b), img.at(t - 1, b));
    for (int t = 3; t < 6; ++t) EXPECT_LT(img.at(t, b), img.at(t - 1, b));
  }
  const auto txt = MonotoneProfile(4, 5, 0.2, 1.0);
  for (int t = 0; t < 4; ++t) {
    for (int b = 0; b < 5; ++b) {
      if (t > 0) EXPECT_LT(txt.at(t, b), txt.at(t - 1, b));
      if (b > 0) EXPECT_GT(txt.at(t, b), txt.at(t, b - 1));
    }
  }
}

TEST(SyntheticTest, ReproducibleAndValid) {
  const auto a = SyntheticBenchmark::Generate(SmallSpec());
  const auto b = SyntheticBenchmark::Generate(SmallSpec());
  ASSERT_EQ(a.records(Split::kTrain).size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& ra = a.records(Split::kTrain)[i];
    const auto& rb = b.records(Split::kTrain)[i];
    EXPECT_EQ(ra.caption, rb.caption);
    EXPECT_EQ(ra.labels, rb.labels);
    EXPECT_EQ(ra.tokens, rb.tokens);
    EXPECT_EQ(*ra.image_patches, *rb.image_patches);
    EXPECT_FALSE(ra.labels.empty());
    for (auto t : ra.tokens) EXPECT_LT(t, a.spec().vocab_size);
  }
  EXPECT_EQ(a.Labels(Split::kVal).rows(), 20);
  // Catalog counts agree with the training split.
  const auto& cat = a.catalog();
  for (int c = 0; c < 4; ++c) {
    std::int64_t count = 0;
    for (const auto& r : a.records(Split::kTrain)) {
      count += std::count(r.labels.begin(), r.labels.end(), c);
    }
    EXPECT_EQ(cat.counts[c], count);
  }
}

TEST(SyntheticTest, HigherKeepRetainsSupersetOfMentions) {
  const auto bench = SyntheticBenchmark::Generate(SmallSpec());
  // Text cells (2, 0) and (0, 2) have the smallest and largest keep rates.
  const auto low = bench.Inputs(Modality::kText, Split::kTrain, 2, 0);
  const auto high = bench.Inputs(Modality::kText, Split::kTrain, 0, 2);
  for (std::size_t i = 0; i < low.size(); ++i) {
    for (auto tok : low.tokens[i]) {
      if (tok >= SyntheticBenchmark::kFirstClassToken && tok < SyntheticBenchmark::kFirstClassToken + 8) {
        EXPECT_NE(std::find(high.tokens[i].begin(), high.tokens[i].end(), tok), high.tokens[i].end());
      }
    }
  }
}

TEST(SyntheticTest, RejectsDegenerateProfile) {
  SyntheticSpec s = SmallSpec();
  s.image_profile.values.assign(s.image_profile.values.size(), 0.0);
  EXPECT_THROW(SyntheticBenchmark::Generate(s), Error);
}

}  // namespace
}  // namespace dfprobe
