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

#ifndef DFPROBE_DATAIO_H_
#define DFPROBE_DATAIO_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfprobe/backbone.h"
#include "dfprobe/common.h"
#include "dfprobe/metrics.h"

namespace dfprobe {

struct DatasetRecord {
  std::int64_t id = 0;
  std::string caption;
  LabelSet labels;                       // sorted class indices
  std::vector<std::int32_t> tokens;      // empty when not tokenized
  std::optional<MatrixF> image_patches;  // seq_len x patch_input_dim
};

struct ClassCatalog {
  std::vector<std::string> names;
  std::vector<std::int64_t> counts;  // occurrences in the training split
  std::int64_t total = 0;            // training split size
  double rare_threshold = 0.01;
  // Names that do not take a plain "s" plural.
  std::map<std::string, std::string> plural_overrides;
  // Names that stay singular (mass nouns); empty means all pluralize.
  std::vector<bool> pluralizable;

  int size() const { return static_cast<int>(names.size()); }
  std::string Plural(int index) const;
  bool IsRare(int index) const;

  // Catalog with counts taken from a training split.
  static ClassCatalog FromRecords(std::vector<std::string> names,
                                  std::span<const DatasetRecord> train,
                                  double rare_threshold = 0.01);
};

inline constexpr std::string_view kLabelPhrase =
    " In this photo, there are also some ";
inline constexpr std::string_view kRarePhrase =
    " In the photo's subtle background, you can also spot some ";

// Appends the label sentence (all labels, catalog order) and, when any
// label is rare, the background sentence listing only the rare ones.
std::string AugmentCaption(const DatasetRecord& record,
                           const ClassCatalog& catalog);

// Exactly `length` tokens: right-padded with eos_id or cut to the prefix.
std::vector<std::int32_t> PadOrTruncate(std::span<const std::int32_t> tokens,
                                        int length, std::int32_t eos_id);

struct LengthBucket {
  int lo = 0;
  int hi = 0;
  std::int64_t count = 0;
};

// Counts lengths in consecutive buckets [1, w], [w+1, 2w], ... up to the
// bucket holding the longest sequence. Zero-length entries are ignored.
std::vector<LengthBucket> TokenLengthHistogram(std::span<const int> lengths,
                                               int bucket_width = 15);

// Word-level tokenizer hashing lowercase alphanumeric words into
// [kFirstWordId, vocab_size). Ids 0 and 1 are reserved.
class HashTokenizer {
 public:
  static constexpr std::int32_t kEosId = 0;
  static constexpr std::int32_t kUnkId = 1;
  static constexpr std::int32_t kFirstWordId = 2;

  explicit HashTokenizer(int vocab_size);
  std::vector<std::int32_t> Encode(std::string_view text) const;

 private:
  int vocab_size_;
};

struct RareCategoryRow {
  std::string name;
  std::int64_t count = 0;
  double percentage = 0.0;
};

// Classes with count / N below the catalog threshold, most frequent first
// (ties by class index). Counts come from `records`, not the catalog.
std::vector<RareCategoryRow> RareCategoryStats(
    std::span<const DatasetRecord> records, const ClassCatalog& catalog);

// Line-delimited JSON records: {"id", "caption", "labels", "tokens",
// "image_patches"}; the last two are optional.
std::vector<DatasetRecord> ReadRecords(const std::string& path);
void WriteRecords(const std::string& path, std::span<const DatasetRecord> records);

ClassCatalog ReadCatalog(const std::string& path);
void WriteCatalog(const std::string& path, const ClassCatalog& catalog);

MatrixD LabelMatrix(std::span<const DatasetRecord> records, int classes);

enum class Split { kTrain, kVal };

// Inputs and labels for probing. Cell indices let a source vary its inputs
// per grid cell; sources backed by fixed files ignore them.
class DatasetSource {
 public:
  virtual ~DatasetSource() = default;
  virtual int classes() const = 0;
  virtual InputBatch Inputs(Modality modality, Split split, int t_index,
                            int b_index) const = 0;
  virtual MatrixD Labels(Split split) const = 0;
  // Identifies the input variant of a cell; cells sharing a key share inputs.
  virtual std::uint64_t InputKey(Modality modality, int t_index,
                                 int b_index) const = 0;
};

struct RecordPreprocessing {
  int seq_len = 16;
  int vocab_size = 256;
  int patch_input_dim = 16;
};

// Train/val records loaded from files.
class RecordDataset : public DatasetSource {
 public:
  RecordDataset(std::vector<DatasetRecord> train, std::vector<DatasetRecord> val,
                int classes, RecordPreprocessing prep);

  int classes() const override { return classes_; }
  InputBatch Inputs(Modality modality, Split split, int t_index,
                    int b_index) const override;
  MatrixD Labels(Split split) const override;
  std::uint64_t InputKey(Modality, int, int) const override { return 0; }

  const std::vector<DatasetRecord>& records(Split split) const {
    return split == Split::kTrain ? train_ : val_;
  }

 private:
  std::vector<DatasetRecord> train_;
  std::vector<DatasetRecord> val_;
  int classes_;
  RecordPreprocessing prep_;
};

// Per-cell discriminability over a (timestep index, block index) grid.
struct ProfileGrid {
  int timesteps = 0;
  int blocks = 0;
  std::vector<double> values;  // row-major [t_index][b_index]

  double at(int t_index, int b_index) const {
    return values.at(static_cast<std::size_t>(t_index * blocks + b_index));
  }
  // Highest cell; ties go to the smaller t index, then the smaller b index.
  std::pair<int, int> Argmax() const;
};

// Gaussian bump centred on (peak_t, peak_b): unimodal along both axes.
ProfileGrid UnimodalProfile(int timesteps, int blocks, int peak_t, int peak_b,
                            double floor, double width);
// Strictly decreasing in the timestep index, increasing in the block index.
ProfileGrid MonotoneProfile(int timesteps, int blocks, double low, double high);

struct SyntheticSpec {
  int n_train = 600;
  int n_val = 400;
  int classes = 8;
  double label_density = 2.0;
  int seq_len = 16;
  int patch_input_dim = 16;
  int vocab_size = 256;
  double image_signal = 0.4;
  // Per-sample probability of mentioning a class that is not a label.
  double text_spurious_rate = 0.05;
  ProfileGrid image_profile;
  ProfileGrid text_profile;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Multi-label benchmark whose per-cell inputs scale the class signal by the
// modality profile, so cell discriminability follows the planted trends.
class SyntheticBenchmark : public DatasetSource {
 public:
  static SyntheticBenchmark Generate(const SyntheticSpec& spec);

  int classes() const override { return spec_.classes; }
  InputBatch Inputs(Modality modality, Split split, int t_index,
                    int b_index) const override;
  MatrixD Labels(Split split) const override;
  std::uint64_t InputKey(Modality modality, int t_index,
                         int b_index) const override;

  const SyntheticSpec& spec() const { return spec_; }
  const ClassCatalog& catalog() const { return catalog_; }
  // Records at full signal strength.
  const std::vector<DatasetRecord>& records(Split split) const {
    return split == Split::kTrain ? train_ : val_;
  }
  // (t_index, b_index) of the profile maximum.
  std::pair<int, int> Planted(Modality modality) const;
  const ProfileGrid& Profile(Modality modality) const;

  // Class-token id range used in synthetic captions.
  static constexpr std::int32_t kFirstClassToken = 2;

 private:
  explicit SyntheticBenchmark(SyntheticSpec spec) : spec_(std::move(spec)) {}

  MatrixF Patches(std::int64_t id, const LabelSet& labels, double scale) const;
  std::vector<std::int32_t> Tokens(std::int64_t id, const LabelSet& labels,
                                   double keep) const;

  SyntheticSpec spec_;
  ClassCatalog catalog_;
  std::vector<DatasetRecord> train_;
  std::vector<DatasetRecord> val_;
  MatrixF class_patterns_;  // classes x patch_input_dim
};

std::vector<std::string> DefaultClassNames(int classes);

}  // namespace dfprobe

#endif  // DFPROBE_DATAIO_H_
