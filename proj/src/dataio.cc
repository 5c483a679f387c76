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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dfprobe/random.h"
#include "json.hpp"

namespace dfprobe {

using nlohmann::json;

std::string ClassCatalog::Plural(int index) const {
  const std::string& name = names.at(static_cast<std::size_t>(index));
  if (auto it = plural_overrides.find(name); it != plural_overrides.end()) {
    return it->second;
  }
  if (!pluralizable.empty() && !pluralizable.at(static_cast<std::size_t>(index))) {
    return name;
  }
  return name + "s";
}

bool ClassCatalog::IsRare(int index) const {
  if (total <= 0) return false;
  return static_cast<double>(counts.at(static_cast<std::size_t>(index))) /
             static_cast<double>(total) <
         rare_threshold;
}

ClassCatalog ClassCatalog::FromRecords(std::vector<std::string> names,
                                       std::span<const DatasetRecord> train,
                                       double rare_threshold) {
  ClassCatalog c;
  c.names = std::move(names);
  c.counts.assign(c.names.size(), 0);
  c.total = static_cast<std::int64_t>(train.size());
  c.rare_threshold = rare_threshold;
  for (const auto& r : train) {
    for (int l : r.labels) {
      if (l < 0 || l >= c.size()) throw InvalidArgument("label index out of range");
      ++c.counts[static_cast<std::size_t>(l)];
    }
  }
  return c;
}

std::string AugmentCaption(const DatasetRecord& record,
                           const ClassCatalog& catalog) {
  if (record.labels.empty()) return record.caption;
  LabelSet labels = record.labels;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  for (int l : labels) {
    if (l < 0 || l >= catalog.size()) {
      throw InvalidArgument("unknown label index " + std::to_string(l));
    }
  }
  std::string out = record.caption;
  out += kLabelPhrase;
  std::vector<int> rare;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ", ";
    out += catalog.Plural(labels[i]);
    if (catalog.IsRare(labels[i])) rare.push_back(labels[i]);
  }
  out += '.';
  if (!rare.empty()) {
    out += kRarePhrase;
    for (std::size_t i = 0; i < rare.size(); ++i) {
      if (i > 0) out += ", ";
      out += catalog.Plural(rare[i]);
    }
    out += '.';
  }
  return out;
}

std::vector<std::int32_t> PadOrTruncate(std::span<const std::int32_t> tokens,
                                        int length, std::int32_t eos_id) {
  if (length < 1) throw InvalidArgument("target length must be >= 1");
  std::vector<std::int32_t> out(static_cast<std::size_t>(length), eos_id);
  const std::size_t keep = std::min(tokens.size(), out.size());
  std::copy_n(tokens.begin(), keep, out.begin());
  return out;
}

std::vector<LengthBucket> TokenLengthHistogram(std::span<const int> lengths,
                                               int bucket_width) {
  if (bucket_width < 1) throw InvalidArgument("bucket width must be >= 1");
  int longest = 0;
  for (int l : lengths) longest = std::max(longest, l);
  std::vector<LengthBucket> out;
  for (int lo = 1; lo <= longest; lo += bucket_width) {
    out.push_back({lo, lo + bucket_width - 1, 0});
  }
  for (int l : lengths) {
    if (l >= 1) ++out[static_cast<std::size_t>((l - 1) / bucket_width)].count;
  }
  return out;
}

HashTokenizer::HashTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size <= kFirstWordId) {
    throw InvalidArgument("tokenizer vocabulary too small");
  }
}

std::vector<std::int32_t> HashTokenizer::Encode(std::string_view text) const {
  std::vector<std::int32_t> ids;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : word) h = (h ^ ch) * 1099511628211ULL;
    ids.push_back(kFirstWordId +
                  static_cast<std::int32_t>(h % static_cast<std::uint64_t>(
                                                    vocab_size_ - kFirstWordId)));
    word.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      word.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  return ids;
}

std::vector<RareCategoryRow> RareCategoryStats(
    std::span<const DatasetRecord> records, const ClassCatalog& catalog) {
  if (records.empty()) throw InvalidArgument("rare-category stats need records");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(catalog.size()), 0);
  for (const auto& r : records) {
    for (int l : r.labels) {
      if (l < 0 || l >= catalog.size()) throw InvalidArgument("label index out of range");
      ++counts[static_cast<std::size_t>(l)];
    }
  }
  const auto n = static_cast<double>(records.size());
  std::vector<int> rare;
  for (int c = 0; c < catalog.size(); ++c) {
    if (static_cast<double>(counts[c]) / n < catalog.rare_threshold) rare.push_back(c);
  }
  std::stable_sort(rare.begin(), rare.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<RareCategoryRow> rows;
  for (int c : rare) {
    rows.push_back({catalog.names[c], counts[c], 100.0 * static_cast<double>(counts[c]) / n});
  }
  return rows;
}

namespace {

json RecordToJson(const DatasetRecord& r) {
  json j = {{"id", r.id}, {"caption", r.caption}, {"labels", r.labels}};
  if (!r.tokens.empty()) j["tokens"] = r.tokens;
  if (r.image_patches) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < r.image_patches->rows(); ++i) {
      std::vector<float> row(r.image_patches->row(i).begin(),
                             r.image_patches->row(i).end());
      rows.push_back(row);
    }
    j["image_patches"] = std::move(rows);
  }
  return j;
}

DatasetRecord RecordFromJson(const json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.caption = j.value("caption", std::string());
  r.labels = j.value("labels", LabelSet{});
  std::sort(r.labels.begin(), r.labels.end());
  r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
  if (j.contains("tokens")) r.tokens = j["tokens"].get<std::vector<std::int32_t>>();
  if (j.contains("image_patches")) {
    const auto rows = j["image_patches"].get<std::vector<std::vector<float>>>();
    if (!rows.empty()) {
      MatrixF m(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) {
          throw InvalidArgument("ragged image_patches in record " + std::to_string(r.id));
        }
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        }
      }
      r.image_patches = std::move(m);
    }
  }
  return r;
}

}  // namespace

std::vector<DatasetRecord> ReadRecords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open dataset file " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(RecordFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kIo, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void WriteRecords(const std::string& path, std::span<const DatasetRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  for (const auto& r : records) out << RecordToJson(r).dump() << '\n';
}

ClassCatalog ReadCatalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open catalog " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kIo, path + ": " + e.what());
  }
  ClassCatalog c;
  c.names = j.at("names").get<std::vector<std::string>>();
  c.counts = j.value("counts", std::vector<std::int64_t>(c.names.size(), 0));
  c.total = j.value("total", std::int64_t{0});
  c.rare_threshold = j.value("rare_threshold", 0.01);
  c.plural_overrides = j.value("plural_overrides", std::map<std::string, std::string>{});
  c.pluralizable = j.value("pluralizable", std::vector<bool>{});
  if (c.counts.size() != c.names.size()) {
    throw InvalidArgument("catalog counts and names differ in length");
  }
  return c;
}

void WriteCatalog(const std::string& path, const ClassCatalog& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  json j = {{"names", c.names},
            {"counts", c.counts},
            {"total", c.total},
            {"rare_threshold", c.rare_threshold},
            {"plural_overrides", c.plural_overrides}};
  if (!c.pluralizable.empty()) j["pluralizable"] = c.pluralizable;
  out << j.dump(2) << '\n';
}

MatrixD LabelMatrix(std::span<const DatasetRecord> records, int classes) {
  MatrixD y = MatrixD::Zero(static_cast<Eigen::Index>(records.size()), classes);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (int l : records[i].labels) {
      if (l < 0 || l >= classes) throw InvalidArgument("label index out of range");
      y(static_cast<Eigen::Index>(i), l) = 1.0;
    }
  }
  return y;
}

RecordDataset::RecordDataset(std::vector<DatasetRecord> train,
                             std::vector<DatasetRecord> val, int classes,
                             RecordPreprocessing prep)
    : train_(std::move(train)), val_(std::move(val)), classes_(classes), prep_(prep) {
  if (train_.empty() || val_.empty()) {
    throw InvalidArgument("dataset needs non-empty train and val splits");
  }
}

InputBatch RecordDataset::Inputs(Modality modality, Split split, int, int) const {
  const auto& recs = records(split);
  InputBatch batch;
  batch.modality = modality;
  const HashTokenizer tokenizer(prep_.vocab_size);
  for (const auto& r : recs) {
    batch.sample_ids.push_back(static_cast<std::uint64_t>(r.id));
    if (modality == Modality::kText) {
      const auto raw = r.tokens.empty() ? tokenizer.Encode(r.caption) : r.tokens;
      batch.tokens.push_back(PadOrTruncate(raw, prep_.seq_len, HashTokenizer::kEosId));
    } else {
      if (!r.image_patches) {
        throw InvalidArgument("record " + std::to_string(r.id) + " has no image_patches");
      }
      batch.patches.push_back(*r.image_patches);
    }
  }
  return batch;
}

MatrixD RecordDataset::Labels(Split split) const {
  return LabelMatrix(records(split), classes_);
}

std::pair<int, int> ProfileGrid::Argmax() const {
  if (timesteps < 1 || blocks < 1 ||
      values.size() != static_cast<std::size_t>(timesteps * blocks)) {
    throw InvalidArgument("malformed profile grid");
  }
  std::pair<int, int> best{0, 0};
  for (int t = 0; t < timesteps; ++t) {
    for (int b = 0; b < blocks; ++b) {
      if (at(t, b) > at(best.first, best.second)) best = {t, b};
    }
  }
  return best;
}

ProfileGrid UnimodalProfile(int timesteps, int blocks, int peak_t, int peak_b,
                            double floor, double width) {
  if (peak_t < 0 || peak_t >= timesteps || peak_b < 0 || peak_b >= blocks) {
    throw InvalidArgument("profile peak outside grid");
  }
  ProfileGrid g{timesteps, blocks, {}};
  for (int t = 0; t < timesteps; ++t) {
    for (int b = 0; b < blocks; ++b) {
      const double d2 = (t - peak_t) * (t - peak_t) + (b - peak_b) * (b - peak_b);
      g.values.push_back(floor + (1.0 - floor) * std::exp(-d2 / (2.0 * width * width)));
    }
  }
  return g;
}

ProfileGrid MonotoneProfile(int timesteps, int blocks, double low, double high) {
  ProfileGrid g{timesteps, blocks, {}};
  for (int t = 0; t < timesteps; ++t) {
    for (int b = 0; b < blocks; ++b) {
      const double tf = timesteps > 1 ? static_cast<double>(t) / (timesteps - 1) : 0.0;
      const double bf = blocks > 1 ? static_cast<double>(b) / (blocks - 1) : 1.0;
      g.values.push_back(low + (high - low) * 0.5 * ((1.0 - tf) + bf));
    }
  }
  return g;
}

void SyntheticSpec::Validate() const {
  if (n_train < 1 || n_val < 1) throw InvalidArgument("synthetic splits must be non-empty");
  if (classes < 2) throw InvalidArgument("synthetic benchmark needs >= 2 classes");
  if (!(label_density > 0.0)) throw InvalidArgument("label_density must be positive");
  if (seq_len < 1 || patch_input_dim < 1) throw InvalidArgument("bad synthetic shapes");
  if (vocab_size < SyntheticBenchmark::kFirstClassToken + 2 * classes + 8) {
    throw InvalidArgument("synthetic vocabulary too small for the class tokens");
  }
  for (const ProfileGrid* p : {&image_profile, &text_profile}) {
    p->Argmax();  // shape check
    for (double v : p->values) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("profile values must lie in [0, 1]");
    }
    if (std::all_of(p->values.begin(), p->values.end(), [](double v) { return v == 0.0; })) {
      throw InvalidArgument("degenerate profile: every cell has zero signal");
    }
  }
}

std::vector<std::string> DefaultClassNames(int classes) {
  static const char* kNames[] = {
      "person",  "bicycle", "car",     "motorcycle", "airplane", "bus",
      "train",   "truck",   "boat",    "bench",      "bird",     "cat",
      "dog",     "horse",   "sheep",   "cow",        "chair",    "bottle",
      "toaster", "clock"};
  std::vector<std::string> out;
  for (int i = 0; i < classes; ++i) {
    out.push_back(i < static_cast<int>(std::size(kNames)) ? kNames[i]
                                                          : "class" + std::to_string(i));
  }
  return out;
}

namespace {

constexpr std::uint64_t kLabelTag = 0x4c42;
constexpr std::uint64_t kPatternTag = 0x5054;
constexpr std::uint64_t kNuisanceTag = 0x4e55;
constexpr std::uint64_t kCaptionTag = 0x4350;

}  // namespace

SyntheticBenchmark SyntheticBenchmark::Generate(const SyntheticSpec& spec) {
  spec.Validate();
  SyntheticBenchmark bench(spec);
  const int k = spec.classes;

  // Class frequencies decay geometrically so some classes are rare.
  std::vector<double> weight(k);
  for (int c = 0; c < k; ++c) weight[c] = std::pow(0.8, c);
  const double weight_sum = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<double> rate(k);
  for (int c = 0; c < k; ++c) {
    rate[c] = std::min(0.9, spec.label_density * weight[c] / weight_sum);
  }

  Rng pattern_rng(HashKey({kPatternTag, spec.seed}));
  bench.class_patterns_.resize(k, spec.patch_input_dim);
  for (Eigen::Index i = 0; i < bench.class_patterns_.size(); ++i) {
    bench.class_patterns_.data()[i] = static_cast<float>(pattern_rng.Normal());
  }

  auto make_split = [&](int count, std::int64_t first_id) {
    std::vector<DatasetRecord> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      DatasetRecord r;
      r.id = first_id + i;
      const CounterRng rng(HashKey({kLabelTag, spec.seed, static_cast<std::uint64_t>(r.id)}));
      for (int c = 0; c < k; ++c) {
        if (rng.Uniform(static_cast<std::uint64_t>(c)) < rate[c]) r.labels.push_back(c);
      }
      if (r.labels.empty()) {
        // Draw one label by frequency weight.
        double u = rng.Uniform(static_cast<std::uint64_t>(k)) * weight_sum;
        int pick = 0;
        while (pick < k - 1 && u > weight[pick]) u -= weight[pick++];
        r.labels.push_back(pick);
      }
      r.tokens = bench.Tokens(r.id, r.labels, 1.0);
      r.image_patches = bench.Patches(r.id, r.labels, 1.0);
      out.push_back(std::move(r));
    }
    return out;
  };
  bench.train_ = make_split(spec.n_train, 0);
  bench.val_ = make_split(spec.n_val, spec.n_train);

  bench.catalog_ = ClassCatalog::FromRecords(DefaultClassNames(k), bench.train_);
  bench.catalog_.plural_overrides = {{"person", "people"}};
  bench.catalog_.pluralizable.assign(static_cast<std::size_t>(k), true);
  for (int c = 0; c < k; ++c) {
    if (bench.catalog_.names[c] == "sheep") bench.catalog_.pluralizable[c] = false;
  }
  const auto names = bench.catalog_.names;
  for (auto* split : {&bench.train_, &bench.val_}) {
    for (auto& r : *split) {
      std::ostringstream caption;
      for (std::size_t i = 0; i < r.tokens.size(); ++i) {
        const std::int32_t id = r.tokens[i];
        if (id == HashTokenizer::kEosId) break;
        if (i > 0) caption << ' ';
        const std::int32_t cls = (id - kFirstClassToken) / 2;
        if (id >= kFirstClassToken && cls < k) {
          caption << names[cls];
        } else {
          caption << 'w' << id;
        }
      }
      caption << '.';
      r.caption = caption.str();
    }
  }
  return bench;
}

MatrixF SyntheticBenchmark::Patches(std::int64_t id, const LabelSet& labels,
                                    double scale) const {
  const CounterRng noise(HashKey({kNuisanceTag, spec_.seed, static_cast<std::uint64_t>(id)}));
  MatrixF m(spec_.seq_len, spec_.patch_input_dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(noise.Normal(static_cast<std::uint64_t>(i)));
  }
  const auto amp = static_cast<float>(scale * spec_.image_signal);
  for (int l : labels) m.rowwise() += amp * class_patterns_.row(l);
  return m;
}

std::vector<std::int32_t> SyntheticBenchmark::Tokens(std::int64_t id,
                                                     const LabelSet& labels,
                                                     double keep) const {
  const CounterRng rng(HashKey({kCaptionTag, spec_.seed, static_cast<std::uint64_t>(id)}));
  const int k = spec_.classes;
  const std::int32_t first_filler = kFirstClassToken + 2 * k;
  const auto filler_count = static_cast<std::uint64_t>(spec_.vocab_size - first_filler);
  std::uint64_t ctr = 0;

  const int words = 6 + static_cast<int>(rng.Bits(ctr++) % 7);
  std::vector<std::int32_t> seq;
  for (int w = 0; w < words; ++w) {
    seq.push_back(first_filler + static_cast<std::int32_t>(rng.Bits(ctr++) % filler_count));
  }
  auto insert = [&](int cls) {
    const std::int32_t token =
        kFirstClassToken + 2 * cls + static_cast<std::int32_t>(rng.Bits(ctr++) % 2);
    const auto pos = static_cast<std::ptrdiff_t>(rng.Bits(ctr++) % (seq.size() + 1));
    seq.insert(seq.begin() + pos, token);
  };
  // One uniform per (sample, class) shared by every cell: a larger keep
  // fraction retains a superset of the mentions.
  for (int l : labels) {
    const double u = rng.Uniform(1000 + static_cast<std::uint64_t>(l));
    if (u < keep) {
      insert(l);
    } else {
      ctr += 2;
    }
  }
  if (rng.Uniform(2000) < spec_.text_spurious_rate) {
    const int cls = static_cast<int>(rng.Bits(2001) % static_cast<std::uint64_t>(k));
    if (!std::binary_search(labels.begin(), labels.end(), cls)) insert(cls);
  }
  return PadOrTruncate(seq, spec_.seq_len, HashTokenizer::kEosId);
}

InputBatch SyntheticBenchmark::Inputs(Modality modality, Split split, int t_index,
                                      int b_index) const {
  const auto& recs = records(split);
  const double p = Profile(modality).at(t_index, b_index);
  InputBatch batch;
  batch.modality = modality;
  for (const auto& r : recs) {
    batch.sample_ids.push_back(static_cast<std::uint64_t>(r.id));
    if (modality == Modality::kImage) {
      batch.patches.push_back(Patches(r.id, r.labels, p));
    } else {
      batch.tokens.push_back(Tokens(r.id, r.labels, p));
    }
  }
  return batch;
}

MatrixD SyntheticBenchmark::Labels(Split split) const {
  return LabelMatrix(records(split), spec_.classes);
}

std::uint64_t SyntheticBenchmark::InputKey(Modality modality, int t_index,
                                           int b_index) const {
  return HashKey({static_cast<std::uint64_t>(modality),
                  static_cast<std::uint64_t>(t_index),
                  static_cast<std::uint64_t>(b_index)});
}

const ProfileGrid& SyntheticBenchmark::Profile(Modality modality) const {
  if (modality == Modality::kImage) return spec_.image_profile;
  if (modality == Modality::kText) return spec_.text_profile;
  throw InvalidArgument("fused modality has no profile");
}

std::pair<int, int> SyntheticBenchmark::Planted(Modality modality) const {
  return Profile(modality).Argmax();
}

}  // namespace dfprobe
