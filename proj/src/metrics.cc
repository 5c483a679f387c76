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

#include "dfprobe/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

namespace dfprobe {

namespace {

double Harmonic(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

void CheckBinary(const MatrixD& truth) {
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double v = truth.data()[i];
    if (v != 0.0 && v != 1.0) {
      throw InvalidArgument("ground truth must be binary");
    }
  }
}

}  // namespace

std::string FormatEvalRow(const EvalResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f",
                100.0 * r.mAP, 100.0 * r.CP, 100.0 * r.CR, 100.0 * r.CF1,
                100.0 * r.OP, 100.0 * r.OR, 100.0 * r.OF1);
  return buf;
}

double AveragePrecision(std::span<const double> scores,
                        std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) {
    throw InvalidArgument("scores and truth differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]]) {
      hits += 1.0;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sum / hits;
}

EvalResult Evaluate(const MatrixD& scores, const MatrixD& truth,
                    double threshold) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    throw InvalidArgument("scores and truth differ in shape");
  }
  if (scores.rows() == 0 || scores.cols() == 0) {
    throw InvalidArgument("cannot evaluate an empty score matrix");
  }
  CheckBinary(truth);

  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  EvalResult r;
  r.per_class_AP.resize(k);
  r.per_class_F1.resize(k);

  double ap_sum = 0.0;
  int ap_classes = 0;
  double p_sum = 0.0;
  double r_sum = 0.0;
  std::int64_t tp_all = 0, fp_all = 0, fn_all = 0;
  std::vector<double> column(n);
  std::vector<std::uint8_t> labels(n);
  for (Eigen::Index c = 0; c < k; ++c) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      column[i] = scores(i, c);
      labels[i] = truth(i, c) == 1.0;
      const bool predicted = scores(i, c) >= threshold;
      tp += predicted && labels[i];
      fp += predicted && !labels[i];
      fn += !predicted && labels[i];
    }
    const double ap = AveragePrecision(column, labels);
    r.per_class_AP[c] = ap;
    if (std::isnan(ap)) {
      r.classes_without_positives.push_back(static_cast<int>(c));
    } else {
      ap_sum += ap;
      ++ap_classes;
    }
    const bool empty = tp + fp == 0 || tp + fn == 0;
    if (empty) r.classes_with_empty_denominator.push_back(static_cast<int>(c));
    const double precision =
        tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                    : 0.0;
    const double recall =
        tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                    : 0.0;
    p_sum += precision;
    r_sum += recall;
    r.per_class_F1[c] = Harmonic(precision, recall);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  if (ap_classes == 0) {
    throw InvalidArgument("ground truth has no positives; mAP is undefined");
  }
  r.mAP = ap_sum / ap_classes;
  r.CP = p_sum / static_cast<double>(k);
  r.CR = r_sum / static_cast<double>(k);
  r.CF1 = Harmonic(r.CP, r.CR);
  r.OP = tp_all + fp_all > 0 ? static_cast<double>(tp_all) /
                                   static_cast<double>(tp_all + fp_all)
                             : 0.0;
  r.OR = tp_all + fn_all > 0 ? static_cast<double>(tp_all) /
                                   static_cast<double>(tp_all + fn_all)
                             : 0.0;
  r.OF1 = Harmonic(r.OP, r.OR);
  return r;
}

double TopKAccuracy(const MatrixD& scores, std::span<const int> truth_class,
                    int k) {
  const auto classes = static_cast<int>(scores.cols());
  if (k < 1 || k > classes) {
    throw InvalidArgument("k must lie in [1, " + std::to_string(classes) + "]");
  }
  if (static_cast<std::size_t>(scores.rows()) != truth_class.size()) {
    throw InvalidArgument("scores and truth differ in row count");
  }
  if (truth_class.empty()) throw InvalidArgument("no rows to score");
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const int y = truth_class[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw InvalidArgument("class index out of range");
    const double s = scores(i, y);
    int rank = 0;
    for (int c = 0; c < classes; ++c) {
      const double v = scores(i, c);
      if (v > s || (v == s && c < y)) ++rank;
    }
    hits += rank < k;
  }
  return static_cast<double>(hits) / static_cast<double>(truth_class.size());
}

double ErrorRate(const MatrixD& scores, std::span<const int> truth_class) {
  return 1.0 - TopKAccuracy(scores, truth_class, 1);
}

std::vector<LabelSet> ThresholdSets(const MatrixD& scores, double threshold) {
  std::vector<LabelSet> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      if (scores(i, c) >= threshold) out[i].push_back(static_cast<int>(c));
    }
  }
  return out;
}

std::vector<LabelSet> TruthSets(const MatrixD& truth) {
  CheckBinary(truth);
  return ThresholdSets(truth, 0.5);
}

PowersetReport MakePowersetReport(const std::vector<LabelSet>& predicted,
                                  const std::vector<LabelSet>& truth,
                                  std::size_t top_m) {
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("predicted and truth differ in length");
  }
  std::map<LabelSet, PowersetBucket> buckets;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    LabelSet key = truth[i];
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    LabelSet pred = predicted[i];
    std::sort(pred.begin(), pred.end());
    pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
    auto& bucket = buckets[key];
    bucket.labels = key;
    ++bucket.count;
    bucket.exact_matches += pred == key;
  }
  PowersetReport report;
  report.total = static_cast<std::int64_t>(truth.size());
  report.distinct = buckets.size();
  for (auto& [key, bucket] : buckets) {
    bucket.accuracy = static_cast<double>(bucket.exact_matches) /
                      static_cast<double>(bucket.count);
    report.top.push_back(std::move(bucket));
  }
  // std::map iteration is already lexicographic, so a stable sort on count
  // yields the documented tie order.
  std::stable_sort(report.top.begin(), report.top.end(),
                   [](const PowersetBucket& a, const PowersetBucket& b) {
                     return a.count > b.count;
                   });
  if (report.top.size() > top_m) report.top.resize(top_m);
  return report;
}

ClusterQuality ComputeClusterQuality(const MatrixD& embeddings,
                                     std::span<const int> labels) {
  const Eigen::Index n = embeddings.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw InvalidArgument("embeddings and labels differ in length");
  }
  // Relabel cluster ids densely in ascending order.
  std::vector<int> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto k = static_cast<Eigen::Index>(ids.size());
  if (k < 2) throw InvalidArgument("cluster quality needs at least 2 clusters");
  std::vector<Eigen::Index> member(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    member[i] = std::lower_bound(ids.begin(), ids.end(), labels[i]) - ids.begin();
  }

  const Eigen::Index d = embeddings.cols();
  MatrixD centroids = MatrixD::Zero(k, d);
  std::vector<double> sizes(k, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    centroids.row(member[i]) += embeddings.row(i);
    sizes[member[i]] += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) centroids.row(c) /= sizes[c];
  const Eigen::RowVectorXd grand = embeddings.colwise().mean();

  // Davies-Bouldin.
  std::vector<double> scatter(k, 0.0);
  double within_ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dist = (embeddings.row(i) - centroids.row(member[i])).norm();
    scatter[member[i]] += dist;
    within_ss += dist * dist;
  }
  for (Eigen::Index c = 0; c < k; ++c) scatter[c] /= sizes[c];
  double dbi = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    double worst = 0.0;
    for (Eigen::Index b = 0; b < k; ++b) {
      if (a == b) continue;
      const double sep = (centroids.row(a) - centroids.row(b)).norm();
      // Coincident centroids make the ratio unbounded.
      const double ratio = sep > 0.0 ? (scatter[a] + scatter[b]) / sep
                                     : std::numeric_limits<double>::infinity();
      worst = std::max(worst, ratio);
    }
    dbi += worst;
  }
  dbi /= static_cast<double>(k);

  // Calinski-Harabasz.
  double between_ss = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    between_ss += sizes[c] * (centroids.row(c) - grand).squaredNorm();
  }
  double chi;
  if (n == k) {
    chi = 0.0;
  } else if (within_ss == 0.0) {
    chi = between_ss > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    chi = (between_ss / static_cast<double>(k - 1)) /
          (within_ss / static_cast<double>(n - k));
  }

  // Silhouette.
  if (std::all_of(sizes.begin(), sizes.end(),
                  [](double s) { return s == 1.0; })) {
    throw InvalidArgument("silhouette is undefined when every cluster is a singleton");
  }
  double sil_sum = 0.0;
  std::vector<double> dist_sum(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      dist_sum[member[j]] += (embeddings.row(i) - embeddings.row(j)).norm();
    }
    const Eigen::Index own = member[i];
    if (sizes[own] <= 1.0) continue;
    const double a = dist_sum[own] / (sizes[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      if (c != own) b = std::min(b, dist_sum[c] / sizes[c]);
    }
    const double denom = std::max(a, b);
    sil_sum += denom > 0.0 ? (b - a) / denom : 0.0;
  }

  ClusterQuality q;
  q.dbi = dbi;
  q.chi = chi;
  q.silhouette = sil_sum / static_cast<double>(n);
  return q;
}

TTestResult PairedTTest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("paired samples differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw InvalidArgument("paired t-test needs at least 2 pairs");

  auto mean_std = [n](auto value_at) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += value_at(i);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = value_at(i) - mean;
      ss += dv * dv;
    }
    return std::pair{mean, std::sqrt(ss / static_cast<double>(n - 1))};
  };

  TTestResult r;
  r.n = n;
  std::tie(r.mean_a, r.std_a) = mean_std([&](std::size_t i) { return a[i]; });
  std::tie(r.mean_b, r.std_b) = mean_std([&](std::size_t i) { return b[i]; });
  std::tie(r.mean_diff, r.std_diff) =
      mean_std([&](std::size_t i) { return a[i] - b[i]; });
  if (!(r.std_diff > 0.0)) {
    throw Error(ErrorKind::kNumerical,
                "paired differences have zero variance; t is undefined");
  }
  r.t_value = r.mean_diff * std::sqrt(static_cast<double>(n)) / r.std_diff;
  const double dof = static_cast<double>(n - 1);
  // Two-sided tail of Student's t: I_{dof/(dof+t^2)}(dof/2, 1/2).
  r.p_value = boost::math::ibeta(dof / 2.0, 0.5,
                                 dof / (dof + r.t_value * r.t_value));
  return r;
}

}  // namespace dfprobe
