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

#ifndef DFPROBE_METRICS_H_
#define DFPROBE_METRICS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfprobe/common.h"

namespace dfprobe {

// Multi-label metric bundle. All fractions lie in [0, 1].
struct EvalResult {
  double mAP = 0.0;
  double CP = 0.0;
  double CR = 0.0;
  double CF1 = 0.0;
  double OP = 0.0;
  double OR = 0.0;
  double OF1 = 0.0;
  std::optional<double> top1;
  std::optional<double> top5;
  std::optional<double> error_rate;
  // NaN for classes without positives (excluded from mAP).
  std::vector<double> per_class_AP;
  std::vector<double> per_class_F1;
  // Classes without positives in the ground truth.
  std::vector<int> classes_without_positives;
  // Classes whose thresholded precision or recall had an empty denominator
  // and were scored as 0.
  std::vector<int> classes_with_empty_denominator;
};

// Column order used for every emitted metric row.
inline constexpr const char* kEvalColumns = "mAP,CP,CR,CF1,OP,OR,OF1";
// Formats the seven headline metrics in percent with two decimals.
std::string FormatEvalRow(const EvalResult& r);

// Exact all-points average precision of one class. Ties in score keep the
// original sample order. Returns NaN when the class has no positives.
double AveragePrecision(std::span<const double> scores,
                        std::span<const std::uint8_t> truth);

// scores and truth are N x K; truth must be 0/1. A sample is predicted
// positive for a class when its score is >= threshold.
EvalResult Evaluate(const MatrixD& scores, const MatrixD& truth,
                    double threshold = 0.5);

// Fraction of rows whose true class ranks within the top k. Ties rank the
// lower class index first.
double TopKAccuracy(const MatrixD& scores, std::span<const int> truth_class,
                    int k);
double ErrorRate(const MatrixD& scores, std::span<const int> truth_class);

using LabelSet = std::vector<int>;  // sorted, unique

struct PowersetBucket {
  LabelSet labels;
  std::int64_t count = 0;
  std::int64_t exact_matches = 0;
  double accuracy = 0.0;
};

struct PowersetReport {
  std::int64_t total = 0;
  std::size_t distinct = 0;
  // Sorted by count descending, then label set ascending; at most top_m.
  std::vector<PowersetBucket> top;
};

PowersetReport MakePowersetReport(const std::vector<LabelSet>& predicted,
                                  const std::vector<LabelSet>& truth,
                                  std::size_t top_m = 80);

// Converts a score row into the set of classes at or above threshold.
std::vector<LabelSet> ThresholdSets(const MatrixD& scores, double threshold);
std::vector<LabelSet> TruthSets(const MatrixD& truth);

struct ClusterQuality {
  double dbi = 0.0;
  double chi = 0.0;
  double silhouette = 0.0;
};

// Davies-Bouldin, Calinski-Harabasz and mean silhouette on Euclidean
// distance. Points in singleton clusters get silhouette 0; an input made
// only of singletons is rejected.
ClusterQuality ComputeClusterQuality(const MatrixD& embeddings,
                                     std::span<const int> labels);

struct TTestResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double std_a = 0.0;
  double std_b = 0.0;
  double mean_diff = 0.0;
  double std_diff = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
};

// Paired t-test on a - b. Throws for n < 2 or zero-variance differences.
TTestResult PairedTTest(std::span<const double> a, std::span<const double> b);

}  // namespace dfprobe

#endif  // DFPROBE_METRICS_H_
