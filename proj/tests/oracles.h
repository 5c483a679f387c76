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

// Slow, obviously-correct reference implementations used to cross-check the
// library. Nothing here shares code with src/.

#ifndef DFPROBE_TESTS_ORACLES_H_
#define DFPROBE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dfprobe/common.h"
#include "dfprobe/metrics.h"

namespace dfprobe::oracle {

// Rank of item i (1-based) when sorting by score descending, ties by index.
inline int Rank(const std::vector<double>& s, int i) {
  int r = 1;
  for (int j = 0; j < static_cast<int>(s.size()); ++j) {
    if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
  }
  return r;
}

// AP as the mean, over positives, of precision at that positive's rank.
inline double AveragePrecision(const std::vector<double>& s, const std::vector<int>& y) {
  const int n = static_cast<int>(s.size());
  int positives = 0;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!y[i]) continue;
    ++positives;
    const int ri = Rank(s, i);
    int hits = 0;
    for (int j = 0; j < n; ++j) hits += y[j] && Rank(s, j) <= ri;
    total += static_cast<double>(hits) / ri;
  }
  return positives ? total / positives : std::numeric_limits<double>::quiet_NaN();
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

inline double F1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

inline EvalResult Evaluate(const MatrixD& scores, const MatrixD& truth, double thr) {
  const int n = static_cast<int>(scores.rows()), k = static_cast<int>(scores.cols());
  EvalResult r;
  std::vector<Counts> per(k);
  Counts all;
  double map = 0;
  int used = 0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = scores(i, c);
      y[i] = truth(i, c) > 0.5;
      const bool pred = !(scores(i, c) < thr);
      if (pred && y[i]) ++per[c].tp;
      if (pred && !y[i]) ++per[c].fp;
      if (!pred && y[i]) ++per[c].fn;
    }
    const double ap = AveragePrecision(s, y);
    r.per_class_AP.push_back(ap);
    if (!std::isnan(ap)) {
      map += ap;
      ++used;
    }
    all.tp += per[c].tp;
    all.fp += per[c].fp;
    all.fn += per[c].fn;
  }
  r.mAP = map / used;
  double cp = 0, cr = 0;
  for (int c = 0; c < k; ++c) {
    const double p = per[c].tp + per[c].fp ? double(per[c].tp) / (per[c].tp + per[c].fp) : 0.0;
    const double q = per[c].tp + per[c].fn ? double(per[c].tp) / (per[c].tp + per[c].fn) : 0.0;
    cp += p;
    cr += q;
    r.per_class_F1.push_back(F1(p, q));
  }
  r.CP = cp / k;
  r.CR = cr / k;
  r.CF1 = F1(r.CP, r.CR);
  r.OP = all.tp + all.fp ? double(all.tp) / (all.tp + all.fp) : 0.0;
  r.OR = all.tp + all.fn ? double(all.tp) / (all.tp + all.fn) : 0.0;
  r.OF1 = F1(r.OP, r.OR);
  return r;
}

inline double TopK(const MatrixD& scores, const std::vector<int>& truth, int k) {
  int hits = 0;
  for (int i = 0; i < scores.rows(); ++i) {
    std::vector<int> order(scores.cols());
    for (int c = 0; c < scores.cols(); ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::make_tuple(-scores(i, a), a) < std::make_tuple(-scores(i, b), b);
    });
    hits += std::find(order.begin(), order.begin() + k, truth[i]) != order.begin() + k;
  }
  return static_cast<double>(hits) / truth.size();
}

inline PowersetReport Powerset(const std::vector<LabelSet>& pred, const std::vector<LabelSet>& truth,
                               std::size_t top_m) {
  std::vector<PowersetBucket> buckets;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    PowersetBucket* b = nullptr;
    for (auto& x : buckets) {
      if (x.labels == truth[i]) b = &x;
    }
    if (!b) {
      buckets.push_back({truth[i], 0, 0, 0.0});
      b = &buckets.back();
    }
    ++b->count;
    b->exact_matches += pred[i] == truth[i];
  }
  for (auto& b : buckets) b.accuracy = double(b.exact_matches) / b.count;
  std::sort(buckets.begin(), buckets.end(), [](const PowersetBucket& a, const PowersetBucket& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.labels < b.labels;
  });
  PowersetReport r;
  r.total = static_cast<std::int64_t>(truth.size());
  r.distinct = buckets.size();
  if (buckets.size() > top_m) buckets.resize(top_m);
  r.top = buckets;
  return r;
}

inline double Dist(const MatrixD& x, int i, int j) {
  double s = 0;
  for (int c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
  return std::sqrt(s);
}

inline ClusterQuality Cluster(const MatrixD& x, const std::vector<int>& labels) {
  const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
  std::vector<int> ids = labels;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const int k = static_cast<int>(ids.size());
  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) {
    members[std::find(ids.begin(), ids.end(), labels[i]) - ids.begin()].push_back(i);
  }
  MatrixD cen = MatrixD::Zero(k, d);
  for (int c = 0; c < k; ++c) {
    for (int i : members[c]) cen.row(c) += x.row(i);
    cen.row(c) /= members[c].size();
  }
  auto cdist = [&](int a, int b) { return (cen.row(a) - cen.row(b)).norm(); };
  std::vector<double> s(k, 0);
  for (int c = 0; c < k; ++c) {
    for (int i : members[c]) s[c] += (x.row(i) - cen.row(c)).norm();
    s[c] /= members[c].size();
  }
  ClusterQuality q;
  for (int a = 0; a < k; ++a) {
    double worst = 0;
    for (int b = 0; b < k; ++b) {
      if (b != a) worst = std::max(worst, (s[a] + s[b]) / cdist(a, b));
    }
    q.dbi += worst / k;
  }
  // CHI from the total-scatter decomposition: between = total - within.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  double total = 0, within = 0;
  for (int i = 0; i < n; ++i) total += (x.row(i) - mean).squaredNorm();
  for (int c = 0; c < k; ++c) {
    for (int i : members[c]) within += (x.row(i) - cen.row(c)).squaredNorm();
  }
  q.chi = ((total - within) / (k - 1)) / (within / (n - k));
  double sil = 0;
  for (int c = 0; c < k; ++c) {
    for (int i : members[c]) {
      if (members[c].size() == 1) continue;
      double a = 0;
      for (int j : members[c]) a += j == i ? 0 : Dist(x, i, j);
      a /= members[c].size() - 1;
      double b = std::numeric_limits<double>::infinity();
      for (int o = 0; o < k; ++o) {
        if (o == c) continue;
        double m = 0;
        for (int j : members[o]) m += Dist(x, i, j);
        b = std::min(b, m / members[o].size());
      }
      sil += (b - a) / std::max(a, b);
    }
  }
  q.silhouette = sil / n;
  return q;
}

// t statistic and two-sided p from the Student-t distribution object.
inline std::pair<double, double> PairedT(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  double md = 0;
  for (int i = 0; i < n; ++i) md += (a[i] - b[i]) / n;
  double v = 0;
  for (int i = 0; i < n; ++i) v += (a[i] - b[i] - md) * (a[i] - b[i] - md) / (n - 1);
  const double t = md / std::sqrt(v / n);
  boost::math::students_t dist(n - 1);
  return {t, 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))};
}

// Central finite difference of f with respect to every entry of m. The
// entry is perturbed in place and restored.
template <typename M>
M NumericGradient(M& m, const std::function<double()>& f, double h = 1e-6) {
  M g(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f();
    m.data()[i] = keep - h;
    const double down = f();
    m.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - b|| / (||a|| + ||b||), Frobenius norms.
template <typename A, typename B>
double RelativeError(const A& analytic, const B& numeric) {
  const double diff = (analytic - numeric).norm();
  const double scale = std::max(analytic.norm() + numeric.norm(), 1e-8);
  return diff / scale;
}

}  // namespace dfprobe::oracle

#endif  // DFPROBE_TESTS_ORACLES_H_
