#pragma once

// Brute-force reference implementations: pairwise comparison and full
// threshold scans, quadratic on purpose.

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

namespace oracle {

inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  uint64_t gt = 0, eq = 0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n) ++gt;
      if (p == n) ++eq;
    }
  return static_cast<double>(2 * gt + eq) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline std::vector<double> thresholds_desc(const std::vector<double>& pos,
                                           const std::vector<double>& neg) {
  std::set<double> s(pos.begin(), pos.end());
  s.insert(neg.begin(), neg.end());
  return {s.rbegin(), s.rend()};
}

inline uint64_t count_at_least(const std::vector<double>& v, double t) {
  uint64_t c = 0;
  for (double x : v) c += x >= t;
  return c;
}

inline double aupr(const std::vector<double>& pos, const std::vector<double>& neg) {
  const double P = static_cast<double>(pos.size());
  double ap = 0.0;
  uint64_t prev = 0;
  for (double t : thresholds_desc(pos, neg)) {
    const uint64_t tp = count_at_least(pos, t);
    const uint64_t fp = count_at_least(neg, t);
    if (tp > prev)
      ap += static_cast<double>(tp - prev) / P *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    prev = tp;
  }
  return ap;
}

inline double fpr_at_tpr(const std::vector<double>& pos, const std::vector<double>& neg,
                         double target) {
  const double P = static_cast<double>(pos.size());
  const double N = static_cast<double>(neg.size());
  double best = 2.0;
  for (double t : thresholds_desc(pos, neg)) {
    const double tpr = static_cast<double>(count_at_least(pos, t)) / P;
    const double fpr = static_cast<double>(count_at_least(neg, t)) / N;
    if (tpr >= target) best = std::min(best, fpr);
  }
  return best;
}

inline double f1(const std::vector<double>& pos, const std::vector<double>& neg, double t) {
  uint64_t tp = 0, fp = 0, fn = 0;
  for (double p : pos) (p > t ? tp : fn) += 1;
  for (double n : neg) fp += n > t;
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace oracle
