#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hardneg/error.hpp"
#include "hardneg/scoring.hpp"
#include "hardneg/util.hpp"

namespace hardneg::metrics {

// In-scope scores are the positive class throughout.

namespace detail {

inline void check(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty())
    throw ArgumentError("metrics need non-empty positive and negative score sets");
  for (double v : pos)
    if (!std::isfinite(v)) throw ArgumentError("non-finite positive score");
  for (double v : neg)
    if (!std::isfinite(v)) throw ArgumentError("non-finite negative score");
}

/// Groups of equal score in descending order, with per-group class counts.
struct Group {
  double score;
  uint64_t pos = 0;
  uint64_t neg = 0;
};

inline std::vector<Group> descending_groups(std::span<const double> pos,
                                            std::span<const double> neg) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(pos.size() + neg.size());
  for (double v : pos) all.emplace_back(v, true);
  for (double v : neg) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Group> groups;
  for (const auto& [v, is_pos] : all) {
    if (groups.empty() || groups.back().score != v) groups.push_back({v});
    (is_pos ? groups.back().pos : groups.back().neg) += 1;
  }
  return groups;
}

}  // namespace detail

/// P(pos > neg) + 0.5 P(pos = neg).
inline double auroc(std::span<const double> pos, std::span<const double> neg) {
  detail::check(pos, neg);
  // Twice the Mann-Whitney U, kept integral so ties stay exact.
  uint64_t twice_u = 0;
  uint64_t neg_below = 0;
  const auto groups = detail::descending_groups(pos, neg);
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    twice_u += it->pos * (2 * neg_below + it->neg);
    neg_below += it->neg;
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Average precision over tie-grouped cut points: sum of dRecall * Precision.
inline double aupr(std::span<const double> pos, std::span<const double> neg) {
  detail::check(pos, neg);
  const double P = static_cast<double>(pos.size());
  uint64_t tp = 0, fp = 0;
  double ap = 0.0;
  for (const auto& g : detail::descending_groups(pos, neg)) {
    const uint64_t prev_tp = tp;
    tp += g.pos;
    fp += g.neg;
    if (tp == prev_tp) continue;
    ap += static_cast<double>(tp - prev_tp) / P *
          (static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return ap;
}

/// Smallest FPR among thresholds t (predict in-scope when score >= t) whose
/// TPR reaches `target_tpr`.
inline double fpr_at_tpr(std::span<const double> pos, std::span<const double> neg,
                         double target_tpr = 0.95) {
  detail::check(pos, neg);
  if (!(target_tpr > 0.0 && target_tpr <= 1.0))
    throw ArgumentError("target TPR must be in (0, 1]");
  const double P = static_cast<double>(pos.size());
  const double N = static_cast<double>(neg.size());
  uint64_t tp = 0, fp = 0;
  for (const auto& g : detail::descending_groups(pos, neg)) {
    tp += g.pos;
    fp += g.neg;
    // FPR only grows as t falls, so the first qualifying cut is the minimum.
    if (static_cast<double>(tp) / P >= target_tpr) return static_cast<double>(fp) / N;
  }
  return 1.0;  // unreachable: the lowest cut has TPR 1
}

struct SweepPoint {
  double threshold;
  double f1;
  bool operator==(const SweepPoint&) const = default;
};

/// 0.50, 0.55, ..., 0.95
inline std::vector<double> default_f1_grid() {
  std::vector<double> g;
  for (int i = 0; i < 10; ++i) g.push_back((50 + 5 * i) / 100.0);
  return g;
}

/// F1 with in-scope positive, predicting in-scope when score > t.
inline double f1_at(std::span<const double> pos, std::span<const double> neg, double t) {
  uint64_t tp = 0, fp = 0;
  for (double v : pos) tp += v > t;
  for (double v : neg) fp += v > t;
  const uint64_t fn = pos.size() - tp;
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

inline std::vector<SweepPoint> f1_sweep(std::span<const double> pos,
                                        std::span<const double> neg,
                                        std::span<const double> thresholds) {
  detail::check(pos, neg);
  if (thresholds.empty()) throw ArgumentError("F1 sweep needs at least one threshold");
  for (size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw ArgumentError("F1 sweep thresholds must be strictly increasing");
  // Sort once and count with binary search.
  std::vector<double> sp(pos.begin(), pos.end()), sn(neg.begin(), neg.end());
  std::sort(sp.begin(), sp.end());
  std::sort(sn.begin(), sn.end());
  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    const uint64_t tp = static_cast<uint64_t>(sp.end() - std::upper_bound(sp.begin(), sp.end(), t));
    const uint64_t fp = static_cast<uint64_t>(sn.end() - std::upper_bound(sn.begin(), sn.end(), t));
    const uint64_t fn = sp.size() - tp;
    const double f1 =
        tp == 0 ? 0.0
                : static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    out.push_back({t, f1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

enum class OosSet { kGeneral, kHardNegative };

inline std::string_view to_string(OosSet s) {
  return s == OosSet::kGeneral ? "general" : "hard_negative";
}

struct EvalReport {
  std::string dataset;
  scoring::ScoreFunction function = scoring::ScoreFunction::kSoftmax;
  OosSet oos_set = OosSet::kGeneral;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  std::vector<SweepPoint> f1_sweep;
  uint64_t positives = 0;
  uint64_t negatives = 0;
};

struct ReportMeta {
  std::string dataset;
  scoring::ScoreFunction function = scoring::ScoreFunction::kSoftmax;
  OosSet oos_set = OosSet::kGeneral;
  std::vector<double> thresholds = default_f1_grid();
  double target_tpr = 0.95;
};

inline EvalReport build_report(std::span<const double> ins, std::span<const double> oos,
                               const ReportMeta& meta) {
  EvalReport r;
  r.dataset = meta.dataset;
  r.function = meta.function;
  r.oos_set = meta.oos_set;
  r.auroc = auroc(ins, oos);
  r.aupr = aupr(ins, oos);
  r.fpr95 = fpr_at_tpr(ins, oos, meta.target_tpr);
  r.f1_sweep = f1_sweep(ins, oos, meta.thresholds);
  r.positives = ins.size();
  r.negatives = oos.size();
  return r;
}

/// Splits scored predictions by gold scope and builds one report per OOS set
/// that has at least one example.
inline std::vector<EvalReport> reports_for(const std::vector<scoring::ScoredPrediction>& scored,
                                           ReportMeta meta) {
  std::vector<double> ins, general, hard;
  for (const auto& s : scored) {
    switch (s.gold_scope) {
      case scoring::GoldScope::kIns: ins.push_back(s.score); break;
      case scoring::GoldScope::kOosGeneral: general.push_back(s.score); break;
      case scoring::GoldScope::kOosHardNegative: hard.push_back(s.score); break;
    }
  }
  if (ins.empty()) throw ArgumentError("no in-scope predictions to evaluate");
  if (general.empty() && hard.empty()) throw ArgumentError("no out-of-scope predictions to evaluate");
  std::vector<EvalReport> out;
  if (!general.empty()) {
    meta.oos_set = OosSet::kGeneral;
    out.push_back(build_report(ins, general, meta));
  }
  if (!hard.empty()) {
    meta.oos_set = OosSet::kHardNegative;
    out.push_back(build_report(ins, hard, meta));
  }
  return out;
}

inline Json report_to_json(const EvalReport& r) {
  Json j;
  j["dataset"] = r.dataset;
  j["score_function"] = scoring::to_string(r.function);
  j["oos_set"] = to_string(r.oos_set);
  j["auroc"] = r.auroc;
  j["aupr"] = r.aupr;
  j["fpr95"] = r.fpr95;
  j["positives"] = r.positives;
  j["negatives"] = r.negatives;
  Json sweep = Json::array();
  for (const auto& p : r.f1_sweep) sweep.push_back(Json::array({p.threshold, p.f1}));
  j["f1_sweep"] = std::move(sweep);
  return j;
}

inline EvalReport report_from_json(const Json& j, const std::string& where) {
  EvalReport r;
  r.dataset = require_string(j, "dataset", where);
  r.function = scoring::parse_score_function(require_string(j, "score_function", where));
  const auto set = require_string(j, "oos_set", where);
  if (set != "general" && set != "hard_negative")
    throw ParseError(where + ": unknown oos_set '" + set + "'");
  r.oos_set = set == "general" ? OosSet::kGeneral : OosSet::kHardNegative;
  try {
    r.auroc = j.at("auroc").get<double>();
    r.aupr = j.at("aupr").get<double>();
    r.fpr95 = j.at("fpr95").get<double>();
    r.positives = j.at("positives").get<uint64_t>();
    r.negatives = j.at("negatives").get<uint64_t>();
    for (const auto& p : j.at("f1_sweep"))
      r.f1_sweep.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  return r;
}

inline std::string sweep_csv(const EvalReport& r) {
  std::string out = "threshold,f1\n";
  char buf[64];
  for (const auto& p : r.f1_sweep) {
    std::snprintf(buf, sizeof buf, "%.2f,%.6f\n", p.threshold, p.f1);
    out += buf;
  }
  return out;
}

/// One row per (dataset, score function); AUROC, AUPR, FPR95, each for the
/// general and the hard-negative OOS set. Missing cells print as "-".
inline std::string report_table(const std::vector<EvalReport>& reports) {
  struct Row {
    std::string dataset;
    scoring::ScoreFunction fn;
    const EvalReport* cell[2] = {nullptr, nullptr};
  };
  std::vector<Row> rows;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& row) {
      return row.dataset == r.dataset && row.fn == r.function;
    });
    if (it == rows.end()) {
      rows.push_back({r.dataset, r.function});
      it = rows.end() - 1;
    }
    it->cell[r.oos_set == OosSet::kGeneral ? 0 : 1] = &r;
  }
  size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.dataset.size());
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-*s  %-8s  %-17s  %-17s  %-17s\n", static_cast<int>(width),
                "", "", "AUROC", "AUPR", "FPR95");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-*s  %-8s  %7s  %7s  %7s  %7s  %7s  %7s\n",
                static_cast<int>(width), "Dataset", "Score", "Gen", "HN", "Gen", "HN", "Gen",
                "HN");
  out += buf;
  auto cell = [](const EvalReport* r, double EvalReport::*field) {
    if (!r) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", r->*field);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-8s  %7s  %7s  %7s  %7s  %7s  %7s\n",
                  static_cast<int>(width), r.dataset.c_str(),
                  std::string(scoring::to_string(r.fn)).c_str(),
                  cell(r.cell[0], &EvalReport::auroc).c_str(),
                  cell(r.cell[1], &EvalReport::auroc).c_str(),
                  cell(r.cell[0], &EvalReport::aupr).c_str(),
                  cell(r.cell[1], &EvalReport::aupr).c_str(),
                  cell(r.cell[0], &EvalReport::fpr95).c_str(),
                  cell(r.cell[1], &EvalReport::fpr95).c_str());
    out += buf;
  }
  return out;
}

}  // namespace hardneg::metrics
