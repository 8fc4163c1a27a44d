#include <gtest/gtest.h>

#include <random>

#include "hardneg/metrics.hpp"
#include "oracles/metrics_oracle.hpp"

using namespace hardneg;
using namespace hardneg::metrics;
using V = std::vector<double>;

namespace {

/// Scores drawn from a small grid so ties are common.
V random_scores(std::mt19937_64& rng, size_t n, int levels) {
  std::uniform_int_distribution<int> d(0, levels);
  V v(n);
  for (auto& x : v) x = d(rng) / static_cast<double>(levels);
  return v;
}

}  // namespace

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(V{0.9, 0.8}, V{0.1, 0.2}), 1.0);
  EXPECT_EQ(auroc(V{0.5}, V{0.5}), 0.5);
  EXPECT_DOUBLE_EQ(auroc(V{0.9, 0.4, 0.6}, V{0.5, 0.3}), 5.0 / 6.0);
  EXPECT_EQ(auroc(V{0.9, 0.4, 0.6}, V{0.5, 0.3}), oracle::auroc({0.9, 0.4, 0.6}, {0.5, 0.3}));
}

TEST(Auroc, EmptyOrNonFiniteIsArgumentError) {
  EXPECT_THROW(auroc(V{}, V{1.0}), ArgumentError);
  EXPECT_THROW(auroc(V{1.0}, V{}), ArgumentError);
  EXPECT_THROW(auroc(V{NAN}, V{1.0}), ArgumentError);
  EXPECT_THROW(aupr(V{}, V{1.0}), ArgumentError);
  EXPECT_THROW(fpr_at_tpr(V{1.0}, V{}), ArgumentError);
  EXPECT_THROW(fpr_at_tpr(V{1.0}, V{0.0}, 0.0), ArgumentError);
}

TEST(Aupr, Examples) {
  EXPECT_EQ(aupr(V{1.0}, V{0.0}), 1.0);
  EXPECT_DOUBLE_EQ(aupr(V{0.3, 0.5, 0.7}, V{0.3, 0.5, 0.7}), 0.5);
  EXPECT_DOUBLE_EQ(aupr(V{0.2, 0.2}, V{0.2, 0.2, 0.2}), 0.4);
  const double v = aupr(V{0.9, 0.4}, V{0.6});
  EXPECT_EQ(v, oracle::aupr({0.9, 0.4}, {0.6}));
  EXPECT_NEAR(v, 0.5 + 0.5 * 2.0 / 3.0, 1e-15);
}

TEST(FprAtTpr, Examples) {
  EXPECT_EQ(fpr_at_tpr(V{1.0, 1.0}, V{0.0, 0.0}), 0.0);
  EXPECT_EQ(fpr_at_tpr(V{3, 2, 1}, V{2.5}, 0.95), 1.0);
  EXPECT_EQ(fpr_at_tpr(V{3, 2, 1}, V{2.5}, 0.6), 1.0);
  EXPECT_EQ(fpr_at_tpr(V{3, 2, 1}, V{2.5}, 0.3), 0.0);
  V same{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_EQ(fpr_at_tpr(same, same), oracle::fpr_at_tpr(same, same, 0.95));
  EXPECT_EQ(fpr_at_tpr(same, same), 1.0);
}

TEST(F1Sweep, Examples) {
  const V t05{0.5};
  EXPECT_EQ(f1_sweep(V{0.9, 0.9}, V{0.1, 0.1}, t05)[0].f1, 1.0);
  EXPECT_EQ(f1_sweep(V{0.6}, V{0.7}, V{0.65})[0].f1, 0.0);
  EXPECT_DOUBLE_EQ(f1_sweep(V{0.8, 0.6}, V{0.7}, t05)[0].f1, 0.8);
  // strictly greater: a score equal to the threshold is predicted OOS
  EXPECT_EQ(f1_sweep(V{0.5}, V{0.1}, t05)[0].f1, 0.0);
}

TEST(F1Sweep, DefaultGridAndValidation) {
  const auto g = default_f1_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_EQ(g.front(), 0.5);
  EXPECT_EQ(g.back(), 0.95);
  for (size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_THROW(f1_sweep(V{1}, V{0}, V{}), ArgumentError);
  EXPECT_THROW(f1_sweep(V{1}, V{0}, V{0.6, 0.5}), ArgumentError);
}

TEST(Oracle, RandomInstancesMatchExactly) {
  std::mt19937_64 rng(2023);
  const auto grid = default_f1_grid();
  for (int i = 0; i < 1000; ++i) {
    const size_t p = 1 + rng() % 50, n = 1 + rng() % 50;
    const int levels = 1 + static_cast<int>(rng() % 20);
    const V pos = random_scores(rng, p, levels), neg = random_scores(rng, n, levels);
    ASSERT_EQ(auroc(pos, neg), oracle::auroc(pos, neg)) << i;
    ASSERT_EQ(aupr(pos, neg), oracle::aupr(pos, neg)) << i;
    ASSERT_EQ(fpr_at_tpr(pos, neg), oracle::fpr_at_tpr(pos, neg, 0.95)) << i;
    const auto sweep = f1_sweep(pos, neg, grid);
    for (size_t k = 0; k < grid.size(); ++k)
      ASSERT_EQ(sweep[k].f1, oracle::f1(pos, neg, grid[k])) << i;
  }
}

TEST(Properties, ComplementAndMonotoneTransform) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const V pos = random_scores(rng, 1 + rng() % 40, 10);
    const V neg = random_scores(rng, 1 + rng() % 40, 10);
    EXPECT_DOUBLE_EQ(auroc(pos, neg) + auroc(neg, pos), 1.0);
    V tp = pos, tn = neg;
    for (auto& x : tp) x = std::exp(3 * x) - 7;
    for (auto& x : tn) x = std::exp(3 * x) - 7;
    EXPECT_EQ(auroc(tp, tn), auroc(pos, neg));
    EXPECT_EQ(fpr_at_tpr(tp, tn), fpr_at_tpr(pos, neg));
    EXPECT_EQ(aupr(tp, tn), aupr(pos, neg));
    for (double m : {auroc(pos, neg), aupr(pos, neg), fpr_at_tpr(pos, neg)}) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
    }
  }
}

TEST(Report, WellSeparated) {
  ReportMeta meta;
  meta.dataset = "Clinc-150";
  auto r = build_report(V{0.9, 0.95, 0.99}, V{0.1, 0.2}, meta);
  EXPECT_EQ(r.auroc, 1.0);
  EXPECT_EQ(r.fpr95, 0.0);
  EXPECT_EQ(r.aupr, 1.0);
  EXPECT_EQ(r.positives, 3u);
  EXPECT_EQ(r.negatives, 2u);
  EXPECT_EQ(r.f1_sweep.size(), 10u);
  EXPECT_EQ(r.f1_sweep[0], (SweepPoint{0.5, 1.0}));
}

TEST(Report, SwappedInputsComplementAuroc) {
  ReportMeta meta;
  auto a = build_report(V{0.9, 0.4, 0.6}, V{0.5, 0.3}, meta);
  auto b = build_report(V{0.5, 0.3}, V{0.9, 0.4, 0.6}, meta);
  EXPECT_DOUBLE_EQ(a.auroc, 1.0 - b.auroc);
}

TEST(Report, SplitsByGoldScopeAndSerializes) {
  using scoring::GoldScope;
  std::vector<scoring::ScoredPrediction> s = {{"a", GoldScope::kIns, 0.9},
                                              {"b", GoldScope::kIns, 0.8},
                                              {"c", GoldScope::kOosGeneral, 0.3},
                                              {"d", GoldScope::kOosHardNegative, 0.85}};
  ReportMeta meta;
  meta.dataset = "toy";
  auto reps = reports_for(s, meta);
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_EQ(reps[0].oos_set, OosSet::kGeneral);
  EXPECT_EQ(reps[0].auroc, 1.0);
  EXPECT_EQ(reps[1].oos_set, OosSet::kHardNegative);
  EXPECT_EQ(reps[1].auroc, 0.5);

  const auto j = report_to_json(reps[1]);
  const auto back = report_from_json(j, "mem");
  EXPECT_EQ(report_to_json(back), j);

  const auto table = report_table(reps);
  EXPECT_NE(table.find("AUROC"), std::string::npos);
  EXPECT_NE(table.find("1.000"), std::string::npos);
  EXPECT_NE(table.find("0.500"), std::string::npos);
  EXPECT_EQ(sweep_csv(reps[0]).substr(0, 30), "threshold,f1\n0.50,1.000000\n0.5");

  EXPECT_THROW(reports_for({{"a", GoldScope::kIns, 0.9}}, meta), ArgumentError);
}
