#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "trajmix/association.hpp"

using namespace trajmix;

namespace {

std::vector<LabeledAssignment> assign(std::initializer_list<std::pair<const char*, int>> xs) {
  std::vector<LabeledAssignment> out;
  for (const auto& [id, c] : xs) out.push_back({id, c});
  return out;
}

}  // namespace

TEST(BuildTable, DirectTally) {
  const auto a = assign({{"a", 1}, {"b", 1}, {"c", 1}, {"d", 2}});
  MembershipColumn col{{"a", std::set<std::string>{"F"}},
                       {"b", std::set<std::string>{"F", "M"}},
                       {"c", std::set<std::string>{"M"}},
                       {"d", std::set<std::string>{"F"}}};
  const auto t = build_table(a, col, 1, "F");
  EXPECT_EQ(t.table, (ContingencyTable2x2{2, 1, 1, 0}));
  EXPECT_EQ(t.coverage.reporting, 4u);
  EXPECT_TRUE(t.coverage.excluded.empty());
}

TEST(BuildTable, NonReportersAreExcluded) {
  const auto a = assign({{"a", 1}, {"b", 2}, {"c", 2}});
  MembershipColumn col{{"a", std::set<std::string>{"F"}}, {"b", std::nullopt}};
  const auto t = build_table(a, col, 2, "F");
  EXPECT_EQ(t.coverage.reporting, 1u);
  EXPECT_EQ(t.coverage.excluded, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(t.table.total(), 1);
}

TEST(BuildTable, EmptyColumnExcludesEveryone) {
  const auto a = assign({{"a", 1}, {"b", 2}});
  MembershipColumn col{{"a", std::nullopt}, {"b", std::nullopt}, {"z", std::set<std::string>{"F"}}};
  const auto t = build_table(a, col, 1, "F");
  EXPECT_EQ(t.coverage.excluded.size(), 2u);
  EXPECT_EQ(t.table.total(), 0);
}

TEST(BuildTable, UnknownClusterOrCovariate) {
  const auto a = assign({{"a", 1}});
  MembershipColumn col{{"a", std::set<std::string>{"F"}}};
  EXPECT_THROW(build_table(a, col, 2, "F"), Error);
  EXPECT_THROW(build_table(a, col, 1, "X"), Error);
}

TEST(BuildTable, MarginsMatchClusterSizeAndPrevalence) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cl(1, 3);
  std::bernoulli_distribution has(0.3), reports(0.8);
  std::vector<LabeledAssignment> a;
  MembershipColumn col;
  for (int i = 0; i < 300; ++i) {
    const std::string id = "p" + std::to_string(i);
    a.push_back({id, cl(rng)});
    if (!reports(rng)) continue;
    std::set<std::string> v;
    if (has(rng)) v.insert("F");
    if (has(rng)) v.insert("M");
    col[id] = v;
  }
  for (int c = 1; c <= 3; ++c) {
    for (const auto& v : {"F", "M"}) {
      const auto t = build_table(a, col, c, v).table;
      std::int64_t in = 0, prev = 0;
      for (const auto& x : a) {
        const auto it = col.find(x.participant);
        if (it == col.end() || !it->second) continue;
        in += x.cluster == c;
        prev += it->second->count(v);
      }
      EXPECT_EQ(t.n11 + t.n21, in);
      EXPECT_EQ(t.n11 + t.n12, prev);
    }
  }
}

TEST(LogOddsRatio, SymmetricTable) {
  const auto r = log_odds_ratio({10, 10, 10, 10});
  EXPECT_NEAR(r.log_or, 0.0, 1e-12);
  EXPECT_NEAR(r.std_error, std::sqrt(0.4), 1e-12);
  EXPECT_NEAR(r.ci_low, -1.96 * std::sqrt(0.4), 1e-12);
  EXPECT_NEAR(r.ci_high, 1.96 * std::sqrt(0.4), 1e-12);
  EXPECT_NEAR(r.ci_high, 1.2397, 1e-4);
}

TEST(LogOddsRatio, LogFour) {
  const auto r = log_odds_ratio({20, 10, 10, 20});
  EXPECT_NEAR(r.log_or, std::log(4.0), 1e-12);
  EXPECT_NEAR(r.std_error, std::sqrt(0.3), 1e-12);
  EXPECT_FALSE(r.corrected);
}

TEST(LogOddsRatio, SwappingRowsNegates) {
  const auto a = log_odds_ratio({13, 7, 22, 41});
  const auto b = log_odds_ratio({22, 41, 13, 7});
  EXPECT_NEAR(a.log_or, -b.log_or, 1e-12);
  EXPECT_NEAR(a.std_error, b.std_error, 1e-15);
}

TEST(LogOddsRatio, ZeroCellPolicy) {
  try {
    log_odds_ratio({5, 0, 3, 4});
    FAIL();
  } catch (const ZeroCellError& e) {
    EXPECT_EQ(e.cell(), "n12");
    EXPECT_EQ(e.code(), Errc::zero_cell);
  }
  const auto r = log_odds_ratio({5, 0, 3, 4}, true);
  EXPECT_TRUE(r.corrected);
  EXPECT_NEAR(r.log_or, oracle::log_or(5.5, 0.5, 3.5, 4.5), 1e-12);
  EXPECT_NEAR(r.std_error, oracle::log_or_se(5.5, 0.5, 3.5, 4.5), 1e-12);
  // No zero cell: the flag changes nothing.
  EXPECT_EQ(log_odds_ratio({5, 1, 3, 4}, true).log_or, log_odds_ratio({5, 1, 3, 4}).log_or);
}

TEST(LogOddsRatio, CoverageOfAsymptoticInterval) {
  // Sample tables from fixed cell probabilities with expected cells >= 20.
  std::mt19937_64 rng(42);
  const std::vector<double> p{0.3, 0.2, 0.15, 0.35};
  const int n = 400;
  const double truth = std::log(p[0] * p[3] / (p[1] * p[2]));
  std::discrete_distribution<int> cell(p.begin(), p.end());
  int covered = 0;
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    std::int64_t c[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) ++c[cell(rng)];
    const auto res = log_odds_ratio({c[0], c[1], c[2], c[3]}, true);
    covered += res.ci_low <= truth && truth <= res.ci_high;
  }
  const double rate = static_cast<double>(covered) / reps;
  EXPECT_GE(rate, 0.93);
  EXPECT_LE(rate, 0.97);
}

TEST(Proportions, SingleClusterIsAllOnes) {
  const auto a = assign({{"a", 1}, {"b", 1}});
  MembershipColumn col{{"a", std::set<std::string>{"F"}}, {"b", std::set<std::string>{"M", "F"}}};
  const auto p = covariate_proportions(a, col);
  for (const auto& r : p.across_clusters) EXPECT_EQ(r.proportion, 1.0);
  ASSERT_EQ(p.within_cluster.size(), 2u);
  EXPECT_EQ(p.within_cluster[0].covariate, "F");
  EXPECT_EQ(p.within_cluster[0].proportion, 1.0);
  EXPECT_EQ(p.within_cluster[1].proportion, 0.5);
}

TEST(Proportions, AcrossClustersSumToOne) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> cl(1, 4);
  std::bernoulli_distribution has(0.4);
  std::vector<LabeledAssignment> a;
  MembershipColumn col;
  for (int i = 0; i < 200; ++i) {
    const std::string id = "p" + std::to_string(i);
    a.push_back({id, cl(rng)});
    std::set<std::string> v;
    for (const char* x : {"A", "B", "C"})
      if (has(rng)) v.insert(x);
    col[id] = v;
  }
  const auto p = covariate_proportions(a, col);
  std::map<std::string, double> sum;
  for (const auto& r : p.across_clusters) sum[r.covariate] += r.proportion;
  for (const auto& [cov, s] : sum) EXPECT_NEAR(s, 1.0, 1e-12) << cov;
}

TEST(Proportions, ClusterWithoutReportersIsFlagged) {
  const auto a = assign({{"a", 1}, {"b", 2}});
  MembershipColumn col{{"a", std::set<std::string>{"F"}}, {"b", std::nullopt}};
  const auto p = covariate_proportions(a, col);
  const auto& row = p.within_cluster[1];
  EXPECT_EQ(row.cluster, 2);
  EXPECT_TRUE(row.no_reporters);
  EXPECT_EQ(row.proportion, 0.0);
}

TEST(GroupSummary, MeanAndResponseRate) {
  const auto a = assign({{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}, {"e", 2}});
  NumericColumn age{{"a", 40.0}, {"b", 50.0}, {"c", std::nullopt}, {"d", 60.0}, {"e", std::nullopt}};
  const auto rows = group_summary(a, age);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].cluster, 0);
  EXPECT_EQ(rows[1].cluster, 1);
  EXPECT_DOUBLE_EQ(*rows[1].mean, 50.0);
  EXPECT_DOUBLE_EQ(rows[1].response_rate, 75.0);
  EXPECT_FALSE(rows[2].mean.has_value());
  EXPECT_EQ(rows[2].response_rate, 0.0);
  EXPECT_DOUBLE_EQ(*rows[0].mean, 50.0);
  EXPECT_DOUBLE_EQ(rows[0].response_rate, 60.0);
}

TEST(GroupSummary, Grouped) {
  const auto a = assign({{"a", 1}, {"b", 1}, {"c", 2}});
  NumericColumn v{{"a", 1.0}, {"b", 3.0}, {"c", 5.0}};
  TextColumn g{{"a", "f"}, {"b", "m"}, {"c", "f"}};
  const auto rows = group_summary(a, v, &g);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].group, "f");
  EXPECT_DOUBLE_EQ(*rows[0].mean, 3.0);
  EXPECT_EQ(rows[5].group, "m");
  EXPECT_EQ(rows[5].cluster, 2);
  EXPECT_EQ(rows[5].participants, 0u);
}
