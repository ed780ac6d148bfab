#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "trajmix/residuals.hpp"

using namespace trajmix;
using testing_support::to_counts;

TEST(Model1, TwoStatesReproducesCounts) {
  const auto y = to_counts({{8, 2}, {1, 9}});
  const auto fit = fit_model1(y);
  EXPECT_DOUBLE_EQ(*fit.stay[0], 0.8);
  EXPECT_DOUBLE_EQ(*fit.stay[1], 0.9);
  EXPECT_NEAR(fit.expected(0, 0), 8, 1e-12);
  EXPECT_NEAR(fit.expected(0, 1), 2, 1e-12);
  EXPECT_NEAR(fit.expected(1, 0), 1, 1e-12);
  EXPECT_NEAR(fit.expected(1, 1), 9, 1e-12);
}

TEST(Model1, UniformOffDiagonalRow) {
  const auto y = to_counts({{6, 2, 2}, {1, 1, 1}, {0, 0, 3}});
  const auto fit = fit_model1(y);
  EXPECT_DOUBLE_EQ(*fit.stay[0], 0.6);
  EXPECT_NEAR(fit.probabilities(0, 1), 0.2, 1e-15);
  EXPECT_NEAR(fit.probabilities(0, 2), 0.2, 1e-15);
  const auto r = pearson_residuals(y, fit);
  for (Index j = 0; j < 3; ++j) EXPECT_NEAR(r.residuals(0, j), 0.0, 1e-12);
}

TEST(Model1, NonUniformOffDiagonalMisfits) {
  const auto y = to_counts({{6, 4, 0}, {1, 1, 1}, {1, 1, 1}});
  const auto fit = fit_model1(y);
  EXPECT_NEAR(fit.expected(0, 0), 6, 1e-12);
  EXPECT_NEAR(fit.expected(0, 1), 2, 1e-12);
  EXPECT_NEAR(fit.expected(0, 2), 2, 1e-12);
  const auto r = pearson_residuals(y, fit);
  EXPECT_NEAR(r.residuals(0, 1), 2 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.residuals(0, 2), -2 / std::sqrt(2.0), 1e-12);
}

TEST(Model1, EmptyRowIsUndefined) {
  const auto y = to_counts({{0, 0}, {3, 1}});
  const auto fit = fit_model1(y);
  EXPECT_FALSE(fit.row_defined(0));
  const auto r = pearson_residuals(y, fit);
  EXPECT_FALSE(r.defined(0, 0));
  EXPECT_TRUE(std::isnan(r.residuals(0, 1)));
  EXPECT_EQ(r.defined_cells, 2u);
}

TEST(Model1, RowSumsAndExpectedTotals) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> c(0, 50);
  for (int rep = 0; rep < 50; ++rep) {
    oracle::IMat y(25, std::vector<std::int64_t>(25));
    for (auto& row : y)
      for (auto& v : row) v = c(rng);
    const auto fit = fit_model1(to_counts(y));
    for (Index i = 0; i < 25; ++i) {
      EXPECT_NEAR(fit.probabilities.row(i).sum(), 1.0, 1e-12);
      EXPECT_NEAR(fit.expected.row(i).sum(), fit.row_totals(i), 1e-9 * fit.row_totals(i));
    }
  }
}

TEST(Model1, NeedsTwoStates) { EXPECT_THROW(fit_model1(to_counts({{3}})), Error); }

TEST(Model2, AllMassOnSelf) {
  oracle::IMat y(4, std::vector<std::int64_t>(4, 1));
  y[0] = {5, 0, 0, 0};
  const auto fit = fit_model2(to_counts(y), {2, 2});
  EXPECT_DOUBLE_EQ(*fit.stay[0], 1.0);
  EXPECT_DOUBLE_EQ(*fit.remainder[0], 0.0);
  for (const auto& nb : fit.neighbors) {
    if (nb.source == 0) {
      EXPECT_EQ(nb.probability, 0.0);
    }
  }
}

TEST(Model2, HandEstimatesOnTwoByTwoGrid) {
  // Index = mood * 2 + pain, so (m, p+1) is 1 and (m+1, p) is 2 from source 0.
  oracle::IMat y(4, std::vector<std::int64_t>(4, 1));
  y[0] = {4, 2, 2, 0};
  const auto fit = fit_model2(to_counts(y), {2, 2});
  EXPECT_DOUBLE_EQ(fit.probabilities(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(fit.probabilities(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(fit.probabilities(0, 2), 0.25);
  EXPECT_DOUBLE_EQ(*fit.remainder[0], 0.0);
  EXPECT_DOUBLE_EQ(fit.probabilities(0, 3), 0.0);
  int from0 = 0;
  for (const auto& nb : fit.neighbors) from0 += nb.source == 0;
  EXPECT_EQ(from0, 2);
}

TEST(Model2, InteriorCellHasFourNeighbours) {
  oracle::IMat y(25, std::vector<std::int64_t>(25, 2));
  const auto fit = fit_model2(to_counts(y), {5, 5});
  int from12 = 0;
  for (const auto& nb : fit.neighbors) from12 += nb.source == 12;
  EXPECT_EQ(from12, 4);
  int from0 = 0;
  for (const auto& nb : fit.neighbors) from0 += nb.source == 0;
  EXPECT_EQ(from0, 2);
  EXPECT_THROW(fit_model2(to_counts(y), {4, 5}), Error);
}

TEST(Model2, NestsModel1WhenNeighboursAreUniform) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> stay(0, 40), off(0, 6);
  oracle::IMat y(25, std::vector<std::int64_t>(25));
  for (int i = 0; i < 25; ++i) {
    const int o = off(rng);
    for (int j = 0; j < 25; ++j) y[i][j] = i == j ? stay(rng) : o;
  }
  const auto c = to_counts(y);
  const auto m1 = fit_model1(c);
  const auto m2 = fit_model2(c, {5, 5});
  EXPECT_LT((m1.expected - m2.expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pearson, HandValue) {
  NullModelFit fit = fit_model1(to_counts({{9, 9}, {9, 9}}));
  const auto y = to_counts({{16, 2}, {9, 9}});
  const auto r = pearson_residuals(y, fit);
  EXPECT_NEAR(r.residuals(0, 0), 7.0 / 3.0, 1e-12);
}

TEST(Pearson, ZeroExpectationIsFlaggedNotZeroed) {
  // Row 0 all self: off-diagonal expectation is 0.
  const auto y = to_counts({{5, 0, 0}, {1, 1, 1}, {1, 1, 1}});
  const auto r = pearson_residuals(y, fit_model1(y));
  EXPECT_EQ(r.zero_expectation_cells, 2u);
  EXPECT_FALSE(r.defined(0, 1));
  EXPECT_TRUE(std::isnan(r.residuals(0, 2)));
}

TEST(Normality, AllZeroResiduals) {
  const auto d = residual_normality(std::vector<double>(10, 0.0));
  EXPECT_EQ(d.mean, 0.0);
  EXPECT_EQ(d.variance, 0.0);
  EXPECT_EQ(d.bins.size(), 1u);
  EXPECT_EQ(d.bins[0].count, 10u);
  EXPECT_TRUE(d.curve.empty());
}

TEST(Normality, StandardNormalDraws) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> v(10000);
  for (auto& x : v) x = z(rng);
  const auto d = residual_normality(v);
  EXPECT_NEAR(d.mean, 0.0, 0.05);
  EXPECT_NEAR(d.variance, 1.0, 0.1);
  std::size_t n = 0;
  for (const auto& b : d.bins) n += b.count;
  EXPECT_EQ(n, v.size());
  double area = 0;
  for (std::size_t k = 1; k < d.curve.size(); ++k)
    area += (d.curve[k].x - d.curve[k - 1].x) * (d.curve[k].density + d.curve[k - 1].density) / 2;
  EXPECT_NEAR(area, 1.0, 0.01);
}

TEST(Normality, NeedsTwoValues) {
  try {
    residual_normality(std::vector<double>{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Pearson, ClusteredDataShowsExcessLargeResiduals) {
  // Strong neighbour structure: mass concentrated on a couple of off-diagonal cells.
  std::mt19937_64 rng(8);
  oracle::Mat m(25, std::vector<double>(25, 0.002));
  for (int i = 0; i < 25; ++i) {
    m[i][i] = 0.5;
    m[i][(i + 1) % 25] = 0.3;
    double s = 0;
    for (double v : m[i]) s += v;
    for (auto& v : m[i]) v /= s;
  }
  const auto seq = oracle::simulate(m, 0, 200000, rng);
  const auto y = to_counts(oracle::recount({seq}, 25));
  const auto r = pearson_residuals(y, fit_model1(y));
  EXPECT_GT(static_cast<double>(r.beyond_two()) / static_cast<double>(r.defined_cells), 0.2);
}
