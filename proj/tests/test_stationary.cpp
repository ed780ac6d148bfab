#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "trajmix/stationary.hpp"

using namespace trajmix;
using testing_support::to_transition;

TEST(Stationary, TwoStateHandCase) {
  const auto s = stationary(to_transition({{0.9, 0.1}, {0.5, 0.5}}));
  EXPECT_NEAR(s.x(0), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(s.x(1), 1.0 / 6.0, 1e-12);
  EXPECT_EQ(s.method, "direct-lu");
}

TEST(Stationary, UniformMatrix) {
  const auto s = stationary(TransitionMatrix::uniform(5));
  for (Index i = 0; i < 5; ++i) EXPECT_NEAR(s.x(i), 0.2, 1e-14);
}

TEST(Stationary, AgreesWithPowerOracleOnRandomMatrices) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 2 + rep % 24;
    const auto m = oracle::random_stochastic(n, rng, 0.3);
    const auto t = to_transition(m);
    if (!is_regular(t)) continue;
    const auto s = stationary(t);
    const auto ref = oracle::power_stationary(m);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(s.x(i), ref[i], 1e-9);
    EXPECT_LT(s.residual, 1e-8);
    EXPECT_NEAR(s.x.sum(), 1.0, 1e-12);
    EXPECT_GE(s.x.minCoeff(), 0.0);
    EXPECT_LT(s.cross_check, 1e-8);
  }
}

TEST(Stationary, RelabellingPermutesSolution) {
  std::mt19937_64 rng(11);
  const auto m = oracle::random_stochastic(6, rng);
  std::vector<int> p{3, 0, 5, 1, 4, 2};
  oracle::Mat q(6, std::vector<double>(6));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) q[p[i]][p[j]] = m[i][j];
  const auto a = stationary(to_transition(m));
  const auto b = stationary(to_transition(q));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(a.x(i), b.x(p[i]), 1e-12);
}

TEST(Stationary, MatchesLongSimulation) {
  std::mt19937_64 rng(12);
  const auto m = oracle::random_stochastic(4, rng);
  const auto s = stationary(to_transition(m));
  const auto f = oracle::frequencies(oracle::simulate(m, 0, 1000000, rng), 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(f[i], s.x(i), 0.005);
}

TEST(IsRegular, Cases) {
  EXPECT_TRUE(is_regular(TransitionMatrix::uniform(3), 1));
  EXPECT_FALSE(is_regular(to_transition({{1, 0}, {0, 1}})));
  EXPECT_FALSE(is_regular(to_transition({{0, 1}, {1, 0}})));
  // Zero diagonal but aperiodic: regular at a higher power only.
  const auto m = to_transition({{0, 1, 0}, {0, 0, 1}, {0.5, 0.5, 0}});
  EXPECT_FALSE(is_regular(m, 1));
  EXPECT_TRUE(is_regular(m));
}

TEST(Stationary, NonRegularInputsRaise) {
  const auto check = [](const oracle::Mat& m, const std::string& needle) {
    try {
      stationary(to_transition(m));
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::multiplicity);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  check({{0.5, 0.5, 0, 0}, {0.5, 0.5, 0, 0}, {0, 0, 0.3, 0.7}, {0, 0, 0.6, 0.4}}, "reducible: 2 closed classes");
  check({{0, 1}, {1, 0}}, "period 2");
  check({{0.5, 0.5}, {0, 1}}, "transient states {0}");
}

TEST(Stationary, ValidatesRawMatrix) {
  RealMatrix bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(stationary(bad), Error);
}
