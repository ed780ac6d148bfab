#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "trajmix/intervention.hpp"

using namespace trajmix;
using testing_support::to_transition;

namespace {

constexpr int BH = 0, BL = 1, GH = 2, GL = 3;

// Builds a 4x4 matrix whose row `r` is given by label, other rows uniform.
TransitionMatrix with_row(int r, double gl, double gh, double bl, double bh) {
  oracle::Mat m(4, std::vector<double>(4, 0.25));
  m[r][GL] = gl;
  m[r][GH] = gh;
  m[r][BL] = bl;
  m[r][BH] = bh;
  return to_transition(m);
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(ImproveMood, ZeroBetaStillAppliesSplit) {
  const auto out = improve_mood(with_row(BH, 0.1, 0.1, 0.3, 0.5), 0.0, 0.8);
  EXPECT_NEAR(out(BH, GL), 0.1, 1e-15);
  EXPECT_NEAR(out(BH, GH), 0.1, 1e-15);
  EXPECT_NEAR(out(BH, BL), 0.64, 1e-15);
  EXPECT_NEAR(out(BH, BH), 0.16, 1e-15);
}

TEST(ImproveMood, WorkedExample) {
  const auto out = improve_mood(with_row(BH, 0.1, 0.1, 0.3, 0.5), 0.15, 0.8);
  EXPECT_NEAR(out(BH, GL), 0.25, 1e-15);
  EXPECT_NEAR(out(BH, GH), 0.25, 1e-15);
  EXPECT_NEAR(out(BH, BL), 0.40, 1e-15);
  EXPECT_NEAR(out(BH, BH), 0.10, 1e-15);
}

TEST(ImprovePain, WorkedExample) {
  const auto out = improve_pain(with_row(BH, 0.1, 0.2, 0.3, 0.4), 0.15, 0.8);
  EXPECT_NEAR(out(BH, GL), 0.25, 1e-15);
  EXPECT_NEAR(out(BH, BL), 0.45, 1e-15);
  EXPECT_NEAR(out(BH, GH), 0.24, 1e-15);
  EXPECT_NEAR(out(BH, BH), 0.06, 1e-15);
}

TEST(ImprovePain, FixedPointAtZeroBeta) {
  // High-pain rows already split 0.8 : 0.2 between GH and BH.
  oracle::Mat m{{0.06, 0.4, 0.24, 0.3}, {0.1, 0.2, 0.3, 0.4}, {0.1, 0.1, 0.4, 0.4}, {0.25, 0.25, 0.25, 0.25}};
  m[BH] = {0.06, 0.4, 0.24, 0.3};
  m[GH] = {0.1, 0.1, 0.4, 0.4};
  const auto t = to_transition(m);
  const auto out = improve_pain(t, 0.0, 0.8);
  EXPECT_LT((out.probabilities() - t.probabilities()).cwiseAbs().maxCoeff(), 1e-15);
  const auto r = intervene(t, {Target::pain, 0.0, 0.8});
  EXPECT_LT(r.delta.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Intervention, ProportionalVariantIsNoOpAtZero) {
  std::mt19937_64 rng(2);
  const auto t = to_transition(oracle::random_stochastic(4, rng));
  for (auto target : {Target::mood, Target::pain}) {
    const auto out = apply_intervention(t, {target, 0.0, 0.8, Redistribution::proportional});
    EXPECT_LT((out.probabilities() - t.probabilities()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MaxFeasibleBeta, HandCases) {
  // Bad-mood rows with BL + BH = 0.4 and boosted entries at most 0.8.
  oracle::Mat m(4, std::vector<double>(4, 0.25));
  m[BH] = {0.2, 0.2, 0.3, 0.3};
  m[BL] = {0.1, 0.3, 0.1, 0.5};
  EXPECT_NEAR(max_feasible_beta(to_transition(m), Target::mood), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(max_feasible_beta(TransitionMatrix::uniform(4), Target::mood), 0.25);
  EXPECT_DOUBLE_EQ(max_feasible_beta(TransitionMatrix::uniform(4), Target::pain), 0.25);
}

TEST(Intervention, RandomMatrixProperties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto t = to_transition(oracle::random_stochastic(4, rng, rep % 3 == 0 ? 0.3 : 0.0));
    for (auto target : {Target::mood, Target::pain}) {
      const double bound = max_feasible_beta(t, target);
      const double beta = bound * u(rng);
      const auto out = apply_intervention(t, {target, beta, 0.1 + 0.8 * u(rng)});
      for (Index i = 0; i < 4; ++i) EXPECT_NEAR(out.probabilities().row(i).sum(), 1.0, 1e-9);
      const auto untouched = target == Target::mood ? std::vector<int>{GH, GL} : std::vector<int>{BL, GL};
      for (int r : untouched)
        for (int c = 0; c < 4; ++c) EXPECT_TRUE(bit_equal(out(r, c), t(r, c)));
      EXPECT_NO_THROW(apply_intervention(t, {target, bound, 0.8}));
      EXPECT_THROW(apply_intervention(t, {target, bound + 1e-6, 0.8}), InfeasibleBetaError);
    }
  }
}

TEST(Intervention, ErrorsNameTheBound) {
  try {
    improve_mood(TransitionMatrix::uniform(4), 0.3);
    FAIL();
  } catch (const InfeasibleBetaError& e) {
    EXPECT_DOUBLE_EQ(e.bound(), 0.25);
    EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
    EXPECT_EQ(e.code(), Errc::infeasible);
  }
  EXPECT_THROW(improve_mood(TransitionMatrix::uniform(4), -0.1), Error);
  EXPECT_THROW(improve_mood(TransitionMatrix::uniform(4), 0.1, 1.0), Error);
  EXPECT_THROW(improve_mood(TransitionMatrix::uniform(3), 0.1), Error);
}

TEST(Intervene, PessimisticClusterLosesBadHighMass) {
  const auto t = to_transition({{0.80, 0.08, 0.08, 0.04},
                                {0.30, 0.50, 0.05, 0.15},
                                {0.30, 0.05, 0.50, 0.15},
                                {0.25, 0.15, 0.15, 0.45}});
  InterventionSpec spec;
  spec.target = Target::mood;
  spec.beta_at_max = true;
  const auto r = intervene(t, spec);
  EXPECT_DOUBLE_EQ(r.beta, max_feasible_beta(t, Target::mood));
  EXPECT_LT(r.after.x(BH), r.before.x(BH));
  const auto small = intervene(t, {Target::mood, 0.15, 0.8});
  EXPECT_LT(small.delta(BH), 0.0);
}

TEST(Intervene, OneResultPerComponent) {
  MixtureModel m;
  m.k = 2;
  m.n = 4;
  m.weights = {0.5, 0.5};
  m.components = {TransitionMatrix::uniform(4), TransitionMatrix::uniform(4)};
  const auto rs = intervene(m, {Target::pain, 0.1, 0.8});
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[1].cluster, 2);
  EXPECT_NEAR(rs[0].delta.sum(), 0.0, 1e-12);
}

TEST(MonotonicityProbe, Reports) {
  const auto t = to_transition({{0.5, 0.2, 0.2, 0.1}, {0.2, 0.5, 0.1, 0.2}, {0.2, 0.1, 0.5, 0.2}, {0.1, 0.2, 0.2, 0.5}});
  const auto p = monotonicity_probe(t, Target::mood);
  ASSERT_EQ(p.betas.size(), 11u);
  EXPECT_EQ(p.betas.front(), 0.0);
  EXPECT_DOUBLE_EQ(p.betas.back(), max_feasible_beta(t, Target::mood));
  EXPECT_TRUE(p.non_decreasing);
  EXPECT_GT(p.boosted_mass.back(), p.boosted_mass.front());
}
