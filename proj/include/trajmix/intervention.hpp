#pragma once

// What-if transforms on four-state (BH, BL, GH, GL) transition matrices.
//
// Mood: in the bad-mood rows (BH, BL) each good-mood column (GL, GH) gains
// beta. What is left of the row's bad-mood mass, m_BL + m_BH - 2 beta, goes
// split : (1 - split) to BL : BH.
//
// Pain: in the high-pain rows (BH, GH) each low-pain column (GL, BL) gains
// beta. What is left of the high-pain mass, m_GH + m_BH - 2 beta, goes
// split : (1 - split) to GH : BH.
//
// Row sums are unchanged: +2 beta in the boosted columns cancels -2 beta in the
// redistributed mass. Rows outside the targeted class are copied verbatim.

#include <algorithm>
#include <array>
#include <limits>
#include <string>
#include <vector>

#include "trajmix/em.hpp"
#include "trajmix/error.hpp"
#include "trajmix/matrix.hpp"
#include "trajmix/state_space.hpp"
#include "trajmix/stationary.hpp"

namespace trajmix {

enum class Target { mood, pain };

inline const char* target_name(Target t) { return t == Target::mood ? "mood" : "pain"; }

/// How the displaced mass is divided between the two worse-off columns.
enum class Redistribution {
  /// Fixed split ratio, applied even at beta = 0.
  fixed_split,
  /// Keep each row's existing ratio between the two columns; beta = 0 is a no-op.
  proportional,
};

struct InterventionSpec {
  Target target = Target::mood;
  double beta = 0;
  double split = 0.8;
  Redistribution redistribution = Redistribution::fixed_split;
  /// Ignore `beta` and use each matrix's own feasible maximum.
  bool beta_at_max = false;
};

namespace detail {

struct TransformShape {
  std::array<int, 2> rows;
  std::array<int, 2> boosted;
  /// displaced[0] receives `split` of the remainder, displaced[1] the rest.
  std::array<int, 2> displaced;
};

inline TransformShape shape_of(Target t) {
  if (t == Target::mood) {
    return {{index_of(kBH), index_of(kBL)}, {index_of(kGL), index_of(kGH)}, {index_of(kBL), index_of(kBH)}};
  }
  return {{index_of(kBH), index_of(kGH)}, {index_of(kGL), index_of(kBL)}, {index_of(kGH), index_of(kBH)}};
}

inline void require_four_states(const TransitionMatrix& m) {
  if (m.size() != kReducedStates) {
    throw Error(Errc::invalid_input, "interventions need a 4-state (BH, BL, GH, GL) matrix, got " +
                                         std::to_string(m.size()) + " states");
  }
}

inline constexpr double kFeasibilitySlack = 1e-12;

}  // namespace detail

/// Largest beta keeping every modified entry inside [0, 1]: for each targeted
/// row, beta <= (displaced mass) / 2 and beta <= 1 - (boosted entry).
inline double max_feasible_beta(const TransitionMatrix& m, Target target) {
  detail::require_four_states(m);
  const auto shape = detail::shape_of(target);
  double bound = std::numeric_limits<double>::infinity();
  for (int r : shape.rows) {
    const double mass = m(r, shape.displaced[0]) + m(r, shape.displaced[1]);
    bound = std::min(bound, mass / 2);
    for (int c : shape.boosted) bound = std::min(bound, 1.0 - m(r, c));
  }
  return std::max(0.0, bound);
}

inline TransitionMatrix apply_intervention(const TransitionMatrix& m, const InterventionSpec& spec) {
  detail::require_four_states(m);
  if (!(spec.beta >= 0)) throw Error(Errc::invalid_input, "beta must be non-negative");
  if (!(spec.split > 0 && spec.split < 1)) throw Error(Errc::invalid_input, "split must lie in (0, 1)");
  const double bound = max_feasible_beta(m, spec.target);
  if (spec.beta > bound + detail::kFeasibilitySlack) throw InfeasibleBetaError(spec.beta, bound);
  const double beta = std::min(spec.beta, bound);

  const auto shape = detail::shape_of(spec.target);
  RealMatrix p = m.probabilities();
  for (int r : shape.rows) {
    const double a = m(r, shape.displaced[0]);
    const double b = m(r, shape.displaced[1]);
    const double rest = std::max(0.0, a + b - 2 * beta);
    double share = spec.split;
    if (spec.redistribution == Redistribution::proportional) share = a + b > 0 ? a / (a + b) : spec.split;
    for (int c : shape.boosted) p(r, c) = std::min(1.0, m(r, c) + beta);
    p(r, shape.displaced[0]) = share * rest;
    p(r, shape.displaced[1]) = (1.0 - share) * rest;
  }
  return TransitionMatrix::from_probabilities(std::move(p));
}

inline TransitionMatrix improve_mood(const TransitionMatrix& m, double beta, double split = 0.8,
                                     Redistribution how = Redistribution::fixed_split) {
  return apply_intervention(m, {Target::mood, beta, split, how});
}

inline TransitionMatrix improve_pain(const TransitionMatrix& m, double beta, double split = 0.8,
                                     Redistribution how = Redistribution::fixed_split) {
  return apply_intervention(m, {Target::pain, beta, split, how});
}

struct InterventionResult {
  int cluster = 0;
  double beta = 0;
  TransitionMatrix original;
  TransitionMatrix modified;
  StationaryDistribution before;
  StationaryDistribution after;
  /// after - before, per state.
  RealVector delta;
};

inline InterventionResult intervene(const TransitionMatrix& m, const InterventionSpec& spec, int cluster = 1) {
  InterventionSpec s = spec;
  if (s.beta_at_max) s.beta = max_feasible_beta(m, s.target);
  InterventionResult r;
  r.cluster = cluster;
  r.beta = s.beta;
  r.original = m;
  r.modified = apply_intervention(m, s);
  r.before = stationary(r.original);
  r.after = stationary(r.modified);
  r.delta = r.after.x - r.before.x;
  return r;
}

/// One result per mixture component.
inline std::vector<InterventionResult> intervene(const MixtureModel& model, const InterventionSpec& spec) {
  std::vector<InterventionResult> out;
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    out.push_back(intervene(model.components[k], spec, static_cast<int>(k) + 1));
  }
  return out;
}

struct MonotonicityProbe {
  std::vector<double> betas;
  /// Stationary mass on the boosted states (good mood, or low pain) at each beta.
  std::vector<double> boosted_mass;
  bool non_decreasing = true;
};

/// Samples `points` betas evenly on [0, max feasible] and records the
/// stationary mass on the improved states. Reported, not asserted.
inline MonotonicityProbe monotonicity_probe(const TransitionMatrix& m, Target target, double split = 0.8,
                                            int points = 11) {
  MonotonicityProbe probe;
  const double bound = max_feasible_beta(m, target);
  const auto shape = detail::shape_of(target);
  for (int k = 0; k < points; ++k) {
    const double beta = points > 1 ? bound * k / (points - 1) : 0.0;
    const auto x = stationary(apply_intervention(m, {target, beta, split})).x;
    const double mass = x(shape.boosted[0]) + x(shape.boosted[1]);
    if (!probe.boosted_mass.empty() && mass < probe.boosted_mass.back() - 1e-12) probe.non_decreasing = false;
    probe.betas.push_back(beta);
    probe.boosted_mass.push_back(mass);
  }
  return probe;
}

}  // namespace trajmix
