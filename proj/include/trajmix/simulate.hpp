#pragma once

// Synthetic cohorts drawn from a known mixture of Markov chains, with planted
// covariates. Everything the generator decides is kept alongside the data so
// tests can tally against it.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajmix/error.hpp"
#include "trajmix/ingestion.hpp"
#include "trajmix/matrix.hpp"
#include "trajmix/state_space.hpp"

namespace trajmix {

/// Samples a state index from a probability row.
template <class Rng, class Row>
int sample_row(const Row& row, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0;
  const auto n = static_cast<int>(row.size());
  for (int j = 0; j < n; ++j) {
    acc += row(j);
    if (r < acc) return j;
  }
  // Rounding left r above the cumulative sum; fall back to the last positive entry.
  for (int j = n - 1; j >= 0; --j)
    if (row(j) > 0) return j;
  return n - 1;
}

template <class Rng>
std::vector<int> simulate_chain(const TransitionMatrix& m, int start, std::size_t steps, Rng& rng) {
  std::vector<int> out;
  out.reserve(steps);
  int s = start;
  for (std::size_t t = 0; t < steps; ++t) {
    out.push_back(s);
    s = sample_row(m.probabilities().row(s), rng);
  }
  return out;
}

struct MembershipPlan {
  double response_rate = 1.0;
  /// covariate -> per-component prevalence among responders.
  std::map<std::string, std::vector<double>> prevalence;
};

struct NumericPlan {
  double response_rate = 1.0;
  std::vector<double> mean;
  double sd = 1.0;
};

struct GroupPlan {
  std::vector<std::string> levels;
  std::vector<double> probabilities;
};

struct CovariatePlan {
  std::map<std::string, MembershipPlan> memberships;
  std::map<std::string, NumericPlan> numeric;
  std::map<std::string, GroupPlan> groups;
};

/// A mixture to sample from. State labels are either the reduced labels
/// (BH, BL, GH, GL) or compound labels (M<mood>P<pain>).
struct GeneratorSpec {
  std::vector<std::string> states;
  std::vector<double> weights;
  std::vector<TransitionMatrix> components;
  CovariatePlan covariates;
};

struct CohortOptions {
  std::size_t participants = 100;
  std::size_t steps = 50;
  std::uint64_t seed = 1;
  /// Per-row probability that one score (or both) goes missing.
  double missingness = 0.0;
  Date start = Date{std::chrono::year{2020} / 1 / 1};
};

struct SyntheticRow {
  std::string participant;
  Date date;
  std::optional<int> mood;
  std::optional<int> pain;
};

struct SyntheticParticipant {
  std::string id;
  /// 1-based generating component.
  int cluster = 0;
  std::vector<int> states;
  std::map<std::string, std::optional<std::set<std::string>>> memberships;
  std::map<std::string, std::optional<double>> numeric;
  std::map<std::string, std::string> groups;
};

struct SyntheticCohort {
  std::vector<SyntheticRow> rows;
  std::vector<SyntheticParticipant> participants;
};

inline void validate(const GeneratorSpec& spec) {
  const auto k = spec.components.size();
  if (k == 0) throw Error(Errc::invalid_input, "generator spec has no components");
  if (spec.weights.size() != k) throw Error(Errc::invalid_input, "generator weights and components differ in count");
  double s = 0;
  for (double w : spec.weights) {
    if (!(w >= 0)) throw Error(Errc::invalid_input, "negative generator weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw Error(Errc::invalid_input, "generator weights must sum to 1");
  for (const auto& m : spec.components) {
    if (m.size() != static_cast<Index>(spec.states.size())) {
      throw Error(Errc::invalid_input, "component size does not match the state labels");
    }
  }
  for (const auto& [name, plan] : spec.covariates.memberships) {
    for (const auto& [cov, p] : plan.prevalence) {
      if (p.size() != k) throw Error(Errc::invalid_input, "prevalence of '" + cov + "' needs one value per component");
    }
  }
  for (const auto& [name, plan] : spec.covariates.numeric) {
    if (plan.mean.size() != k) throw Error(Errc::invalid_input, "mean of '" + name + "' needs one value per component");
  }
  for (const auto& [name, plan] : spec.covariates.groups) {
    if (plan.levels.empty() || plan.levels.size() != plan.probabilities.size()) {
      throw Error(Errc::invalid_input, "group '" + name + "' needs matching levels and probabilities");
    }
  }
}

inline SyntheticCohort simulate_cohort(const GeneratorSpec& spec, const StateSpace& space,
                                       const CohortOptions& opt) {
  validate(spec);
  if (!(opt.missingness >= 0 && opt.missingness <= 1)) {
    throw Error(Errc::invalid_input, "missingness must lie in [0, 1]");
  }
  // Each label resolves to a pool of (mood, pain) pairs to draw scores from.
  std::vector<std::vector<CompoundState>> pools;
  for (const auto& label : spec.states) {
    std::vector<CompoundState> pool;
    if (const auto r = parse_reduced(label)) {
      for (int m : space.mood_scores(r->mood))
        for (int p : space.pain_scores(r->pain)) pool.push_back({m, p});
    } else {
      int m = 0;
      int p = 0;
      if (std::sscanf(label.c_str(), "M%dP%d", &m, &p) != 2) {
        throw Error(Errc::invalid_input, "state label '" + label + "' is neither reduced nor compound");
      }
      const CompoundState cs{m, p};
      space.check(cs);
      pool.push_back(cs);
    }
    pools.push_back(std::move(pool));
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RealVector weights = Eigen::Map<const RealVector>(spec.weights.data(), static_cast<Index>(spec.weights.size()));
  const int n = static_cast<int>(spec.states.size());
  const int width = static_cast<int>(std::to_string(opt.participants).size());

  SyntheticCohort cohort;
  for (std::size_t s = 0; s < opt.participants; ++s) {
    SyntheticParticipant part;
    std::string num = std::to_string(s + 1);
    part.id = "P" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    const int comp = sample_row(weights, rng);
    part.cluster = comp + 1;
    std::uniform_int_distribution<int> start(0, n - 1);
    part.states = simulate_chain(spec.components[static_cast<std::size_t>(comp)], start(rng), opt.steps, rng);

    for (std::size_t t = 0; t < part.states.size(); ++t) {
      const auto& pool = pools[static_cast<std::size_t>(part.states[t])];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const CompoundState cs = pool[pick(rng)];
      SyntheticRow row{part.id, opt.start + std::chrono::days{static_cast<int>(t)}, cs.mood, cs.pain};
      if (u(rng) < opt.missingness) {
        const double which = u(rng);
        if (which < 1.0 / 3) {
          row.mood.reset();
        } else if (which < 2.0 / 3) {
          row.pain.reset();
        } else {
          row.mood.reset();
          row.pain.reset();
        }
      }
      cohort.rows.push_back(std::move(row));
    }

    for (const auto& [family, plan] : spec.covariates.memberships) {
      if (u(rng) >= plan.response_rate) {
        part.memberships[family] = std::nullopt;
        continue;
      }
      std::set<std::string> held;
      for (const auto& [cov, prev] : plan.prevalence) {
        if (u(rng) < prev[static_cast<std::size_t>(comp)]) held.insert(cov);
      }
      part.memberships[family] = std::move(held);
    }
    for (const auto& [name, plan] : spec.covariates.numeric) {
      std::normal_distribution<double> z(plan.mean[static_cast<std::size_t>(comp)], plan.sd);
      const double value = std::round(z(rng));
      part.numeric[name] = u(rng) < plan.response_rate ? std::optional<double>(value) : std::nullopt;
    }
    for (const auto& [name, plan] : spec.covariates.groups) {
      const RealVector p = Eigen::Map<const RealVector>(plan.probabilities.data(),
                                                        static_cast<Index>(plan.probabilities.size()));
      part.groups[name] = plan.levels[static_cast<std::size_t>(sample_row(p, rng))];
    }
    cohort.participants.push_back(std::move(part));
  }
  return cohort;
}

}  // namespace trajmix
