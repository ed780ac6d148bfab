#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "trajmix/ingestion.hpp"
#include "trajmix/matrix.hpp"

namespace testing_support {

inline trajmix::TransitionMatrix to_transition(const oracle::Mat& m) {
  const auto n = static_cast<trajmix::Index>(m.size());
  trajmix::RealMatrix p(n, n);
  for (trajmix::Index i = 0; i < n; ++i)
    for (trajmix::Index j = 0; j < n; ++j) p(i, j) = m[i][j];
  return trajmix::TransitionMatrix::from_probabilities(p);
}

inline oracle::Mat to_mat(const trajmix::TransitionMatrix& t) {
  oracle::Mat m(t.size(), std::vector<double>(t.size()));
  for (trajmix::Index i = 0; i < t.size(); ++i)
    for (trajmix::Index j = 0; j < t.size(); ++j) m[i][j] = t(i, j);
  return m;
}

inline trajmix::CountMatrix to_counts(const oracle::IMat& c) {
  const auto n = static_cast<trajmix::Index>(c.size());
  trajmix::CountArray a(n, n);
  for (trajmix::Index i = 0; i < n; ++i)
    for (trajmix::Index j = 0; j < n; ++j) a(i, j) = c[i][j];
  return trajmix::CountMatrix::from_array(a);
}

struct PlantedCohort {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;  // 0-based component
  std::vector<trajmix::CountMatrix> counts;
};

inline PlantedCohort planted_cohort(const std::vector<double>& weights, const std::vector<oracle::Mat>& comps,
                                    int participants, int steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  const int n = static_cast<int>(comps.front().size());
  std::uniform_int_distribution<int> start(0, n - 1);
  PlantedCohort c;
  for (int s = 0; s < participants; ++s) {
    const int k = pick(rng);
    c.labels.push_back(k);
    c.sequences.push_back(oracle::simulate(comps[k], start(rng), static_cast<std::size_t>(steps), rng));
    c.counts.push_back(to_counts(oracle::recount({c.sequences.back()}, n)));
  }
  return c;
}

}  // namespace testing_support
