#pragma once

// Mixture of Markov chains fitted by expectation-maximization.
//
// Each participant s contributes a count matrix C_s. Component k has weight
// w_k and transition matrix M_k. The responsibilities G (S x K) hold the
// posterior probability that participant s was generated by component k.
//
//   M-step: w_k   = sum_s G_sk / S
//           M_kij = (sum_s G_sk C_sij + a) / sum_j' (sum_s G_sk C_sij' + a)
//   E-step: log L_sk = sum_ij C_sij log M_kij
//           G_sk = w_k L_sk / sum_c w_c L_sc
//
// `a` is an optional additive pseudo-count (0 by default). A component row that
// receives no weight at all becomes uniform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "trajmix/error.hpp"
#include "trajmix/matrix.hpp"

namespace trajmix {

struct EmConfig {
  std::uint64_t seed = 1;
  double epsilon = 1e-6;
  int max_iterations = 1000;
  double smoothing = 0.0;
  int restarts = 1;
};

struct MixtureModel {
  int k = 0;
  Index n = 0;
  std::vector<double> weights;
  std::vector<TransitionMatrix> components;
  /// S x K posterior membership probabilities; rows sum to 1.
  RealMatrix responsibilities;
};

struct EmTrace {
  /// Mixture log-likelihood after each M-step.
  std::vector<double> log_likelihood;
  /// Log-likelihood plus the smoothing prior term; equals log_likelihood when smoothing is 0.
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
  double final_change = 0;
  std::uint64_t seed = 0;
  /// raw_order[k] is the pre-sorting index of reported component k.
  std::vector<int> raw_order;
};

struct EmFit {
  MixtureModel model;
  EmTrace trace;
  /// Final log-likelihood of every restart, in seed order.
  std::vector<double> restart_log_likelihoods;
};

inline double log_sum_exp(std::span<const double> a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

namespace detail {

struct SparseCount {
  Index i;
  Index j;
  double c;
};

inline std::vector<std::vector<SparseCount>> sparse_counts(std::span<const CountMatrix> counts, Index n) {
  std::vector<std::vector<SparseCount>> out(counts.size());
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s].size() != n) {
      throw Error(Errc::invalid_input, "participant " + std::to_string(s) + " has a " +
                                           std::to_string(counts[s].size()) + "-state count matrix, expected " +
                                           std::to_string(n));
    }
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (counts[s](i, j) > 0) out[s].push_back({i, j, static_cast<double>(counts[s](i, j))});
  }
  return out;
}

/// log L_sk for every participant and component; -inf where a seen transition has probability 0.
inline RealMatrix log_lambda(const std::vector<std::vector<SparseCount>>& sparse,
                             const std::vector<RealMatrix>& log_m) {
  const auto S = static_cast<Index>(sparse.size());
  const auto K = static_cast<Index>(log_m.size());
  RealMatrix out = RealMatrix::Zero(S, K);
  for (Index s = 0; s < S; ++s) {
    for (Index k = 0; k < K; ++k) {
      double acc = 0;
      for (const auto& e : sparse[static_cast<std::size_t>(s)]) acc += e.c * log_m[static_cast<std::size_t>(k)](e.i, e.j);
      out(s, k) = acc;
    }
  }
  return out;
}

inline std::vector<RealMatrix> log_components(const std::vector<TransitionMatrix>& comps) {
  std::vector<RealMatrix> out;
  out.reserve(comps.size());
  for (const auto& m : comps) out.push_back(m.probabilities().array().log().matrix());
  return out;
}

/// E-step: fills responsibilities and returns the total log-likelihood.
inline double e_step(const RealMatrix& log_l, const std::vector<double>& weights, RealMatrix& gamma) {
  const Index S = log_l.rows();
  const Index K = log_l.cols();
  gamma.resize(S, K);
  std::vector<double> a(static_cast<std::size_t>(K));
  double total = 0;
  for (Index s = 0; s < S; ++s) {
    for (Index k = 0; k < K; ++k) {
      const double w = weights[static_cast<std::size_t>(k)];
      a[static_cast<std::size_t>(k)] = w > 0 ? std::log(w) + log_l(s, k) : -std::numeric_limits<double>::infinity();
    }
    const double lse = log_sum_exp(a);
    total += lse;
    if (lse == -std::numeric_limits<double>::infinity()) {
      for (Index k = 0; k < K; ++k) gamma(s, k) = weights[static_cast<std::size_t>(k)];
      continue;
    }
    for (Index k = 0; k < K; ++k) gamma(s, k) = std::exp(a[static_cast<std::size_t>(k)] - lse);
    gamma.row(s) /= gamma.row(s).sum();
  }
  return total;
}

inline void m_step(const std::vector<std::vector<SparseCount>>& sparse, const RealMatrix& gamma, Index n,
                   double smoothing, std::vector<double>& weights, std::vector<TransitionMatrix>& comps) {
  const Index S = gamma.rows();
  const Index K = gamma.cols();
  weights.assign(static_cast<std::size_t>(K), 0.0);
  for (Index k = 0; k < K; ++k) {
    double w = 0;
    for (Index s = 0; s < S; ++s) w += gamma(s, k);
    weights[static_cast<std::size_t>(k)] = w / static_cast<double>(S);
  }
  comps.clear();
  for (Index k = 0; k < K; ++k) {
    RealMatrix acc = RealMatrix::Constant(n, n, smoothing);
    for (Index s = 0; s < S; ++s) {
      const double g = gamma(s, k);
      if (g == 0) continue;
      for (const auto& e : sparse[static_cast<std::size_t>(s)]) acc(e.i, e.j) += g * e.c;
    }
    for (Index i = 0; i < n; ++i) {
      const double row = acc.row(i).sum();
      if (row > 0) {
        acc.row(i) /= row;
      } else {
        acc.row(i).setConstant(1.0 / static_cast<double>(n));
      }
    }
    comps.push_back(TransitionMatrix::from_probabilities(std::move(acc)));
  }
}

inline double prior_term(const std::vector<TransitionMatrix>& comps, double smoothing) {
  if (smoothing == 0) return 0;
  double t = 0;
  for (const auto& m : comps) t += smoothing * m.probabilities().array().log().sum();
  return t;
}

}  // namespace detail

/// Total mixture log-likelihood sum_s log sum_k w_k L_sk, evaluated in log space.
/// Returns -infinity when some observed transition is impossible under every component.
inline double log_likelihood(const MixtureModel& model, std::span<const CountMatrix> counts) {
  const auto sparse = detail::sparse_counts(counts, model.n);
  const auto log_l = detail::log_lambda(sparse, detail::log_components(model.components));
  RealMatrix gamma;
  return detail::e_step(log_l, model.weights, gamma);
}

/// One EM run from a single random initialization of the responsibilities.
inline EmFit em_fit_single(std::span<const CountMatrix> counts, int k, const EmConfig& config) {
  if (k < 1) throw Error(Errc::invalid_input, "K must be at least 1");
  if (counts.empty()) throw Error(Errc::invalid_input, "no participants");
  const auto S = static_cast<Index>(counts.size());
  if (S < k) {
    throw Error(Errc::invalid_input, "fewer participants (" + std::to_string(S) + ") than components (" +
                                         std::to_string(k) + ")");
  }
  const Index n = counts.front().size();
  const auto sparse = detail::sparse_counts(counts, n);
  if (std::all_of(sparse.begin(), sparse.end(), [](const auto& v) { return v.empty(); })) {
    throw Error(Errc::degenerate, "every participant has an all-zero count matrix");
  }
  if (!(config.epsilon > 0) || config.max_iterations < 1 || config.smoothing < 0) {
    throw Error(Errc::invalid_input, "EM config needs epsilon > 0, max_iterations >= 1, smoothing >= 0");
  }

  RealMatrix gamma(S, k);
  std::mt19937_64 rng(config.seed);
  std::exponential_distribution<double> expo(1.0);
  for (Index s = 0; s < S; ++s) {
    for (Index c = 0; c < k; ++c) gamma(s, c) = expo(rng);
    gamma.row(s) /= gamma.row(s).sum();
  }

  EmFit fit;
  fit.trace.seed = config.seed;
  std::vector<double> weights;
  std::vector<TransitionMatrix> comps;
  RealMatrix next;
  for (int it = 1; it <= config.max_iterations; ++it) {
    detail::m_step(sparse, gamma, n, config.smoothing, weights, comps);
    const auto log_l = detail::log_lambda(sparse, detail::log_components(comps));
    const double ll = detail::e_step(log_l, weights, next);
    fit.trace.log_likelihood.push_back(ll);
    fit.trace.objective.push_back(ll + detail::prior_term(comps, config.smoothing));
    fit.trace.iterations = it;
    fit.trace.final_change = (next - gamma).cwiseAbs().maxCoeff();
    gamma.swap(next);
    if (fit.trace.final_change < config.epsilon) {
      fit.trace.converged = true;
      break;
    }
  }

  // Report components by descending weight.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  fit.trace.raw_order = order;
  fit.model.k = k;
  fit.model.n = n;
  fit.model.responsibilities.resize(S, k);
  for (int c = 0; c < k; ++c) {
    const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(c)]);
    fit.model.weights.push_back(weights[src]);
    fit.model.components.push_back(comps[src]);
    fit.model.responsibilities.col(c) = gamma.col(static_cast<Index>(src));
  }
  fit.restart_log_likelihoods.push_back(fit.trace.log_likelihood.back());
  return fit;
}

/// Best of `config.restarts` runs seeded seed, seed+1, ...; ties keep the earliest seed.
inline EmFit em_fit(std::span<const CountMatrix> counts, int k, const EmConfig& config) {
  const int restarts = std::max(1, config.restarts);
  EmFit best;
  std::vector<double> all;
  for (int r = 0; r < restarts; ++r) {
    EmConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    EmFit f = em_fit_single(counts, k, c);
    all.push_back(f.trace.objective.back());
    if (r == 0 || f.trace.objective.back() > best.trace.objective.back()) best = std::move(f);
  }
  best.restart_log_likelihoods = std::move(all);
  return best;
}

struct SelectKRow {
  int k = 0;
  double negative_log_likelihood = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
};

/// Best-of-restarts negative log-likelihood for each K in [k_min, k_max].
inline std::vector<SelectKRow> select_k(std::span<const CountMatrix> counts, int k_min, int k_max,
                                        const EmConfig& config, std::vector<EmFit>* fits = nullptr) {
  if (k_min < 1 || k_max < k_min) throw Error(Errc::invalid_input, "empty or invalid K range");
  std::vector<SelectKRow> rows;
  for (int k = k_min; k <= k_max; ++k) {
    EmFit f = em_fit(counts, k, config);
    rows.push_back({k, -f.trace.log_likelihood.back(), f.trace.seed, f.trace.iterations, f.trace.converged});
    if (fits) fits->push_back(std::move(f));
  }
  return rows;
}

struct Assignment {
  std::size_t participant = 0;
  /// 1-based cluster index.
  int cluster = 0;
  /// True when the maximum responsibility was shared and the lowest index won.
  bool tie = false;
};

inline std::vector<Assignment> assign_clusters(const MixtureModel& model) {
  std::vector<Assignment> out;
  const auto& g = model.responsibilities;
  for (Index s = 0; s < g.rows(); ++s) {
    Index best = 0;
    bool tie = false;
    for (Index k = 1; k < g.cols(); ++k) {
      if (g(s, k) > g(s, best)) {
        best = k;
        tie = false;
      } else if (g(s, k) == g(s, best)) {
        tie = true;
      }
    }
    out.push_back({static_cast<std::size_t>(s), static_cast<int>(best) + 1, tie});
  }
  return out;
}

struct RatioMatrix {
  RealMatrix ratio;
  /// True where the pooled probability is 0; ratio holds NaN (0/0) or +inf there.
  BoolMatrix flagged;
};

/// Elementwise M_k / pooled for every component.
inline std::vector<RatioMatrix> transition_ratio(const MixtureModel& model, const TransitionMatrix& pooled) {
  if (pooled.size() != model.n) throw Error(Errc::invalid_input, "pooled matrix has a different state space");
  std::vector<RatioMatrix> out;
  for (const auto& m : model.components) {
    RatioMatrix r;
    r.ratio.resize(model.n, model.n);
    r.flagged.setConstant(model.n, model.n, false);
    for (Index i = 0; i < model.n; ++i) {
      for (Index j = 0; j < model.n; ++j) {
        const double p = pooled(i, j);
        if (p > 0) {
          r.ratio(i, j) = m(i, j) / p;
        } else {
          r.flagged(i, j) = true;
          r.ratio(i, j) = m(i, j) > 0 ? std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace trajmix
