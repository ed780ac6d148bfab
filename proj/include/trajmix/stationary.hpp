#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "trajmix/error.hpp"
#include "trajmix/matrix.hpp"

namespace trajmix {

struct StationaryDistribution {
  RealVector x;
  /// max_k |(x^T M)_k - x_k|
  double residual = 0;
  std::string method;
  /// max-abs difference between the direct solve and power iteration.
  double cross_check = 0;
};

namespace detail {

inline BoolMatrix support(const TransitionMatrix& m) { return (m.probabilities().array() > 0.0); }

inline BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
  const Index n = a.rows();
  BoolMatrix out = BoolMatrix::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) {
      if (!a(i, k)) continue;
      for (Index j = 0; j < n; ++j) out(i, j) = out(i, j) || b(k, j);
    }
  }
  return out;
}

inline std::string index_set(const std::vector<Index>& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

}  // namespace detail

/// True iff some power M^t with t <= max_power is entrywise positive.
/// max_power <= 0 means n^2, which exceeds Wielandt's bound (n-1)^2 + 1.
inline bool is_regular(const TransitionMatrix& m, int max_power = 0) {
  const Index n = m.size();
  if (max_power <= 0) max_power = static_cast<int>(n * n);
  const BoolMatrix a = detail::support(m);
  BoolMatrix power = a;
  for (int t = 1; t <= max_power; ++t) {
    if (power.all()) return true;
    if (t < max_power) power = detail::bool_product(power, a);
  }
  return false;
}

/// Human-readable account of why a chain is not regular.
inline std::string describe_structure(const TransitionMatrix& m) {
  const Index n = m.size();
  BoolMatrix reach = detail::support(m);
  for (Index i = 0; i < n; ++i) reach(i, i) = true;
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      if (reach(i, k))
        for (Index j = 0; j < n; ++j) reach(i, j) = reach(i, j) || reach(k, j);

  std::vector<Index> cls(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Index>> classes;
  for (Index i = 0; i < n; ++i) {
    if (cls[static_cast<std::size_t>(i)] >= 0) continue;
    classes.emplace_back();
    for (Index j = 0; j < n; ++j) {
      if (reach(i, j) && reach(j, i)) {
        cls[static_cast<std::size_t>(j)] = static_cast<Index>(classes.size() - 1);
        classes.back().push_back(j);
      }
    }
  }
  std::vector<std::vector<Index>> closed;
  std::vector<Index> transient;
  for (const auto& c : classes) {
    bool leaves = false;
    for (Index u : c)
      for (Index v = 0; v < n; ++v)
        if (m(u, v) > 0 && cls[static_cast<std::size_t>(v)] != cls[static_cast<std::size_t>(u)]) leaves = true;
    if (leaves) {
      transient.insert(transient.end(), c.begin(), c.end());
    } else {
      closed.push_back(c);
    }
  }
  if (closed.size() > 1) {
    std::string s = "reducible: " + std::to_string(closed.size()) + " closed classes";
    for (const auto& c : closed) s += " " + detail::index_set(c);
    return s;
  }
  // Period of the single closed class: gcd of level differences along its edges.
  const auto& c = closed.front();
  std::vector<long> level(static_cast<std::size_t>(n), -1);
  std::vector<Index> queue{c.front()};
  level[static_cast<std::size_t>(c.front())] = 0;
  long period = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const Index u = queue[q];
    for (Index v : c) {
      if (!(m(u, v) > 0)) continue;
      auto& lv = level[static_cast<std::size_t>(v)];
      if (lv < 0) {
        lv = level[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      } else {
        period = std::gcd(period, std::labs(level[static_cast<std::size_t>(u)] + 1 - lv));
      }
    }
  }
  if (period > 1) return "periodic: closed class " + detail::index_set(c) + " has period " + std::to_string(period);
  if (!transient.empty()) {
    std::sort(transient.begin(), transient.end());
    return "not regular: transient states " + detail::index_set(transient);
  }
  return "regular";
}

namespace detail {

inline double eigen_residual(const TransitionMatrix& m, const RealVector& x) {
  const RealVector lhs = m.probabilities().transpose() * x;
  return (lhs - x).cwiseAbs().maxCoeff();
}

inline RealVector power_iteration(const TransitionMatrix& m, int max_iter = 200000, double tol = 1e-15) {
  const Index n = m.size();
  RealVector x = RealVector::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < max_iter; ++it) {
    RealVector next = m.probabilities().transpose() * x;
    next /= next.sum();
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (change < tol) break;
  }
  return x;
}

}  // namespace detail

/// Unique stationary distribution of a regular chain, solved directly from
/// (M^T - I) x = 0 with one equation replaced by sum(x) = 1.
inline StationaryDistribution stationary(const TransitionMatrix& m) {
  if (!is_regular(m)) {
    throw Error(Errc::multiplicity, "stationary distribution is not unique or the chain is not regular (" +
                                        describe_structure(m) + ")");
  }
  const Index n = m.size();
  RealMatrix a = m.probabilities().transpose();
  a -= RealMatrix::Identity(n, n);
  a.row(n - 1).setOnes();
  RealVector b = RealVector::Zero(n);
  b(n - 1) = 1.0;
  RealVector x = Eigen::FullPivLU<RealMatrix>(a).solve(b);
  for (Index i = 0; i < n; ++i) x(i) = std::max(0.0, x(i));
  x /= x.sum();

  StationaryDistribution out;
  out.residual = detail::eigen_residual(m, x);
  out.cross_check = (detail::power_iteration(m) - x).cwiseAbs().maxCoeff();
  out.method = "direct-lu";
  out.x = std::move(x);
  return out;
}

inline StationaryDistribution stationary(const RealMatrix& m) {
  return stationary(TransitionMatrix::from_probabilities(m));
}

}  // namespace trajmix
