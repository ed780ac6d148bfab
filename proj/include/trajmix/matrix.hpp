#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "trajmix/error.hpp"

namespace trajmix {

using Index = Eigen::Index;
using CountArray = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Square table of observed one-step transitions; entries never negative.
class CountMatrix {
 public:
  CountMatrix() = default;
  explicit CountMatrix(Index n) : counts_(CountArray::Zero(n, n)) {}

  static CountMatrix from_array(CountArray counts) {
    if (counts.rows() != counts.cols()) {
      throw Error(Errc::invalid_input, "count matrix must be square");
    }
    if ((counts.array() < 0).any()) {
      throw Error(Errc::invalid_input, "count matrix has a negative entry");
    }
    CountMatrix m;
    m.counts_ = std::move(counts);
    return m;
  }

  Index size() const { return counts_.rows(); }
  std::int64_t operator()(Index i, Index j) const { return counts_(i, j); }
  void add(Index i, Index j, std::int64_t c = 1) { counts_(i, j) += c; }

  std::int64_t total() const { return counts_.sum(); }
  std::int64_t row_total(Index i) const { return counts_.row(i).sum(); }
  const CountArray& counts() const { return counts_; }

  CountMatrix& operator+=(const CountMatrix& other) {
    if (other.size() != size()) {
      throw Error(Errc::invalid_input, "count matrix dimension mismatch: " +
                                           std::to_string(size()) + " vs " +
                                           std::to_string(other.size()));
    }
    counts_ += other.counts_;
    return *this;
  }

  friend bool operator==(const CountMatrix& a, const CountMatrix& b) {
    return a.size() == b.size() && a.counts_ == b.counts_;
  }

 private:
  CountArray counts_;
};

/// Row-stochastic matrix of transition probabilities.
class TransitionMatrix {
 public:
  static constexpr double kRowTolerance = 1e-9;

  TransitionMatrix() = default;

  static TransitionMatrix from_probabilities(RealMatrix p, double tol = kRowTolerance) {
    if (p.rows() != p.cols() || p.rows() == 0) {
      throw Error(Errc::invalid_input, "transition matrix must be square and non-empty");
    }
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index j = 0; j < p.cols(); ++j) {
        const double v = p(i, j);
        if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
          throw Error(Errc::invalid_input, "transition entry (" + std::to_string(i) + "," +
                                               std::to_string(j) + ") outside [0,1]");
        }
      }
      const double s = p.row(i).sum();
      if (std::abs(s - 1.0) > tol) {
        throw Error(Errc::invalid_input, "transition matrix row " + std::to_string(i) +
                                             " sums to " + std::to_string(s));
      }
    }
    TransitionMatrix m;
    m.p_ = std::move(p);
    return m;
  }

  static TransitionMatrix uniform(Index n) {
    return from_probabilities(RealMatrix::Constant(n, n, 1.0 / static_cast<double>(n)));
  }

  /// Row-normalized counts; rows without any count become uniform.
  static TransitionMatrix from_counts(const CountMatrix& c) {
    const Index n = c.size();
    RealMatrix p(n, n);
    for (Index i = 0; i < n; ++i) {
      const auto total = c.row_total(i);
      for (Index j = 0; j < n; ++j) {
        p(i, j) = total > 0 ? static_cast<double>(c(i, j)) / static_cast<double>(total)
                            : 1.0 / static_cast<double>(n);
      }
    }
    return from_probabilities(std::move(p));
  }

  Index size() const { return p_.rows(); }
  double operator()(Index i, Index j) const { return p_(i, j); }
  const RealMatrix& probabilities() const { return p_; }

  friend bool operator==(const TransitionMatrix& a, const TransitionMatrix& b) {
    return a.size() == b.size() && a.p_ == b.p_;
  }

 private:
  RealMatrix p_;
};

}  // namespace trajmix
