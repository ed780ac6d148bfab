#pragma once

// Structured null models for pooled transition counts and their Pearson
// residuals.
//
// Model 1: stay with probability pi_i, otherwise move uniformly to one of the
// other n-1 states. Model 2 (compound grid only): separate probabilities for
// staying and for single-step moves in either score; the leftover mass is
// spread uniformly over every other target.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "trajmix/error.hpp"
#include "trajmix/matrix.hpp"

namespace trajmix {

enum class NullModel { uniform_offdiag = 1, neighbor = 2 };

inline const char* null_model_name(NullModel m) {
  return m == NullModel::uniform_offdiag ? "uniform-offdiag" : "neighbor";
}

/// Grid shape of a compound state space, indexed row-major by (mood, pain).
struct CompoundLayout {
  int mood_levels = 5;
  int pain_levels = 5;
  int size() const { return mood_levels * pain_levels; }
};

enum class Step { pain_down, pain_up, mood_down, mood_up };

inline const char* step_name(Step s) {
  switch (s) {
    case Step::pain_down: return "pain-1";
    case Step::pain_up: return "pain+1";
    case Step::mood_down: return "mood-1";
    case Step::mood_up: return "mood+1";
  }
  return "?";
}

struct NeighborParameter {
  Index source = 0;
  Index target = 0;
  Step step = Step::pain_up;
  double probability = 0;
};

struct NullModelFit {
  NullModel model = NullModel::uniform_offdiag;
  RealMatrix probabilities;
  RealMatrix expected;
  RealVector row_totals;
  /// Estimated stay probability per row; empty for rows with no observations.
  std::vector<std::optional<double>> stay;
  /// Probability assigned to each non-distinguished target, per defined row.
  std::vector<std::optional<double>> remainder;
  std::vector<NeighborParameter> neighbors;

  Index size() const { return expected.rows(); }
  bool row_defined(Index i) const { return stay[static_cast<std::size_t>(i)].has_value(); }
};

namespace detail {

inline NullModelFit init_fit(const CountMatrix& y, NullModel model) {
  const Index n = y.size();
  if (n < 2) throw Error(Errc::invalid_input, "null models need at least 2 states");
  NullModelFit fit;
  fit.model = model;
  fit.probabilities = RealMatrix::Zero(n, n);
  fit.expected = RealMatrix::Zero(n, n);
  fit.row_totals = RealVector::Zero(n);
  fit.stay.assign(static_cast<std::size_t>(n), std::nullopt);
  fit.remainder.assign(static_cast<std::size_t>(n), std::nullopt);
  for (Index i = 0; i < n; ++i) fit.row_totals(i) = static_cast<double>(y.row_total(i));
  return fit;
}

}  // namespace detail

inline NullModelFit fit_model1(const CountMatrix& y) {
  auto fit = detail::init_fit(y, NullModel::uniform_offdiag);
  const Index n = y.size();
  for (Index i = 0; i < n; ++i) {
    const double total = fit.row_totals(i);
    if (total <= 0) continue;
    const double stay = static_cast<double>(y(i, i)) / total;
    const double off = (1.0 - stay) / static_cast<double>(n - 1);
    fit.stay[static_cast<std::size_t>(i)] = stay;
    fit.remainder[static_cast<std::size_t>(i)] = off;
    for (Index j = 0; j < n; ++j) {
      fit.probabilities(i, j) = i == j ? stay : off;
      fit.expected(i, j) = total * fit.probabilities(i, j);
    }
  }
  return fit;
}

inline NullModelFit fit_model2(const CountMatrix& y, CompoundLayout layout) {
  if (y.size() != layout.size()) {
    throw Error(Errc::invalid_input, "count matrix size " + std::to_string(y.size()) +
                                         " does not match the " + std::to_string(layout.mood_levels) + "x" +
                                         std::to_string(layout.pain_levels) + " compound layout");
  }
  auto fit = detail::init_fit(y, NullModel::neighbor);
  const Index n = y.size();
  for (Index i = 0; i < n; ++i) {
    const double total = fit.row_totals(i);
    if (total <= 0) continue;
    const int m = static_cast<int>(i) / layout.pain_levels;
    const int p = static_cast<int>(i) % layout.pain_levels;

    std::vector<bool> distinguished(static_cast<std::size_t>(n), false);
    distinguished[static_cast<std::size_t>(i)] = true;
    fit.probabilities(i, i) = static_cast<double>(y(i, i)) / total;
    fit.stay[static_cast<std::size_t>(i)] = fit.probabilities(i, i);
    double taken = fit.probabilities(i, i);

    auto neighbor = [&](int mm, int pp, Step step) {
      if (mm < 0 || mm >= layout.mood_levels || pp < 0 || pp >= layout.pain_levels) return;
      const Index j = static_cast<Index>(mm * layout.pain_levels + pp);
      const double prob = static_cast<double>(y(i, j)) / total;
      distinguished[static_cast<std::size_t>(j)] = true;
      fit.probabilities(i, j) = prob;
      taken += prob;
      fit.neighbors.push_back({i, j, step, prob});
    };
    neighbor(m, p - 1, Step::pain_down);
    neighbor(m, p + 1, Step::pain_up);
    neighbor(m - 1, p, Step::mood_down);
    neighbor(m + 1, p, Step::mood_up);

    Index others = 0;
    for (bool d : distinguished) others += d ? 0 : 1;
    const double rest = std::max(0.0, 1.0 - taken);
    const double share = others > 0 ? rest / static_cast<double>(others) : 0.0;
    fit.remainder[static_cast<std::size_t>(i)] = share;
    for (Index j = 0; j < n; ++j) {
      if (!distinguished[static_cast<std::size_t>(j)]) fit.probabilities(i, j) = share;
      fit.expected(i, j) = total * fit.probabilities(i, j);
    }
  }
  return fit;
}

struct ResidualReport {
  /// (Y - E) / sqrt(E); NaN where the cell is undefined.
  RealMatrix residuals;
  /// False where E = 0 or the source row has no observations.
  BoolMatrix defined;
  std::size_t defined_cells = 0;
  std::size_t zero_expectation_cells = 0;
  std::size_t above_two = 0;
  std::size_t below_minus_two = 0;
  double mean = 0;
  double variance = 0;

  std::size_t beyond_two() const { return above_two + below_minus_two; }

  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(defined_cells);
    for (Index i = 0; i < residuals.rows(); ++i) {
      for (Index j = 0; j < residuals.cols(); ++j) {
        if (defined(i, j)) out.push_back(residuals(i, j));
      }
    }
    return out;
  }
};

namespace detail {

inline void moments(const std::vector<double>& v, double& mean, double& variance) {
  mean = 0;
  variance = 0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double x : v) variance += (x - mean) * (x - mean);
  variance /= static_cast<double>(v.size() - 1);
}

}  // namespace detail

inline ResidualReport pearson_residuals(const CountMatrix& y, const NullModelFit& fit) {
  const Index n = y.size();
  if (fit.size() != n) throw Error(Errc::invalid_input, "fit and count matrix dimensions differ");
  ResidualReport r;
  r.residuals = RealMatrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  r.defined.setConstant(n, n, false);
  for (Index i = 0; i < n; ++i) {
    if (!fit.row_defined(i)) continue;
    for (Index j = 0; j < n; ++j) {
      const double e = fit.expected(i, j);
      if (!(e > 0)) {
        ++r.zero_expectation_cells;
        continue;
      }
      const double v = (static_cast<double>(y(i, j)) - e) / std::sqrt(e);
      r.residuals(i, j) = v;
      r.defined(i, j) = true;
      ++r.defined_cells;
      if (v > 2) ++r.above_two;
      if (v < -2) ++r.below_minus_two;
    }
  }
  detail::moments(r.values(), r.mean, r.variance);
  return r;
}

struct HistogramBin {
  double lower = 0;
  double upper = 0;
  std::size_t count = 0;
};

struct CurvePoint {
  double x = 0;
  double density = 0;
  /// Density scaled to the histogram: density * sample size * bin width.
  double expected_count = 0;
};

struct NormalityDiagnostics {
  std::size_t count = 0;
  double mean = 0;
  double variance = 0;
  double bin_width = 0;
  std::vector<HistogramBin> bins;
  /// Normal density with the sample's mean and variance; empty when the variance is 0.
  std::vector<CurvePoint> curve;
};

inline NormalityDiagnostics residual_normality(const std::vector<double>& values, double bin_width = 0.5,
                                               int curve_points = 101) {
  if (values.size() < 2) {
    throw Error(Errc::insufficient_data, "normality diagnostics need at least 2 defined residuals");
  }
  if (!(bin_width > 0)) throw Error(Errc::invalid_input, "bin width must be positive");
  NormalityDiagnostics d;
  d.count = values.size();
  d.bin_width = bin_width;
  detail::moments(values, d.mean, d.variance);

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = std::floor(*lo_it / bin_width) * bin_width;
  double hi = std::ceil(*hi_it / bin_width) * bin_width;
  if (hi <= lo) {
    lo = *lo_it - bin_width / 2;
    hi = *lo_it + bin_width / 2;
  }
  const auto nbins = static_cast<std::size_t>(std::llround((hi - lo) / bin_width));
  for (std::size_t b = 0; b < nbins; ++b) {
    d.bins.push_back({lo + static_cast<double>(b) * bin_width, lo + static_cast<double>(b + 1) * bin_width, 0});
  }
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
    if (b >= nbins) b = nbins - 1;
    ++d.bins[b].count;
  }

  if (d.variance > 0 && curve_points >= 2) {
    const double sd = std::sqrt(d.variance);
    for (int k = 0; k < curve_points; ++k) {
      const double x = lo + (hi - lo) * k / (curve_points - 1);
      const double z = (x - d.mean) / sd;
      const double pdf = std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi));
      d.curve.push_back({x, pdf, pdf * static_cast<double>(d.count) * bin_width});
    }
  }
  return d;
}

inline NormalityDiagnostics residual_normality(const ResidualReport& report, double bin_width = 0.5,
                                               int curve_points = 101) {
  return residual_normality(report.values(), bin_width, curve_points);
}

}  // namespace trajmix
