#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace trajmix {

enum class Errc {
  invalid_input,
  io,
  schema,
  degenerate,
  zero_cell,
  multiplicity,
  insufficient_data,
  infeasible,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "invalid-input";
    case Errc::io: return "io";
    case Errc::schema: return "schema";
    case Errc::degenerate: return "degenerate-input";
    case Errc::zero_cell: return "zero-cell";
    case Errc::multiplicity: return "multiplicity";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::infeasible: return "infeasible";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised when an intervention strength exceeds what the matrix admits.
class InfeasibleBetaError : public Error {
 public:
  InfeasibleBetaError(double beta, double bound)
      : Error(Errc::infeasible, "beta " + g(beta) + " exceeds the feasible bound " + g(bound)),
        beta_(beta),
        bound_(bound) {}
  double beta() const noexcept { return beta_; }
  double bound() const noexcept { return bound_; }

 private:
  static std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
  }

  double beta_;
  double bound_;
};

class ZeroCellError : public Error {
 public:
  explicit ZeroCellError(std::string cell)
      : Error(Errc::zero_cell, "contingency table cell " + cell + " is zero"), cell_(std::move(cell)) {}
  const std::string& cell() const noexcept { return cell_; }

 private:
  std::string cell_;
};

}  // namespace trajmix
