#pragma once

// Cluster-versus-covariate statistics: 2x2 tables, log odds ratios with
// asymptotic 95% intervals, composition proportions and per-cluster means.
//
// For cluster c and covariate v, among participants who reported the
// covariate family at all:
//   n11 = in c, has v      n12 = not in c, has v
//   n21 = in c, lacks v    n22 = not in c, lacks v

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "trajmix/error.hpp"

namespace trajmix {

struct LabeledAssignment {
  std::string participant;
  /// 1-based cluster index.
  int cluster = 0;
};

/// Participant -> set of reported values; nullopt (or no entry) when the
/// participant did not answer this covariate family.
using MembershipColumn = std::map<std::string, std::optional<std::set<std::string>>>;
using NumericColumn = std::map<std::string, std::optional<double>>;
using TextColumn = std::map<std::string, std::string>;

struct ContingencyTable2x2 {
  std::int64_t n11 = 0;
  std::int64_t n12 = 0;
  std::int64_t n21 = 0;
  std::int64_t n22 = 0;
  std::int64_t total() const { return n11 + n12 + n21 + n22; }
  friend bool operator==(const ContingencyTable2x2&, const ContingencyTable2x2&) = default;
};

struct Coverage {
  std::size_t reporting = 0;
  std::vector<std::string> excluded;
};

struct TableResult {
  ContingencyTable2x2 table;
  Coverage coverage;
};

inline int cluster_count(std::span<const LabeledAssignment> assignments) {
  int k = 0;
  for (const auto& a : assignments) k = std::max(k, a.cluster);
  return k;
}

namespace detail {

inline const std::set<std::string>* reported(const MembershipColumn& column, const std::string& participant) {
  const auto it = column.find(participant);
  if (it == column.end() || !it->second) return nullptr;
  return &*it->second;
}

}  // namespace detail

inline std::set<std::string> covariate_values(const MembershipColumn& column) {
  std::set<std::string> out;
  for (const auto& [id, values] : column) {
    if (values) out.insert(values->begin(), values->end());
  }
  return out;
}

inline TableResult build_table(std::span<const LabeledAssignment> assignments, const MembershipColumn& column,
                               int cluster, const std::string& covariate) {
  if (cluster < 1 || cluster > cluster_count(assignments)) {
    throw Error(Errc::invalid_input, "unknown cluster " + std::to_string(cluster));
  }
  if (!covariate_values(column).contains(covariate)) {
    throw Error(Errc::invalid_input, "unknown covariate '" + covariate + "'");
  }
  TableResult r;
  for (const auto& a : assignments) {
    const auto* values = detail::reported(column, a.participant);
    if (!values) {
      r.coverage.excluded.push_back(a.participant);
      continue;
    }
    ++r.coverage.reporting;
    const bool in = a.cluster == cluster;
    const bool has = values->contains(covariate);
    if (has) {
      ++(in ? r.table.n11 : r.table.n12);
    } else {
      ++(in ? r.table.n21 : r.table.n22);
    }
  }
  return r;
}

struct OddsRatioResult {
  double log_or = 0;
  double std_error = 0;
  double ci_low = 0;
  double ci_high = 0;
  bool corrected = false;
};

inline constexpr double kZ95 = 1.96;

/// L = log(n11 n22 / (n12 n21)), sigma = sqrt(sum of reciprocal cells), CI = L +/- 1.96 sigma.
/// A zero cell is an error unless `haldane` is set, in which case 0.5 is added
/// to every cell of a table that has one.
inline OddsRatioResult log_odds_ratio(const ContingencyTable2x2& t, bool haldane = false) {
  const std::int64_t cells[4] = {t.n11, t.n12, t.n21, t.n22};
  const char* names[4] = {"n11", "n12", "n21", "n22"};
  double v[4];
  bool any_zero = false;
  for (int i = 0; i < 4; ++i) {
    if (cells[i] < 0) throw Error(Errc::invalid_input, std::string("negative count in ") + names[i]);
    any_zero = any_zero || cells[i] == 0;
  }
  if (any_zero && !haldane) {
    for (int i = 0; i < 4; ++i)
      if (cells[i] == 0) throw ZeroCellError(names[i]);
  }
  for (int i = 0; i < 4; ++i) v[i] = static_cast<double>(cells[i]) + (any_zero ? 0.5 : 0.0);
  OddsRatioResult r;
  r.corrected = any_zero;
  r.log_or = std::log(v[0]) + std::log(v[3]) - std::log(v[1]) - std::log(v[2]);
  r.std_error = std::sqrt(1 / v[0] + 1 / v[1] + 1 / v[2] + 1 / v[3]);
  r.ci_low = r.log_or - kZ95 * r.std_error;
  r.ci_high = r.log_or + kZ95 * r.std_error;
  return r;
}

struct WithinClusterRow {
  int cluster = 0;
  std::string covariate;
  std::size_t count = 0;
  /// Participants in the cluster who reported this covariate family.
  std::size_t reporters = 0;
  double proportion = 0;
  /// Set when the cluster has no reporters; the proportion is then 0.
  bool no_reporters = false;
};

struct AcrossClustersRow {
  std::string covariate;
  int cluster = 0;
  std::size_t count = 0;
  std::size_t covariate_total = 0;
  double proportion = 0;
};

struct CovariateProportions {
  /// Share of a cluster's reporters who have each covariate.
  std::vector<WithinClusterRow> within_cluster;
  /// Share of each covariate's holders falling into each cluster; sums to 1 per covariate.
  std::vector<AcrossClustersRow> across_clusters;
};

inline CovariateProportions covariate_proportions(std::span<const LabeledAssignment> assignments,
                                                  const MembershipColumn& column) {
  const int k = cluster_count(assignments);
  const auto values = covariate_values(column);
  std::vector<std::size_t> reporters(static_cast<std::size_t>(k) + 1, 0);
  std::map<std::string, std::vector<std::size_t>> counts;
  for (const auto& v : values) counts[v].assign(static_cast<std::size_t>(k) + 1, 0);
  for (const auto& a : assignments) {
    const auto* vs = detail::reported(column, a.participant);
    if (!vs) continue;
    ++reporters[static_cast<std::size_t>(a.cluster)];
    for (const auto& v : *vs) ++counts[v][static_cast<std::size_t>(a.cluster)];
  }
  CovariateProportions out;
  for (int c = 1; c <= k; ++c) {
    for (const auto& v : values) {
      WithinClusterRow row{c, v, counts[v][static_cast<std::size_t>(c)], reporters[static_cast<std::size_t>(c)], 0, false};
      if (row.reporters == 0) {
        row.no_reporters = true;
      } else {
        row.proportion = static_cast<double>(row.count) / static_cast<double>(row.reporters);
      }
      out.within_cluster.push_back(std::move(row));
    }
  }
  for (const auto& v : values) {
    std::size_t total = 0;
    for (int c = 1; c <= k; ++c) total += counts[v][static_cast<std::size_t>(c)];
    for (int c = 1; c <= k; ++c) {
      const auto n = counts[v][static_cast<std::size_t>(c)];
      out.across_clusters.push_back(
          {v, c, n, total, total ? static_cast<double>(n) / static_cast<double>(total) : 0.0});
    }
  }
  return out;
}

struct GroupSummaryRow {
  /// 1-based cluster, or 0 for all participants together.
  int cluster = 0;
  /// Value of the grouping column; empty when not grouped or the value is missing.
  std::string group;
  std::size_t participants = 0;
  std::size_t responding = 0;
  std::optional<double> mean;
  /// Percentage of participants with a value.
  double response_rate = 0;
};

/// Mean of a numeric covariate over non-missing values, and response rate, per
/// (cluster, group). Rows with cluster 0 pool every cluster.
inline std::vector<GroupSummaryRow> group_summary(std::span<const LabeledAssignment> assignments,
                                                  const NumericColumn& values, const TextColumn* groups = nullptr) {
  const int k = cluster_count(assignments);
  struct Acc {
    std::size_t n = 0;
    std::size_t resp = 0;
    double sum = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  for (const auto& a : assignments) {
    std::string g;
    if (groups) {
      const auto it = groups->find(a.participant);
      if (it != groups->end()) g = it->second;
    }
    const auto it = values.find(a.participant);
    const std::optional<double> v = it == values.end() ? std::nullopt : it->second;
    for (int c : {0, a.cluster}) {
      auto& x = acc[{g, c}];
      ++x.n;
      if (v) {
        ++x.resp;
        x.sum += *v;
      }
    }
  }
  std::set<std::string> group_keys;
  for (const auto& [key, _] : acc) group_keys.insert(key.first);
  std::vector<GroupSummaryRow> out;
  for (const auto& g : group_keys) {
    for (int c = 0; c <= k; ++c) {
      const auto it = acc.find({g, c});
      GroupSummaryRow row;
      row.cluster = c;
      row.group = g;
      if (it != acc.end()) {
        row.participants = it->second.n;
        row.responding = it->second.resp;
        if (row.responding) row.mean = it->second.sum / static_cast<double>(row.responding);
        if (row.participants) {
          row.response_rate = 100.0 * static_cast<double>(row.responding) / static_cast<double>(row.participants);
        }
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace trajmix
