#pragma once

// Subcommand implementations behind the trajmix executable. Each command reads
// its inputs through a RunContext, which records SHA-256 digests of every file
// read and written so the run can be described by a manifest.
//
// Needs libcrypto at link time.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "trajmix/association.hpp"
#include "trajmix/em.hpp"
#include "trajmix/error.hpp"
#include "trajmix/ingestion.hpp"
#include "trajmix/intervention.hpp"
#include "trajmix/io.hpp"
#include "trajmix/residuals.hpp"
#include "trajmix/simulate.hpp"
#include "trajmix/state_space.hpp"
#include "trajmix/stationary.hpp"

namespace trajmix::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

/// Bad flags, bad config values or an unusable generator spec.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode { ok = 0, usage = 2, io_error = 3, schema_error = 4, invalid_input = 5, numeric = 6 };

inline int exit_code(Errc c) {
  switch (c) {
    case Errc::io: return io_error;
    case Errc::schema: return schema_error;
    case Errc::invalid_input:
    case Errc::zero_cell:
    case Errc::infeasible: return invalid_input;
    case Errc::degenerate:
    case Errc::multiplicity:
    case Errc::insufficient_data: return numeric;
  }
  return invalid_input;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// 0 quiet, 1 progress (default), 2 detail. Read from TRAJMIX_VERBOSE.
inline int verbosity() {
  const char* v = std::getenv("TRAJMIX_VERBOSE");
  if (!v || !*v) return 1;
  return std::atoi(v);
}

inline void log(int level, const std::string& msg) {
  if (verbosity() >= level) std::cerr << "trajmix: " << msg << '\n';
}

// ---- configuration --------------------------------------------------------

struct RunConfig {
  std::string output_dir = "trajmix-out";
  std::optional<Json> state_space;

  struct Simulate {
    std::string spec;
    std::size_t participants = 100;
    std::size_t steps = 50;
    std::uint64_t seed = 1;
    double missingness = 0;
    std::string start = "2020-01-01";
  } simulate;

  struct Ingest {
    std::string input;
    IngestConfig parse;
  } ingest;

  struct Residuals {
    std::string counts;
    int model = 1;
    double bin_width = 0.5;
  } residuals;

  struct Cluster {
    std::string trajectories;
    std::optional<int> k;
    std::optional<std::pair<int, int>> k_range;
    EmConfig em;
    std::string view = "reduced";
    std::optional<int> max_gap_days;
  } cluster;

  struct Stationary {
    std::string model;
  } stationary;

  struct Intervene {
    std::string model;
    Target target = Target::mood;
    /// nullopt means each cluster's feasible maximum.
    std::optional<double> beta = 0.0;
    double split = 0.8;
    Redistribution redistribution = Redistribution::fixed_split;
  } intervene;

  struct Associate {
    std::string assignments;
    std::string covariates;
    std::vector<std::string> membership;
    std::vector<std::string> numeric;
    std::optional<std::string> group_by;
    bool haldane = false;
    int decimals = 2;
  } associate;

  StateSpace space() const { return state_space ? state_space_from_json(*state_space) : default_state_space(); }
};

inline Target parse_target(const std::string& s) {
  if (s == "mood") return Target::mood;
  if (s == "pain") return Target::pain;
  throw UsageError("target must be 'mood' or 'pain', got '" + s + "'");
}

inline Redistribution parse_redistribution(const std::string& s) {
  if (s == "fixed") return Redistribution::fixed_split;
  if (s == "proportional") return Redistribution::proportional;
  throw UsageError("redistribution must be 'fixed' or 'proportional', got '" + s + "'");
}

inline std::optional<double> parse_beta(const std::string& s) {
  if (s == "max") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("beta must be a number or 'max', got '" + s + "'");
}

inline std::pair<int, int> parse_k_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots != std::string::npos) return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
  }
  throw UsageError("k-range must look like 1..6, got '" + s + "'");
}

inline std::string format_number(double v) { return io::format_real(v); }

inline Json to_json(const RunConfig& c) {
  Json j;
  j["output_dir"] = c.output_dir;
  j["state_space"] = c.state_space ? *c.state_space : to_json(default_state_space());
  j["simulate"] = {{"spec", c.simulate.spec},
                   {"participants", c.simulate.participants},
                   {"steps", c.simulate.steps},
                   {"seed", c.simulate.seed},
                   {"missingness", c.simulate.missingness},
                   {"start", c.simulate.start}};
  const auto& p = c.ingest.parse;
  j["ingest"] = {{"input", c.ingest.input},
                 {"delimiter", std::string(1, p.delimiter)},
                 {"date_format", p.date_format},
                 {"id_column", p.id_column},
                 {"date_column", p.date_column},
                 {"mood_column", p.mood_column},
                 {"pain_column", p.pain_column}};
  j["residuals"] = {{"counts", c.residuals.counts}, {"model", c.residuals.model}, {"bin_width", c.residuals.bin_width}};
  Json cl = io::em_config_json(c.cluster.em);
  cl["trajectories"] = c.cluster.trajectories;
  cl["k"] = c.cluster.k ? Json(*c.cluster.k) : Json(nullptr);
  cl["k_range"] = c.cluster.k_range ? Json::array({c.cluster.k_range->first, c.cluster.k_range->second}) : Json(nullptr);
  cl["view"] = c.cluster.view;
  cl["max_gap_days"] = c.cluster.max_gap_days ? Json(*c.cluster.max_gap_days) : Json(nullptr);
  j["cluster"] = std::move(cl);
  j["stationary"] = {{"model", c.stationary.model}};
  j["intervene"] = {{"model", c.intervene.model},
                    {"target", target_name(c.intervene.target)},
                    {"beta", c.intervene.beta ? Json(*c.intervene.beta) : Json("max")},
                    {"split", c.intervene.split},
                    {"redistribution",
                     c.intervene.redistribution == Redistribution::fixed_split ? "fixed" : "proportional"}};
  j["associate"] = {{"assignments", c.associate.assignments},
                    {"covariates", c.associate.covariates},
                    {"membership", c.associate.membership},
                    {"numeric", c.associate.numeric},
                    {"group_by", c.associate.group_by ? Json(*c.associate.group_by) : Json(nullptr)},
                    {"haldane", c.associate.haldane},
                    {"decimals", c.associate.decimals}};
  return j;
}

namespace detail {

template <class T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

/// Accepts either a config document or a manifest (whose "config" member is used).
inline RunConfig config_from_json(const Json& doc) {
  const Json& j = doc.contains("manifest_version") ? doc.at("config") : doc;
  RunConfig c;
  try {
    using detail::take;
    take(j, "output_dir", c.output_dir);
    if (j.contains("state_space") && !j.at("state_space").is_null()) {
      c.state_space = j.at("state_space");
      state_space_from_json(*c.state_space);
    }
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      take(s, "spec", c.simulate.spec);
      take(s, "participants", c.simulate.participants);
      take(s, "steps", c.simulate.steps);
      take(s, "seed", c.simulate.seed);
      take(s, "missingness", c.simulate.missingness);
      take(s, "start", c.simulate.start);
    }
    if (j.contains("ingest")) {
      const auto& s = j.at("ingest");
      auto& p = c.ingest.parse;
      take(s, "input", c.ingest.input);
      std::string delim(1, p.delimiter);
      take(s, "delimiter", delim);
      if (delim.size() != 1) throw UsageError("ingest.delimiter must be a single character");
      p.delimiter = delim[0];
      take(s, "date_format", p.date_format);
      take(s, "id_column", p.id_column);
      take(s, "date_column", p.date_column);
      take(s, "mood_column", p.mood_column);
      take(s, "pain_column", p.pain_column);
    }
    if (j.contains("residuals")) {
      const auto& s = j.at("residuals");
      take(s, "counts", c.residuals.counts);
      take(s, "model", c.residuals.model);
      take(s, "bin_width", c.residuals.bin_width);
    }
    if (j.contains("cluster")) {
      const auto& s = j.at("cluster");
      c.cluster.em = io::em_config_from_json(s, c.cluster.em);
      take(s, "trajectories", c.cluster.trajectories);
      if (s.contains("k") && !s.at("k").is_null()) c.cluster.k = s.at("k").get<int>();
      if (s.contains("k_range") && !s.at("k_range").is_null()) {
        const auto r = s.at("k_range").get<std::vector<int>>();
        if (r.size() != 2) throw UsageError("cluster.k_range must be [min, max]");
        c.cluster.k_range = std::pair{r[0], r[1]};
      }
      take(s, "view", c.cluster.view);
      if (s.contains("max_gap_days") && !s.at("max_gap_days").is_null()) {
        c.cluster.max_gap_days = s.at("max_gap_days").get<int>();
      }
    }
    if (j.contains("stationary")) take(j.at("stationary"), "model", c.stationary.model);
    if (j.contains("intervene")) {
      const auto& s = j.at("intervene");
      take(s, "model", c.intervene.model);
      if (s.contains("target")) c.intervene.target = parse_target(s.at("target").get<std::string>());
      if (s.contains("beta")) {
        const auto& b = s.at("beta");
        c.intervene.beta = b.is_string() ? parse_beta(b.get<std::string>()) : std::optional<double>(b.get<double>());
      }
      take(s, "split", c.intervene.split);
      if (s.contains("redistribution")) {
        c.intervene.redistribution = parse_redistribution(s.at("redistribution").get<std::string>());
      }
    }
    if (j.contains("associate")) {
      const auto& s = j.at("associate");
      take(s, "assignments", c.associate.assignments);
      take(s, "covariates", c.associate.covariates);
      take(s, "membership", c.associate.membership);
      take(s, "numeric", c.associate.numeric);
      if (s.contains("group_by") && !s.at("group_by").is_null()) c.associate.group_by = s.at("group_by").get<std::string>();
      take(s, "haldane", c.associate.haldane);
      take(s, "decimals", c.associate.decimals);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("config: ") + e.what());
  }
  return c;
}

// ---- run context ----------------------------------------------------------

struct FileDigest {
  std::string path;
  std::string sha256;
};

class RunContext {
 public:
  explicit RunContext(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  std::string read(const std::string& path) {
    if (path.empty()) throw UsageError("an input path is required");
    std::string data = io::slurp(path);
    // Files this run wrote itself are outputs, not inputs.
    const bool own = std::any_of(outputs_.begin(), outputs_.end(),
                                 [&](const FileDigest& f) { return path_of(f.path) == path; });
    if (!own) record(inputs_, path, data);
    return data;
  }

  /// Writes `rel` under the output root; returns the full path.
  template <class Fn>
  std::string write(const std::string& rel, Fn body) {
    std::ostringstream ss;
    body(ss);
    const std::string data = ss.str();
    const fs::path full = root_ / rel;
    std::error_code ec;
    fs::create_directories(full.parent_path(), ec);
    if (ec) throw Error(Errc::io, "cannot create directory " + full.parent_path().string());
    auto out = io::open_output(full.string());
    out << data;
    out.close();
    if (!out) throw Error(Errc::io, "write failed for " + full.string());
    record(outputs_, rel, data);
    log(2, "wrote " + full.string());
    return full.string();
  }

  std::string path_of(const std::string& rel) const { return (root_ / rel).string(); }

  const std::vector<FileDigest>& inputs() const { return inputs_; }
  const std::vector<FileDigest>& outputs() const { return outputs_; }

 private:
  static void record(std::vector<FileDigest>& list, const std::string& path, const std::string& data) {
    const auto digest = sha256_hex(data);
    for (auto& f : list) {
      if (f.path == path) {
        f.sha256 = digest;
        return;
      }
    }
    list.push_back({path, digest});
  }

  fs::path root_;
  std::vector<FileDigest> inputs_;
  std::vector<FileDigest> outputs_;
};

inline Json manifest_json(const std::string& subcommand, const RunConfig& config, const RunContext& ctx) {
  auto list = [](const std::vector<FileDigest>& files) {
    Json a = Json::array();
    for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  Json j;
  j["manifest_version"] = 1;
  j["tool"] = "trajmix";
  j["tool_version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["config"] = to_json(config);
  j["inputs"] = list(ctx.inputs());
  j["outputs"] = list(ctx.outputs());
  return j;
}

inline void write_manifest(const std::string& subcommand, const RunConfig& config, const RunContext& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.root(), ec);
  io::write_json((ctx.root() / "manifest.json").string(), manifest_json(subcommand, config, ctx));
}

// ---- ingest ---------------------------------------------------------------

struct IngestOutputs {
  std::string trajectories;
  std::string compound_counts;
  std::size_t rejected = 0;
};

inline IngestOutputs cmd_ingest(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto space = cfg.space();
  std::istringstream in(ctx.read(cfg.ingest.input));
  const auto parsed = parse_records(in, cfg.ingest.parse, space);
  const auto set = build_trajectories(parsed.records, space);
  const auto summary = summarize_cohort(parsed.records, set);

  IngestOutputs out;
  out.trajectories = ctx.write(prefix + "trajectories.csv", [&](std::ostream& o) { io::write_trajectories(o, set.trajectories); });

  std::vector<RejectedRow> rejects = parsed.rejects;
  rejects.insert(rejects.end(), set.incomplete.begin(), set.incomplete.end());
  std::sort(rejects.begin(), rejects.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
  out.rejected = rejects.size();
  ctx.write(prefix + "rejects.csv", [&](std::ostream& o) { io::write_rejects(o, rejects); });

  std::vector<CountMatrix> reduced;
  std::vector<CountMatrix> compound;
  for (const auto& t : set.trajectories) {
    reduced.push_back(count_transitions(t, space, StateView::reduced));
    compound.push_back(count_transitions(t, space, StateView::compound));
  }
  out.compound_counts = ctx.write(prefix + "compound_counts.csv", [&](std::ostream& o) {
    io::write_count_matrix(o, pool_counts(compound, space.compound_size()), space.compound_labels());
  });
  ctx.write(prefix + "reduced_counts.csv", [&](std::ostream& o) {
    io::write_count_matrix(o, pool_counts(reduced, kReducedStates), reduced_labels());
  });
  ctx.write(prefix + "summary.json", [&](std::ostream& o) { o << to_json(summary).dump(2) << '\n'; });
  log(1, "ingest: " + std::to_string(set.trajectories.size()) + " participants, " +
             std::to_string(summary.transitions) + " transitions, " + std::to_string(out.rejected) + " rejected rows");
  return out;
}

// ---- residuals -------------------------------------------------------------

inline void cmd_residuals(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  if (cfg.residuals.model != 1 && cfg.residuals.model != 2) {
    throw UsageError("unknown null model " + std::to_string(cfg.residuals.model) + " (expected 1 or 2)");
  }
  std::istringstream in(ctx.read(cfg.residuals.counts));
  const auto [labels, counts] = io::read_count_matrix(in);
  NullModelFit fit;
  if (cfg.residuals.model == 1) {
    fit = fit_model1(counts);
  } else {
    const auto space = cfg.space();
    fit = fit_model2(counts, {space.mood_scale().size(), space.pain_scale().size()});
  }
  const auto report = pearson_residuals(counts, fit);

  ctx.write(prefix + "expected.csv", [&](std::ostream& o) { io::write_real_matrix(o, fit.expected, labels); });
  ctx.write(prefix + "residuals.csv", [&](std::ostream& o) { io::write_real_matrix(o, report.residuals, labels); });
  ctx.write(prefix + "null_parameters.csv", [&](std::ostream& o) {
    csv::write_row(o, {"state", "row_total", "stay", "remainder"});
    for (Index i = 0; i < fit.size(); ++i) {
      const auto& s = fit.stay[static_cast<std::size_t>(i)];
      const auto& r = fit.remainder[static_cast<std::size_t>(i)];
      csv::write_row(o, {labels[static_cast<std::size_t>(i)], format_number(fit.row_totals(i)),
                         s ? format_number(*s) : "NA", r ? format_number(*r) : "NA"});
    }
  });
  if (fit.model == NullModel::neighbor) {
    ctx.write(prefix + "neighbors.csv", [&](std::ostream& o) {
      csv::write_row(o, {"from", "to", "step", "probability"});
      for (const auto& nb : fit.neighbors) {
        csv::write_row(o, {labels[static_cast<std::size_t>(nb.source)], labels[static_cast<std::size_t>(nb.target)],
                           step_name(nb.step), format_number(nb.probability)});
      }
    });
  }

  Json diag;
  diag["model"] = null_model_name(fit.model);
  diag["defined_cells"] = report.defined_cells;
  diag["zero_expectation_cells"] = report.zero_expectation_cells;
  diag["above_two"] = report.above_two;
  diag["below_minus_two"] = report.below_minus_two;
  diag["mean"] = report.mean;
  diag["variance"] = report.variance;
  if (report.defined_cells >= 2) {
    const auto nd = residual_normality(report, cfg.residuals.bin_width);
    Json bins = Json::array();
    for (const auto& b : nd.bins) bins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
    Json curve = Json::array();
    for (const auto& p : nd.curve) curve.push_back({{"x", p.x}, {"density", p.density}, {"expected_count", p.expected_count}});
    diag["histogram"] = {{"bin_width", nd.bin_width}, {"bins", bins}, {"normal_curve", curve}};
  } else {
    diag["histogram"] = nullptr;
  }
  ctx.write(prefix + "diagnostics.json", [&](std::ostream& o) { o << diag.dump(2) << '\n'; });
  log(1, std::string("residuals: model ") + std::to_string(cfg.residuals.model) + ", " +
             std::to_string(report.beyond_two()) + " of " + std::to_string(report.defined_cells) + " cells beyond |2|");
}

// ---- cluster ---------------------------------------------------------------

struct ClusterOutputs {
  std::string model;
  std::string assignments;
  int k = 0;
};

/// K picked from a range when no explicit K is given: the K ending the largest NLL drop.
inline int elbow_k(const std::vector<SelectKRow>& rows) {
  if (rows.size() < 2) return rows.front().k;
  int best = rows[1].k;
  double drop = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double d = rows[i - 1].negative_log_likelihood - rows[i].negative_log_likelihood;
    if (d > drop) {
      drop = d;
      best = rows[i].k;
    }
  }
  return best;
}

inline ClusterOutputs cmd_cluster(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto& c = cfg.cluster;
  if (!c.k && !c.k_range) throw UsageError("cluster needs --k or --k-range");
  if (c.view != "reduced" && c.view != "compound") throw UsageError("view must be 'reduced' or 'compound'");
  const auto space = cfg.space();
  std::istringstream in(ctx.read(c.trajectories));
  const auto trajectories = io::read_trajectories(in, space);
  const auto view = c.view == "reduced" ? StateView::reduced : StateView::compound;
  const auto labels = view == StateView::reduced ? reduced_labels() : space.compound_labels();

  std::vector<std::string> ids;
  std::vector<CountMatrix> counts;
  for (const auto& t : trajectories) {
    ids.push_back(t.participant);
    counts.push_back(count_transitions(t, space, view, TransitionPolicy{c.max_gap_days}));
  }

  int k = c.k.value_or(0);
  std::optional<EmFit> chosen;
  if (c.k_range) {
    std::vector<EmFit> fits;
    const auto rows = select_k(counts, c.k_range->first, c.k_range->second, c.em, &fits);
    ctx.write(prefix + "nll.csv", [&](std::ostream& o) {
      csv::write_row(o, {"k", "negative_log_likelihood", "seed", "iterations", "converged"});
      for (const auto& r : rows) {
        csv::write_row(o, {std::to_string(r.k), format_number(r.negative_log_likelihood), std::to_string(r.seed),
                           std::to_string(r.iterations), r.converged ? "1" : "0"});
      }
    });
    if (!c.k) k = elbow_k(rows);
    for (auto& f : fits)
      if (f.model.k == k) chosen = std::move(f);
  }
  if (!chosen) chosen = em_fit(counts, k, c.em);
  const auto& fit = *chosen;

  ClusterOutputs out;
  out.k = k;
  out.model = ctx.write(prefix + "model.json", [&](std::ostream& o) { o << io::model_json(fit, labels, c.em).dump(2) << '\n'; });
  out.assignments = ctx.write(prefix + "assignments.csv", [&](std::ostream& o) { io::write_assignments(o, ids, fit.model); });

  const auto pooled = TransitionMatrix::from_counts(pool_counts(counts, static_cast<Index>(labels.size())));
  const auto ratios = transition_ratio(fit.model, pooled);
  ctx.write(prefix + "ratios.csv", [&](std::ostream& o) {
    csv::write_row(o, {"cluster", "from", "to", "component", "pooled", "ratio", "flagged"});
    for (std::size_t kk = 0; kk < ratios.size(); ++kk) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = 0; j < labels.size(); ++j) {
          const auto ii = static_cast<Index>(i);
          const auto jj = static_cast<Index>(j);
          csv::write_row(o, {std::to_string(kk + 1), labels[i], labels[j], format_number(fit.model.components[kk](ii, jj)),
                             format_number(pooled(ii, jj)), format_number(ratios[kk].ratio(ii, jj)),
                             ratios[kk].flagged(ii, jj) ? "1" : "0"});
        }
      }
    }
  });
  log(1, "cluster: K=" + std::to_string(k) + ", log-likelihood " + format_number(fit.trace.log_likelihood.back()) +
             (fit.trace.converged ? "" : " (not converged)"));
  return out;
}

// ---- stationary -------------------------------------------------------------

inline void cmd_stationary(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto doc = io::model_from_json(Json::parse(ctx.read(cfg.stationary.model)));
  ctx.write(prefix + "stationary.csv", [&](std::ostream& o) {
    std::vector<std::string> header{"cluster", "weight"};
    header.insert(header.end(), doc.states.begin(), doc.states.end());
    header.insert(header.end(), {"residual", "power_check"});
    csv::write_row(o, header);
    for (std::size_t k = 0; k < doc.components.size(); ++k) {
      const auto& m = doc.components[k];
      if (!is_regular(m)) {
        throw Error(Errc::multiplicity, "cluster " + std::to_string(k + 1) + ": " + describe_structure(m));
      }
      const auto s = stationary(m);
      std::vector<std::string> row{std::to_string(k + 1), format_number(doc.weights[k])};
      for (Index i = 0; i < s.x.size(); ++i) row.push_back(format_number(s.x(i)));
      row.push_back(format_number(s.residual));
      row.push_back(format_number(s.cross_check));
      csv::write_row(o, row);
    }
  });
  log(1, "stationary: " + std::to_string(doc.components.size()) + " clusters");
}

// ---- intervene --------------------------------------------------------------

inline std::vector<InterventionResult> cmd_intervene(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto& iv = cfg.intervene;
  const auto doc = io::model_from_json(Json::parse(ctx.read(iv.model)));
  if (doc.states != reduced_labels()) {
    throw Error(Errc::invalid_input, "interventions need a model over the states BH,BL,GH,GL in that order");
  }
  InterventionSpec spec;
  spec.target = iv.target;
  spec.beta = iv.beta.value_or(0.0);
  spec.beta_at_max = !iv.beta.has_value();
  spec.split = iv.split;
  spec.redistribution = iv.redistribution;
  if (!(spec.split > 0 && spec.split < 1)) throw UsageError("split must lie in (0, 1)");

  std::vector<InterventionResult> results;
  for (std::size_t k = 0; k < doc.components.size(); ++k) {
    try {
      results.push_back(intervene(doc.components[k], spec, static_cast<int>(k) + 1));
    } catch (const InfeasibleBetaError& e) {
      throw Error(Errc::infeasible, "cluster " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  ctx.write(prefix + "interventions.csv", [&](std::ostream& o) {
    csv::write_row(o, {"cluster", "target", "beta", "state", "before", "after", "delta"});
    for (const auto& r : results) {
      for (std::size_t i = 0; i < doc.states.size(); ++i) {
        const auto ii = static_cast<Index>(i);
        csv::write_row(o, {std::to_string(r.cluster), target_name(iv.target), format_number(r.beta), doc.states[i],
                           format_number(r.before.x(ii)), format_number(r.after.x(ii)), format_number(r.delta(ii))});
      }
    }
  });
  ctx.write(prefix + "modified_matrices.csv", [&](std::ostream& o) {
    csv::write_row(o, {"cluster", "from", "to", "original", "modified"});
    for (const auto& r : results) {
      for (std::size_t i = 0; i < doc.states.size(); ++i)
        for (std::size_t j = 0; j < doc.states.size(); ++j) {
          const auto ii = static_cast<Index>(i);
          const auto jj = static_cast<Index>(j);
          csv::write_row(o, {std::to_string(r.cluster), doc.states[i], doc.states[j], format_number(r.original(ii, jj)),
                             format_number(r.modified(ii, jj))});
        }
    }
  });
  log(1, std::string("intervene: ") + target_name(iv.target) + " on " + std::to_string(results.size()) + " clusters");
  return results;
}

// ---- associate ---------------------------------------------------------------

inline void cmd_associate(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto& a = cfg.associate;
  std::istringstream ain(ctx.read(a.assignments));
  const auto assignments = io::read_assignments(ain);
  std::istringstream cin(ctx.read(a.covariates));
  const auto cov = io::read_covariates(cin);

  // Unlisted columns are treated as membership columns.
  std::vector<std::string> membership = a.membership;
  if (membership.empty()) {
    for (const auto& col : cov.columns) {
      const bool other = std::find(a.numeric.begin(), a.numeric.end(), col) != a.numeric.end() ||
                         (a.group_by && *a.group_by == col);
      if (!other) membership.push_back(col);
    }
  }

  const int k = cluster_count(assignments);
  std::vector<io::OddsRatioRow> rows;
  int row_no = 0;
  for (const auto& family : membership) {
    const auto column = cov.membership(family);
    for (int c = 1; c <= k; ++c) {
      for (const auto& v : covariate_values(column)) {
        io::OddsRatioRow r{++row_no, c, v, std::nullopt};
        const auto t = build_table(assignments, column, c, v);
        try {
          r.result = log_odds_ratio(t.table, a.haldane);
        } catch (const ZeroCellError& e) {
          log(2, "associate: cluster " + std::to_string(c) + " x " + v + ": " + e.what());
        }
        rows.push_back(std::move(r));
      }
    }
  }
  ctx.write(prefix + "odds_ratios.csv", [&](std::ostream& o) { io::write_odds_ratios(o, rows, a.decimals); });

  ctx.write(prefix + "proportions.csv", [&](std::ostream& o) {
    csv::write_row(o, {"family", "kind", "cluster", "covariate", "count", "denominator", "proportion"});
    for (const auto& family : membership) {
      const auto p = covariate_proportions(assignments, cov.membership(family));
      for (const auto& r : p.within_cluster) {
        csv::write_row(o, {family, "within_cluster", std::to_string(r.cluster), r.covariate, std::to_string(r.count),
                           std::to_string(r.reporters), r.no_reporters ? "NA" : format_number(r.proportion)});
      }
      for (const auto& r : p.across_clusters) {
        csv::write_row(o, {family, "across_clusters", std::to_string(r.cluster), r.covariate, std::to_string(r.count),
                           std::to_string(r.covariate_total),
                           r.covariate_total ? format_number(r.proportion) : "NA"});
      }
    }
  });

  if (!a.numeric.empty()) {
    std::optional<TextColumn> groups;
    if (a.group_by) groups = cov.text(*a.group_by);
    ctx.write(prefix + "group_summary.csv", [&](std::ostream& o) {
      csv::write_row(o, {"variable", "group", "cluster", "participants", "responding", "mean", "response_rate"});
      for (const auto& name : a.numeric) {
        for (const auto& r : group_summary(assignments, cov.numeric(name), groups ? &*groups : nullptr)) {
          csv::write_row(o, {name, r.group, r.cluster == 0 ? "all" : std::to_string(r.cluster),
                             std::to_string(r.participants), std::to_string(r.responding),
                             r.mean ? format_number(*r.mean) : "NA", format_number(r.response_rate)});
        }
      }
    });
  }
  log(1, "associate: " + std::to_string(rows.size()) + " odds-ratio rows");
}

// ---- simulate ---------------------------------------------------------------

struct SimulateOutputs {
  std::string records;
  std::string labels;
  std::string covariates;
};

inline SimulateOutputs cmd_simulate(const RunConfig& cfg, RunContext& ctx, const std::string& prefix = "") {
  const auto& s = cfg.simulate;
  const auto doc = Json::parse(ctx.read(s.spec), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::schema, "generator spec is not valid JSON");
  GeneratorSpec spec;
  CohortOptions opt;
  try {
    spec = io::generator_from_json(doc);
    validate(spec);
  } catch (const Error& e) {
    throw UsageError(std::string("invalid generator spec: ") + e.what());
  }
  opt.participants = s.participants;
  opt.steps = s.steps;
  opt.seed = s.seed;
  opt.missingness = s.missingness;
  const auto start = parse_date(s.start, "%Y-%m-%d");
  if (!start) throw UsageError("simulate.start must be a YYYY-MM-DD date");
  opt.start = *start;
  if (!(opt.missingness >= 0 && opt.missingness <= 1)) throw UsageError("missingness must lie in [0, 1]");

  const auto cohort = simulate_cohort(spec, cfg.space(), opt);
  SimulateOutputs out;
  out.records = ctx.write(prefix + "records.csv", [&](std::ostream& o) { io::write_records(o, cohort.rows); });
  out.labels = ctx.write(prefix + "labels.csv", [&](std::ostream& o) {
    csv::write_row(o, {"participant_id", "cluster"});
    for (const auto& p : cohort.participants) csv::write_row(o, {p.id, std::to_string(p.cluster)});
  });
  out.covariates = ctx.write(prefix + "covariates.csv", [&](std::ostream& o) { io::write_covariates(o, cohort.participants); });
  log(1, "simulate: " + std::to_string(cohort.participants.size()) + " participants, " +
             std::to_string(cohort.rows.size()) + " rows");
  return out;
}

// ---- pipeline ---------------------------------------------------------------

/// simulate (when a generator spec is configured) -> ingest -> residuals ->
/// cluster -> stationary -> intervene -> associate (when covariates exist).
inline void cmd_pipeline(const RunConfig& cfg, RunContext& ctx) {
  RunConfig stage = cfg;
  if (!cfg.simulate.spec.empty()) {
    const auto sim = cmd_simulate(stage, ctx, "simulate/");
    stage.ingest.input = sim.records;
    if (stage.associate.covariates.empty()) stage.associate.covariates = sim.covariates;
  }
  const auto ing = cmd_ingest(stage, ctx, "ingest/");
  stage.residuals.counts = ing.compound_counts;
  cmd_residuals(stage, ctx, "residuals/");
  stage.cluster.trajectories = ing.trajectories;
  const auto cl = cmd_cluster(stage, ctx, "cluster/");
  stage.stationary.model = cl.model;
  cmd_stationary(stage, ctx, "stationary/");
  if (stage.cluster.view == "reduced") {
    stage.intervene.model = cl.model;
    cmd_intervene(stage, ctx, "intervene/");
  } else {
    log(1, "pipeline: interventions skipped for the compound view");
  }
  if (!stage.associate.covariates.empty()) {
    stage.associate.assignments = cl.assignments;
    cmd_associate(stage, ctx, "associate/");
  } else {
    log(1, "pipeline: no covariate file, association skipped");
  }
}

}  // namespace trajmix::cli
