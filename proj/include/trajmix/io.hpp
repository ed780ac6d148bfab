#pragma once

// Plain-text file formats. All tables are comma-delimited with a header row;
// documents are JSON. Reals are written in shortest round-trip form so a
// reread value is bit-identical to the one written.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajmix/association.hpp"
#include "trajmix/csv.hpp"
#include "trajmix/em.hpp"
#include "trajmix/error.hpp"
#include "trajmix/ingestion.hpp"
#include "trajmix/matrix.hpp"
#include "trajmix/simulate.hpp"
#include "trajmix/state_space.hpp"

namespace trajmix::io {

using Json = nlohmann::ordered_json;

inline std::string format_real(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline double parse_real(const std::string& s) {
  const auto t = csv::trim(s);
  if (t == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (t == "Inf") return std::numeric_limits<double>::infinity();
  if (t == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw Error(Errc::schema, "not a number: '" + t + "'");
  }
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "file not found or unreadable: " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  return out;
}

inline std::string slurp(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const std::string& path) {
  const auto text = slurp(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

// ---- square labelled matrices -------------------------------------------
//
//   from,<label_1>,...,<label_n>
//   <label_1>,v11,...,v1n

template <class Cell>
void write_labelled(std::ostream& out, const std::vector<std::string>& labels, Cell cell) {
  std::vector<std::string> row{"from"};
  row.insert(row.end(), labels.begin(), labels.end());
  csv::write_row(out, row);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    row.assign({labels[i]});
    for (std::size_t j = 0; j < labels.size(); ++j) row.push_back(cell(static_cast<Index>(i), static_cast<Index>(j)));
    csv::write_row(out, row);
  }
}

inline void write_count_matrix(std::ostream& out, const CountMatrix& c, const std::vector<std::string>& labels) {
  write_labelled(out, labels, [&](Index i, Index j) { return std::to_string(c(i, j)); });
}

inline void write_real_matrix(std::ostream& out, const RealMatrix& m, const std::vector<std::string>& labels) {
  write_labelled(out, labels, [&](Index i, Index j) { return format_real(m(i, j)); });
}

struct LabelledTable {
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> cells;
};

inline LabelledTable read_labelled(std::istream& in) {
  std::string line;
  if (!csv::read_line(in, line)) throw Error(Errc::schema, "empty matrix file");
  auto header = csv::split_line(line, ',');
  if (header.empty() || csv::trim(header[0]) != "from") throw Error(Errc::schema, "matrix header must start with 'from'");
  LabelledTable t;
  for (std::size_t i = 1; i < header.size(); ++i) t.labels.push_back(csv::trim(header[i]));
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_line(line, ',');
    if (fields.size() != header.size()) throw Error(Errc::schema, "matrix row has the wrong field count");
    const auto r = t.cells.size();
    if (r >= t.labels.size() || csv::trim(fields[0]) != t.labels[r]) {
      throw Error(Errc::schema, "matrix row labels must repeat the column labels in order");
    }
    t.cells.emplace_back(fields.begin() + 1, fields.end());
  }
  if (t.cells.size() != t.labels.size()) throw Error(Errc::schema, "matrix is not square");
  return t;
}

inline std::pair<std::vector<std::string>, CountMatrix> read_count_matrix(std::istream& in) {
  auto t = read_labelled(in);
  const auto n = static_cast<Index>(t.labels.size());
  CountArray a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const auto s = csv::trim(t.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      std::int64_t v = 0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw Error(Errc::schema, "count cell is not an integer: '" + s + "'");
      }
      a(i, j) = v;
    }
  }
  return {std::move(t.labels), CountMatrix::from_array(std::move(a))};
}

inline std::pair<std::vector<std::string>, RealMatrix> read_real_matrix(std::istream& in) {
  auto t = read_labelled(in);
  const auto n = static_cast<Index>(t.labels.size());
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = parse_real(t.cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  return {std::move(t.labels), std::move(m)};
}

// ---- trajectories --------------------------------------------------------
//
//   participant_id,date,mood,pain,state

inline void write_trajectories(std::ostream& out, const std::vector<Trajectory>& ts) {
  csv::write_row(out, {"participant_id", "date", "mood", "pain", "state"});
  for (const auto& t : ts) {
    for (const auto& e : t.entries) {
      csv::write_row(out, {t.participant, format_date(e.date), std::to_string(e.scores.mood),
                           std::to_string(e.scores.pain), label_of(e.state)});
    }
  }
}

/// Reads trajectories back, re-deriving reduced states from the scores and
/// checking them against the stored labels.
inline std::vector<Trajectory> read_trajectories(std::istream& in, const StateSpace& space) {
  std::string line;
  if (!csv::read_line(in, line)) throw Error(Errc::schema, "empty trajectories file");
  const auto header = csv::split_line(line, ',');
  const std::vector<std::string> expected{"participant_id", "date", "mood", "pain", "state"};
  if (header != expected) throw Error(Errc::schema, "trajectories header must be " + std::string("participant_id,date,mood,pain,state"));
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> slot;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line, ',');
    const auto where = " at line " + std::to_string(line_no);
    if (f.size() != 5) throw Error(Errc::schema, "wrong field count" + where);
    const auto date = parse_date(f[1], "%Y-%m-%d");
    if (!date) throw Error(Errc::schema, "unparseable date" + where);
    CompoundState cs;
    try {
      cs = {std::stoi(f[2]), std::stoi(f[3])};
    } catch (const std::exception&) {
      throw Error(Errc::schema, "score not an integer" + where);
    }
    const auto state = space.binarize(cs);
    if (label_of(state) != f[4]) throw Error(Errc::schema, "state label disagrees with scores" + where);
    auto [it, fresh] = slot.emplace(f[0], out.size());
    if (fresh) out.push_back({f[0], {}});
    auto& entries = out[it->second].entries;
    if (!entries.empty() && !(entries.back().date < *date)) {
      throw Error(Errc::schema, "dates must be strictly increasing per participant" + where);
    }
    entries.push_back({*date, cs, state});
  }
  return out;
}

// ---- raw records (simulator output) -------------------------------------

inline void write_records(std::ostream& out, const std::vector<SyntheticRow>& rows) {
  csv::write_row(out, {"participant_id", "date", "mood", "pain"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.participant, format_date(r.date), r.mood ? std::to_string(*r.mood) : "",
                         r.pain ? std::to_string(*r.pain) : ""});
  }
}

inline void write_rejects(std::ostream& out, const std::vector<RejectedRow>& rejects) {
  csv::write_row(out, {"line", "reason"});
  for (const auto& r : rejects) csv::write_row(out, {std::to_string(r.line), r.reason});
}

// ---- covariates ----------------------------------------------------------
//
//   participant_id,<column>,...
// Membership columns hold ';'-separated values. An empty field means the
// participant did not answer; the token `none` means they answered with no
// value.

inline constexpr const char* kNoneToken = "none";

struct CovariateFile {
  std::vector<std::string> participants;
  std::map<std::string, std::map<std::string, std::string>> raw;  // column -> participant -> text
  std::vector<std::string> columns;

  MembershipColumn membership(const std::string& column) const {
    MembershipColumn out;
    const auto it = raw.find(column);
    if (it == raw.end()) throw Error(Errc::schema, "covariate file has no column '" + column + "'");
    for (const auto& [id, text] : it->second) {
      if (csv::trim(text).empty()) {
        out[id] = std::nullopt;
        continue;
      }
      std::set<std::string> values;
      for (auto& v : csv::split_list(text)) {
        if (v != kNoneToken) values.insert(std::move(v));
      }
      out[id] = std::move(values);
    }
    return out;
  }

  NumericColumn numeric(const std::string& column) const {
    NumericColumn out;
    const auto it = raw.find(column);
    if (it == raw.end()) throw Error(Errc::schema, "covariate file has no column '" + column + "'");
    for (const auto& [id, text] : it->second) {
      const auto t = csv::trim(text);
      if (t.empty() || t == "NA") {
        out[id] = std::nullopt;
        continue;
      }
      const double v = parse_real(t);
      out[id] = v;
    }
    return out;
  }

  TextColumn text(const std::string& column) const {
    const auto it = raw.find(column);
    if (it == raw.end()) throw Error(Errc::schema, "covariate file has no column '" + column + "'");
    TextColumn out;
    for (const auto& [id, t] : it->second) out[id] = csv::trim(t);
    return out;
  }
};

inline CovariateFile read_covariates(std::istream& in, const std::string& id_column = "participant_id") {
  std::string line;
  if (!csv::read_line(in, line)) throw Error(Errc::schema, "empty covariate file");
  auto header = csv::split_line(line, ',');
  for (auto& h : header) h = csv::trim(h);
  std::size_t id = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == id_column) id = i;
  if (id == header.size()) throw Error(Errc::schema, "covariate file lacks the '" + id_column + "' column");
  CovariateFile f;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != id) f.columns.push_back(header[i]);
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line, ',');
    if (fields.size() != header.size()) {
      throw Error(Errc::schema, "covariate row has the wrong field count at line " + std::to_string(line_no));
    }
    const auto pid = csv::trim(fields[id]);
    f.participants.push_back(pid);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != id) f.raw[header[i]][pid] = fields[i];
  }
  return f;
}

inline void write_covariates(std::ostream& out, const std::vector<SyntheticParticipant>& parts) {
  std::vector<std::string> header{"participant_id"};
  if (parts.empty()) {
    csv::write_row(out, header);
    return;
  }
  const auto& first = parts.front();
  for (const auto& [name, _] : first.memberships) header.push_back(name);
  for (const auto& [name, _] : first.numeric) header.push_back(name);
  for (const auto& [name, _] : first.groups) header.push_back(name);
  csv::write_row(out, header);
  for (const auto& p : parts) {
    std::vector<std::string> row{p.id};
    for (const auto& [name, values] : p.memberships) {
      if (!values) {
        row.emplace_back();
      } else if (values->empty()) {
        row.emplace_back(kNoneToken);
      } else {
        std::string joined;
        for (const auto& v : *values) joined += (joined.empty() ? "" : ";") + v;
        row.push_back(std::move(joined));
      }
    }
    for (const auto& [name, v] : p.numeric) row.push_back(v ? format_real(*v) : "");
    for (const auto& [name, g] : p.groups) row.push_back(g);
    csv::write_row(out, row);
  }
}

// ---- assignments ----------------------------------------------------------
//
//   participant_id,cluster,tie,gamma_1,...,gamma_K

inline void write_assignments(std::ostream& out, const std::vector<std::string>& ids, const MixtureModel& model) {
  std::vector<std::string> header{"participant_id", "cluster", "tie"};
  for (int k = 1; k <= model.k; ++k) header.push_back("gamma_" + std::to_string(k));
  csv::write_row(out, header);
  const auto assignments = assign_clusters(model);
  for (const auto& a : assignments) {
    std::vector<std::string> row{ids[a.participant], std::to_string(a.cluster), a.tie ? "1" : "0"};
    for (int k = 0; k < model.k; ++k) row.push_back(format_real(model.responsibilities(static_cast<Index>(a.participant), k)));
    csv::write_row(out, row);
  }
}

inline std::vector<LabeledAssignment> read_assignments(std::istream& in) {
  std::string line;
  if (!csv::read_line(in, line)) throw Error(Errc::schema, "empty assignments file");
  const auto header = csv::split_line(line, ',');
  if (header.size() < 2 || header[0] != "participant_id" || header[1] != "cluster") {
    throw Error(Errc::schema, "assignments header must start with participant_id,cluster");
  }
  std::vector<LabeledAssignment> out;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line, ',');
    if (f.size() != header.size()) throw Error(Errc::schema, "assignments row has the wrong field count");
    int c = 0;
    try {
      c = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw Error(Errc::schema, "cluster is not an integer: '" + f[1] + "'");
    }
    if (c < 1) throw Error(Errc::schema, "cluster indices are 1-based");
    out.push_back({csv::trim(f[0]), c});
  }
  return out;
}

// ---- mixture model / generator spec document ------------------------------

inline Json matrix_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline RealMatrix matrix_from_json(const Json& j) {
  const auto n = static_cast<Index>(j.size());
  RealMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != n) throw Error(Errc::schema, "component matrix is not square");
    for (Index k = 0; k < n; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

inline Json em_config_json(const EmConfig& c) {
  return Json{{"seed", c.seed},
              {"epsilon", c.epsilon},
              {"max_iterations", c.max_iterations},
              {"smoothing", c.smoothing},
              {"restarts", c.restarts}};
}

inline EmConfig em_config_from_json(const Json& j, EmConfig c = {}) {
  c.seed = j.value("seed", c.seed);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.smoothing = j.value("smoothing", c.smoothing);
  c.restarts = j.value("restarts", c.restarts);
  return c;
}

inline Json model_json(const EmFit& fit, const std::vector<std::string>& states, const EmConfig& config) {
  Json j;
  j["format"] = "trajmix-mixture";
  j["version"] = 1;
  j["states"] = states;
  j["k"] = fit.model.k;
  j["weights"] = fit.model.weights;
  Json comps = Json::array();
  for (const auto& m : fit.model.components) comps.push_back(matrix_json(m.probabilities()));
  j["components"] = std::move(comps);
  j["fit"] = {{"seed", fit.trace.seed},
              {"log_likelihood", fit.trace.log_likelihood.back()},
              {"iterations", fit.trace.iterations},
              {"converged", fit.trace.converged},
              {"final_change", fit.trace.final_change},
              {"raw_order", fit.trace.raw_order},
              {"restart_log_likelihoods", fit.restart_log_likelihoods}};
  j["config"] = em_config_json(config);
  return j;
}

struct ModelDocument {
  std::vector<std::string> states;
  std::vector<double> weights;
  std::vector<TransitionMatrix> components;
};

inline ModelDocument model_from_json(const Json& j) {
  try {
    ModelDocument d;
    d.states = j.at("states").get<std::vector<std::string>>();
    d.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& c : j.at("components")) d.components.push_back(TransitionMatrix::from_probabilities(matrix_from_json(c)));
    if (d.weights.size() != d.components.size()) throw Error(Errc::schema, "weights and components differ in count");
    for (const auto& m : d.components) {
      if (m.size() != static_cast<Index>(d.states.size())) throw Error(Errc::schema, "component size differs from state count");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("model document: ") + e.what());
  }
}

inline CovariatePlan covariate_plan_from_json(const Json& j) {
  CovariatePlan plan;
  try {
    if (j.contains("memberships")) {
      for (const auto& [name, m] : j.at("memberships").items()) {
        MembershipPlan p;
        p.response_rate = m.value("response_rate", 1.0);
        for (const auto& [cov, prev] : m.at("prevalence").items()) p.prevalence[cov] = prev.get<std::vector<double>>();
        plan.memberships[name] = std::move(p);
      }
    }
    if (j.contains("numeric")) {
      for (const auto& [name, m] : j.at("numeric").items()) {
        plan.numeric[name] = {m.value("response_rate", 1.0), m.at("mean").get<std::vector<double>>(), m.value("sd", 1.0)};
      }
    }
    if (j.contains("groups")) {
      for (const auto& [name, m] : j.at("groups").items()) {
        plan.groups[name] = {m.at("levels").get<std::vector<std::string>>(),
                             m.at("probabilities").get<std::vector<double>>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("covariate plan: ") + e.what());
  }
  return plan;
}

inline GeneratorSpec generator_from_json(const Json& j) {
  auto d = model_from_json(j);
  GeneratorSpec g{std::move(d.states), std::move(d.weights), std::move(d.components), {}};
  if (j.contains("covariates")) g.covariates = covariate_plan_from_json(j.at("covariates"));
  return g;
}

// ---- odds-ratio tables -----------------------------------------------------
//
//   Row,Cluster,Covariate,Log OR,Std. Error,CI low,CI high
//   22,Cluster 2,Fibromyalgia,1.64,0.10,1.45,1.84

inline const std::vector<std::string>& odds_ratio_header() {
  static const std::vector<std::string> h{"Row", "Cluster", "Covariate", "Log OR", "Std. Error", "CI low", "CI high"};
  return h;
}

struct OddsRatioRow {
  int row = 0;
  int cluster = 0;
  std::string covariate;
  /// Empty when the table had a zero cell and no correction was requested.
  std::optional<OddsRatioResult> result;
};

inline void write_odds_ratios(std::ostream& out, const std::vector<OddsRatioRow>& rows, int decimals = 4) {
  csv::write_row(out, odds_ratio_header());
  for (const auto& r : rows) {
    std::vector<std::string> f{std::to_string(r.row), "Cluster " + std::to_string(r.cluster), r.covariate};
    if (r.result) {
      for (double v : {r.result->log_or, r.result->std_error, r.result->ci_low, r.result->ci_high})
        f.push_back(format_fixed(v, decimals));
    } else {
      f.insert(f.end(), 4, "NA");
    }
    csv::write_row(out, f);
  }
}

inline std::vector<OddsRatioRow> read_odds_ratios(std::istream& in) {
  std::string line;
  if (!csv::read_line(in, line) || csv::split_line(line, ',') != odds_ratio_header()) {
    throw Error(Errc::schema, "odds-ratio header must be Row,Cluster,Covariate,Log OR,Std. Error,CI low,CI high");
  }
  std::vector<OddsRatioRow> out;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_line(line, ',');
    if (f.size() != 7) throw Error(Errc::schema, "odds-ratio row has the wrong field count");
    OddsRatioRow r;
    try {
      r.row = std::stoi(f[0]);
      if (f[1].rfind("Cluster ", 0) != 0) throw Error(Errc::schema, "cluster cell must read 'Cluster <k>'");
      r.cluster = std::stoi(f[1].substr(8));
    } catch (const std::invalid_argument&) {
      throw Error(Errc::schema, "malformed odds-ratio row: " + line);
    }
    r.covariate = f[2];
    if (f[3] != "NA") r.result = OddsRatioResult{parse_real(f[3]), parse_real(f[4]), parse_real(f[5]), parse_real(f[6]), false};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace trajmix::io
