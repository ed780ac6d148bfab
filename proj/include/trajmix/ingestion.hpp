#pragma once

// Raw daily records -> filtered trajectories -> transition counts.

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "trajmix/csv.hpp"
#include "trajmix/error.hpp"
#include "trajmix/matrix.hpp"
#include "trajmix/state_space.hpp"

namespace trajmix {

using Date = std::chrono::sys_days;

/// Parses a calendar day with a strftime-style format; rejects impossible dates.
inline std::optional<Date> parse_date(const std::string& text, const std::string& format) {
  std::tm tm{};
  std::istringstream in(text);
  in >> std::get_time(&tm, format.c_str());
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{tm.tm_year + 1900},
                                        std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)},
                                        std::chrono::day{static_cast<unsigned>(tm.tm_mday)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

struct RawRecord {
  std::string participant;
  Date date;
  std::optional<int> mood;
  std::optional<int> pain;
  std::map<std::string, std::string> covariates;
  std::size_t line = 0;

  bool complete() const { return mood.has_value() && pain.has_value(); }
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestConfig {
  char delimiter = ',';
  std::string date_format = "%Y-%m-%d";
  std::string id_column = "participant_id";
  std::string date_column = "date";
  std::string mood_column = "mood";
  std::string pain_column = "pain";
};

struct ParseResult {
  std::vector<RawRecord> records;
  std::vector<RejectedRow> rejects;
};

namespace detail {

enum class ScoreParse { ok, absent, not_integer, out_of_range };

inline ScoreParse parse_score(const std::string& field, const OrdinalScale& scale, std::optional<int>& out) {
  const auto t = csv::trim(field);
  if (t.empty()) {
    out.reset();
    return ScoreParse::absent;
  }
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(t, &pos);
  } catch (const std::exception&) {
    return ScoreParse::not_integer;
  }
  if (pos != t.size()) return ScoreParse::not_integer;
  if (!scale.contains(v)) return ScoreParse::out_of_range;
  out = v;
  return ScoreParse::ok;
}

}  // namespace detail

/// One record per well-formed data row. Malformed rows land in `rejects` with
/// their 1-based line number. A repeated (participant, date) pair is an error.
inline ParseResult parse_records(std::istream& in, const IngestConfig& config, const StateSpace& space) {
  if (!in) throw Error(Errc::io, "input stream is not readable");
  std::string line;
  if (!csv::read_line(in, line)) throw Error(Errc::schema, "input has no header row");
  auto header = csv::split_line(line, config.delimiter);
  for (auto& h : header) h = csv::trim(h);

  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(Errc::schema, "missing mandatory column '" + name + "'");
  };
  const std::size_t id_col = column(config.id_column);
  const std::size_t date_col = column(config.date_column);
  const std::size_t mood_col = column(config.mood_column);
  const std::size_t pain_col = column(config.pain_column);

  ParseResult result;
  std::map<std::pair<std::string, Date>, std::size_t> seen;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split_line(line, config.delimiter);
    auto reject = [&](std::string reason) { result.rejects.push_back({line_no, std::move(reason)}); };
    if (fields.size() != header.size()) {
      reject("wrong field count");
      continue;
    }
    RawRecord rec;
    rec.line = line_no;
    rec.participant = csv::trim(fields[id_col]);
    if (rec.participant.empty()) {
      reject("empty participant id");
      continue;
    }
    const auto date = parse_date(csv::trim(fields[date_col]), config.date_format);
    if (!date) {
      reject("unparseable date");
      continue;
    }
    rec.date = *date;
    const auto mood = detail::parse_score(fields[mood_col], space.mood_scale(), rec.mood);
    const auto pain = detail::parse_score(fields[pain_col], space.pain_scale(), rec.pain);
    if (mood == detail::ScoreParse::not_integer || pain == detail::ScoreParse::not_integer) {
      reject("score not an integer");
      continue;
    }
    if (mood == detail::ScoreParse::out_of_range || pain == detail::ScoreParse::out_of_range) {
      reject("score out of range");
      continue;
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == id_col || i == date_col || i == mood_col || i == pain_col) continue;
      rec.covariates.emplace(header[i], csv::trim(fields[i]));
    }
    const auto [it, fresh] = seen.emplace(std::make_pair(rec.participant, rec.date), line_no);
    if (!fresh) {
      throw Error(Errc::invalid_input, "duplicate (participant, date) = (" + rec.participant + ", " +
                                           format_date(rec.date) + ") at line " + std::to_string(line_no) +
                                           ", first seen at line " + std::to_string(it->second));
    }
    result.records.push_back(std::move(rec));
  }
  if (in.bad()) throw Error(Errc::io, "read error on input stream");
  return result;
}

struct TrajectoryEntry {
  Date date;
  CompoundState scores;
  ReducedState state;
};

/// One participant's complete days, dates strictly increasing.
struct Trajectory {
  std::string participant;
  std::vector<TrajectoryEntry> entries;
};

struct TrajectorySet {
  std::vector<Trajectory> trajectories;
  /// Rows dropped because mood or pain was missing.
  std::vector<RejectedRow> incomplete;
  /// Participants with no complete day at all.
  std::vector<std::string> excluded_participants;
};

/// Groups records by participant (first-appearance order), drops days lacking
/// either score and sorts by date. Consecutive complete reports are adjacent
/// regardless of the calendar gap between them.
inline TrajectorySet build_trajectories(std::span<const RawRecord> records, const StateSpace& space) {
  TrajectorySet out;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::string> order;
  std::vector<std::vector<const RawRecord*>> grouped;
  for (const auto& r : records) {
    auto [it, fresh] = slot.emplace(r.participant, grouped.size());
    if (fresh) {
      grouped.emplace_back();
      order.push_back(r.participant);
    }
    grouped[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < grouped.size(); ++g) {
    Trajectory t{order[g], {}};
    for (const RawRecord* r : grouped[g]) {
      if (!r->complete()) {
        out.incomplete.push_back({r->line, r->mood ? "pain missing" : (r->pain ? "mood missing" : "mood and pain missing")});
        continue;
      }
      const CompoundState cs{*r->mood, *r->pain};
      t.entries.push_back({r->date, cs, space.binarize(cs)});
    }
    if (t.entries.empty()) {
      out.excluded_participants.push_back(order[g]);
      continue;
    }
    std::stable_sort(t.entries.begin(), t.entries.end(),
                     [](const TrajectoryEntry& a, const TrajectoryEntry& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < t.entries.size(); ++i) {
      if (t.entries[i].date == t.entries[i - 1].date) {
        throw Error(Errc::invalid_input, "duplicate date for participant " + t.participant);
      }
    }
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

/// Tabulates consecutive pairs of an index sequence.
inline CountMatrix count_transitions(std::span<const int> states, Index n) {
  CountMatrix c(n);
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    const int a = states[t];
    const int b = states[t + 1];
    if (a < 0 || a >= n || b < 0 || b >= n) {
      throw Error(Errc::invalid_input, "state index outside [0, n)");
    }
    c.add(a, b);
  }
  return c;
}

enum class StateView { reduced, compound };

struct TransitionPolicy {
  /// Transitions spanning more calendar days than this are discarded.
  std::optional<int> max_gap_days;
};

inline CountMatrix count_transitions(const Trajectory& t, const StateSpace& space, StateView view,
                                     const TransitionPolicy& policy = {}) {
  const Index n = view == StateView::reduced ? kReducedStates : space.compound_size();
  CountMatrix c(n);
  auto index = [&](const TrajectoryEntry& e) {
    return view == StateView::reduced ? index_of(e.state) : space.compound_index(e.scores);
  };
  for (std::size_t k = 0; k + 1 < t.entries.size(); ++k) {
    const auto& a = t.entries[k];
    const auto& b = t.entries[k + 1];
    if (policy.max_gap_days && (b.date - a.date).count() > *policy.max_gap_days) continue;
    c.add(index(a), index(b));
  }
  return c;
}

/// Elementwise sum; an empty list gives the n-by-n zero matrix.
inline CountMatrix pool_counts(std::span<const CountMatrix> matrices, Index n) {
  CountMatrix pooled(n);
  for (const auto& m : matrices) pooled += m;
  return pooled;
}

struct CohortSummary {
  std::size_t rows = 0;
  std::size_t participants = 0;
  std::size_t participants_retained = 0;
  std::size_t participants_excluded = 0;
  std::size_t complete_observations = 0;
  std::size_t transitions = 0;
  std::array<std::size_t, kReducedStates> state_frequencies{};
  std::optional<double> mood_mean;
  std::optional<double> pain_mean;
  std::size_t mood_missing = 0;
  std::size_t pain_missing = 0;
  std::size_t incomplete_rows = 0;
};

inline CohortSummary summarize_cohort(std::span<const RawRecord> records, const TrajectorySet& set) {
  CohortSummary s;
  s.rows = records.size();
  std::unordered_map<std::string, bool> seen;
  double mood_sum = 0;
  double pain_sum = 0;
  std::size_t mood_n = 0;
  std::size_t pain_n = 0;
  for (const auto& r : records) {
    seen.emplace(r.participant, true);
    if (r.mood) {
      mood_sum += *r.mood;
      ++mood_n;
    } else {
      ++s.mood_missing;
    }
    if (r.pain) {
      pain_sum += *r.pain;
      ++pain_n;
    } else {
      ++s.pain_missing;
    }
    if (!r.complete()) ++s.incomplete_rows;
  }
  s.participants = seen.size();
  s.participants_retained = set.trajectories.size();
  s.participants_excluded = set.excluded_participants.size();
  if (mood_n) s.mood_mean = mood_sum / static_cast<double>(mood_n);
  if (pain_n) s.pain_mean = pain_sum / static_cast<double>(pain_n);
  for (const auto& t : set.trajectories) {
    s.complete_observations += t.entries.size();
    if (!t.entries.empty()) s.transitions += t.entries.size() - 1;
    for (const auto& e : t.entries) ++s.state_frequencies[static_cast<std::size_t>(index_of(e.state))];
  }
  return s;
}

inline nlohmann::ordered_json to_json(const CohortSummary& s) {
  nlohmann::ordered_json j;
  j["rows"] = s.rows;
  j["participants"] = s.participants;
  j["participants_retained"] = s.participants_retained;
  j["participants_excluded"] = s.participants_excluded;
  j["complete_observations"] = s.complete_observations;
  j["transitions"] = s.transitions;
  nlohmann::ordered_json freq;
  for (int i = 0; i < kReducedStates; ++i) freq[std::string(kReducedLabels[i])] = s.state_frequencies[i];
  j["state_frequencies"] = freq;
  j["mood_mean"] = s.mood_mean ? nlohmann::ordered_json(*s.mood_mean) : nlohmann::ordered_json(nullptr);
  j["pain_mean"] = s.pain_mean ? nlohmann::ordered_json(*s.pain_mean) : nlohmann::ordered_json(nullptr);
  j["missing"] = {{"mood", s.mood_missing}, {"pain", s.pain_missing}, {"incomplete_rows", s.incomplete_rows}};
  return j;
}

}  // namespace trajmix
