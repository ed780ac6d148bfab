#pragma once

// Ordinal score scales, the compound (mood, pain) state space and its
// binarized four-state reduction.
//
// Reduced states are always indexed BH=0, BL=1, GH=2, GL=3. Compound states
// are indexed row-major by (mood, pain) ascending.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trajmix/error.hpp"

namespace trajmix {

struct ScaleLevel {
  int score = 0;
  std::string description;
};

class OrdinalScale {
 public:
  OrdinalScale() = default;
  OrdinalScale(std::string name, std::vector<ScaleLevel> levels, bool higher_is_better)
      : name_(std::move(name)), levels_(std::move(levels)), higher_is_better_(higher_is_better) {
    if (levels_.size() < 2) {
      throw Error(Errc::invalid_input, "scale '" + name_ + "' needs at least 2 levels");
    }
    std::sort(levels_.begin(), levels_.end(),
              [](const ScaleLevel& a, const ScaleLevel& b) { return a.score < b.score; });
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i].score != static_cast<int>(i) + 1) {
        throw Error(Errc::invalid_input,
                    "scale '" + name_ + "' levels must be consecutive integers starting at 1");
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<ScaleLevel>& levels() const { return levels_; }
  bool higher_is_better() const { return higher_is_better_; }
  int size() const { return static_cast<int>(levels_.size()); }
  bool contains(int score) const { return score >= 1 && score <= size(); }

 private:
  std::string name_;
  std::vector<ScaleLevel> levels_;
  bool higher_is_better_ = true;
};

enum class MoodClass : std::uint8_t { good, bad };
enum class PainClass : std::uint8_t { low, high };

struct ReducedState {
  MoodClass mood = MoodClass::good;
  PainClass pain = PainClass::low;
  friend bool operator==(const ReducedState&, const ReducedState&) = default;
};

inline constexpr int kReducedStates = 4;

inline constexpr ReducedState kBH{MoodClass::bad, PainClass::high};
inline constexpr ReducedState kBL{MoodClass::bad, PainClass::low};
inline constexpr ReducedState kGH{MoodClass::good, PainClass::high};
inline constexpr ReducedState kGL{MoodClass::good, PainClass::low};

inline constexpr int index_of(ReducedState s) {
  return (s.mood == MoodClass::good ? 2 : 0) + (s.pain == PainClass::low ? 1 : 0);
}

inline ReducedState state_of(int index) {
  if (index < 0 || index >= kReducedStates) {
    throw Error(Errc::invalid_input, "reduced state index " + std::to_string(index) + " out of range");
  }
  return ReducedState{index >= 2 ? MoodClass::good : MoodClass::bad,
                      index % 2 == 1 ? PainClass::low : PainClass::high};
}

inline constexpr std::array<std::string_view, kReducedStates> kReducedLabels{"BH", "BL", "GH", "GL"};

inline std::string label_of(ReducedState s) { return std::string(kReducedLabels[index_of(s)]); }

inline std::optional<ReducedState> parse_reduced(std::string_view label) {
  for (int i = 0; i < kReducedStates; ++i) {
    if (kReducedLabels[i] == label) return state_of(i);
  }
  return std::nullopt;
}

inline std::vector<std::string> reduced_labels() {
  return {kReducedLabels.begin(), kReducedLabels.end()};
}

struct CompoundState {
  int mood = 1;
  int pain = 1;
  friend bool operator==(const CompoundState&, const CompoundState&) = default;
};

/// Scores mapped to Bad mood and to High pain; the complements are Good and Low.
struct BinarizationRule {
  std::set<int> bad_mood;
  std::set<int> high_pain;
};

class StateSpace {
 public:
  StateSpace(OrdinalScale mood, OrdinalScale pain, BinarizationRule rule)
      : mood_(std::move(mood)), pain_(std::move(pain)), rule_(std::move(rule)) {
    check_partition(mood_, rule_.bad_mood, "mood");
    check_partition(pain_, rule_.high_pain, "pain");
  }

  const OrdinalScale& mood_scale() const { return mood_; }
  const OrdinalScale& pain_scale() const { return pain_; }
  const BinarizationRule& rule() const { return rule_; }

  int compound_size() const { return mood_.size() * pain_.size(); }

  void check(CompoundState s) const {
    if (!mood_.contains(s.mood)) {
      throw Error(Errc::invalid_input, "mood score " + std::to_string(s.mood) + " out of range");
    }
    if (!pain_.contains(s.pain)) {
      throw Error(Errc::invalid_input, "pain score " + std::to_string(s.pain) + " out of range");
    }
  }

  ReducedState binarize(CompoundState s) const {
    check(s);
    return ReducedState{rule_.bad_mood.contains(s.mood) ? MoodClass::bad : MoodClass::good,
                        rule_.high_pain.contains(s.pain) ? PainClass::high : PainClass::low};
  }

  int compound_index(CompoundState s) const {
    check(s);
    return (s.mood - 1) * pain_.size() + (s.pain - 1);
  }

  CompoundState compound_state(int index) const {
    if (index < 0 || index >= compound_size()) {
      throw Error(Errc::invalid_input, "compound state index " + std::to_string(index) + " out of range");
    }
    return CompoundState{index / pain_.size() + 1, index % pain_.size() + 1};
  }

  static std::string compound_label(CompoundState s) {
    return "M" + std::to_string(s.mood) + "P" + std::to_string(s.pain);
  }

  std::vector<std::string> compound_labels() const {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(compound_size()));
    for (int i = 0; i < compound_size(); ++i) out.push_back(compound_label(compound_state(i)));
    return out;
  }

  /// Scores belonging to a reduced class, ascending.
  std::vector<int> mood_scores(MoodClass c) const {
    std::vector<int> out;
    for (int s = 1; s <= mood_.size(); ++s) {
      if (rule_.bad_mood.contains(s) == (c == MoodClass::bad)) out.push_back(s);
    }
    return out;
  }
  std::vector<int> pain_scores(PainClass c) const {
    std::vector<int> out;
    for (int s = 1; s <= pain_.size(); ++s) {
      if (rule_.high_pain.contains(s) == (c == PainClass::high)) out.push_back(s);
    }
    return out;
  }

 private:
  static void check_partition(const OrdinalScale& scale, const std::set<int>& cut, const char* what) {
    for (int s : cut) {
      if (!scale.contains(s)) {
        throw Error(Errc::invalid_input, std::string(what) + " cut lists score " + std::to_string(s) +
                                             " outside the scale");
      }
    }
    if (cut.empty() || static_cast<int>(cut.size()) == scale.size()) {
      throw Error(Errc::invalid_input, std::string(what) + " cut must leave both classes non-empty");
    }
  }

  OrdinalScale mood_;
  OrdinalScale pain_;
  BinarizationRule rule_;
};

/// Five-point mood and pain scales with mood 1-3 Bad and pain 3-5 High.
inline StateSpace default_state_space() {
  OrdinalScale mood("mood",
                    {{1, "Depressed"},
                     {2, "Feeling low"},
                     {3, "Not very happy"},
                     {4, "Quite happy"},
                     {5, "Very happy"}},
                    true);
  OrdinalScale pain("pain",
                    {{1, "No pain"},
                     {2, "Low pain"},
                     {3, "Moderate pain"},
                     {4, "Severe pain"},
                     {5, "Very severe pain"}},
                    false);
  return StateSpace(std::move(mood), std::move(pain), BinarizationRule{{1, 2, 3}, {3, 4, 5}});
}

// Config document:
//   {"mood": {"name": ..., "higher_is_better": true,
//             "levels": [{"score": 1, "description": "..."}, ...], "bad": [1, 2, 3]},
//    "pain": {..., "high": [3, 4, 5]}}
inline nlohmann::ordered_json to_json(const StateSpace& space) {
  auto scale_json = [](const OrdinalScale& scale, const char* cut_key, const std::set<int>& cut) {
    nlohmann::ordered_json j;
    j["name"] = scale.name();
    j["higher_is_better"] = scale.higher_is_better();
    auto levels = nlohmann::ordered_json::array();
    for (const auto& l : scale.levels()) {
      levels.push_back({{"score", l.score}, {"description", l.description}});
    }
    j["levels"] = levels;
    j[cut_key] = std::vector<int>(cut.begin(), cut.end());
    return j;
  };
  nlohmann::ordered_json j;
  j["mood"] = scale_json(space.mood_scale(), "bad", space.rule().bad_mood);
  j["pain"] = scale_json(space.pain_scale(), "high", space.rule().high_pain);
  return j;
}

inline StateSpace state_space_from_json(const nlohmann::ordered_json& j) {
  try {
    auto scale_of = [](const nlohmann::ordered_json& s, const char* default_name, bool default_better) {
      std::vector<ScaleLevel> levels;
      for (const auto& l : s.at("levels")) {
        levels.push_back({l.at("score").get<int>(), l.value("description", std::string{})});
      }
      return OrdinalScale(s.value("name", std::string(default_name)), std::move(levels),
                          s.value("higher_is_better", default_better));
    };
    const auto& m = j.at("mood");
    const auto& p = j.at("pain");
    BinarizationRule rule;
    for (int v : m.at("bad")) rule.bad_mood.insert(v);
    for (int v : p.at("high")) rule.high_pain.insert(v);
    return StateSpace(scale_of(m, "mood", true), scale_of(p, "pain", false), std::move(rule));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, std::string("state-space config: ") + e.what());
  }
}

}  // namespace trajmix
