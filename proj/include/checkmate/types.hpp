#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace checkmate {

enum class Topic {
  LinearAlgebra,
  NumberTheory,
  ProbabilityTheory,
  Algebra,
  Topology,
  GroupTheory,
};

inline constexpr std::array<Topic, 6> kAllTopics = {
    Topic::LinearAlgebra, Topic::NumberTheory, Topic::ProbabilityTheory,
    Topic::Algebra,       Topic::Topology,     Topic::GroupTheory,
};

std::string_view topic_name(Topic topic) noexcept;
/// Throws Error{UnknownTopic}.
Topic parse_topic(std::string_view name);

enum class ScaleKind { Confidence, Correctness, Helpfulness };

std::string_view scale_kind_name(ScaleKind kind) noexcept;
ScaleKind parse_scale_kind(std::string_view name);

inline constexpr int kScaleMin = 0;
inline constexpr int kScaleMax = 6;

/// A validated 7-point Likert value. Only constructible through
/// validate_score, so an out-of-range value cannot exist.
class Score {
 public:
  ScaleKind kind() const noexcept { return kind_; }
  int value() const noexcept { return value_; }

  friend bool operator==(const Score&, const Score&) = default;

 private:
  friend Score validate_score(ScaleKind kind, long long raw);
  Score(ScaleKind kind, int value) : kind_(kind), value_(value) {}

  ScaleKind kind_;
  int value_;
};

/// Returns Score iff 0 <= raw <= 6; throws Error{OutOfRange} otherwise.
Score validate_score(ScaleKind kind, long long raw);

class PreferenceRank {
 public:
  static constexpr int kBest = 1;
  static constexpr int kWorst = 3;

  /// Throws Error{InvalidRank} outside [1, 3].
  explicit PreferenceRank(long long value);

  int value() const noexcept { return value_; }
  friend auto operator<=>(const PreferenceRank&, const PreferenceRank&) = default;

 private:
  int value_;
};

// The participant's self-reported prior use of AI systems. Only "never" and
// "rarely" are attested; the upper two levels are our own labels.
enum class ExperienceLevel { Never, Rarely, Sometimes, Often };

std::string_view experience_name(ExperienceLevel level) noexcept;
ExperienceLevel parse_experience(std::string_view name);
inline bool is_minimal_experience(ExperienceLevel level) noexcept {
  return level == ExperienceLevel::Never || level == ExperienceLevel::Rarely;
}

struct Problem {
  std::string id;
  Topic topic;
  std::string statement;
  std::optional<std::string> source_name;

  friend bool operator==(const Problem&, const Problem&) = default;
};

}  // namespace checkmate
