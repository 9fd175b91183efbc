#include "checkmate/types.hpp"

#include "checkmate/error.hpp"

namespace checkmate {

std::string_view topic_name(Topic topic) noexcept {
  switch (topic) {
    case Topic::LinearAlgebra: return "linear-algebra";
    case Topic::NumberTheory: return "number-theory";
    case Topic::ProbabilityTheory: return "probability-theory";
    case Topic::Algebra: return "algebra";
    case Topic::Topology: return "topology";
    case Topic::GroupTheory: return "group-theory";
  }
  return "";
}

Topic parse_topic(std::string_view name) {
  for (Topic t : kAllTopics) {
    if (topic_name(t) == name) return t;
  }
  throw Error(Errc::UnknownTopic, std::string(name));
}

std::string_view scale_kind_name(ScaleKind kind) noexcept {
  switch (kind) {
    case ScaleKind::Confidence: return "confidence";
    case ScaleKind::Correctness: return "correctness";
    case ScaleKind::Helpfulness: return "helpfulness";
  }
  return "";
}

ScaleKind parse_scale_kind(std::string_view name) {
  for (ScaleKind k : {ScaleKind::Confidence, ScaleKind::Correctness, ScaleKind::Helpfulness}) {
    if (scale_kind_name(k) == name) return k;
  }
  throw Error(Errc::Parse, "unknown scale kind '" + std::string(name) + "'");
}

Score validate_score(ScaleKind kind, long long raw) {
  if (raw < kScaleMin || raw > kScaleMax) {
    throw Error(Errc::OutOfRange, std::string(scale_kind_name(kind)) + " score " + std::to_string(raw) +
                                      " outside [0, 6]");
  }
  return Score(kind, static_cast<int>(raw));
}

PreferenceRank::PreferenceRank(long long value) {
  if (value < kBest || value > kWorst) {
    throw Error(Errc::InvalidRank, "rank " + std::to_string(value) + " outside [1, 3]");
  }
  value_ = static_cast<int>(value);
}

std::string_view experience_name(ExperienceLevel level) noexcept {
  switch (level) {
    case ExperienceLevel::Never: return "never";
    case ExperienceLevel::Rarely: return "rarely";
    case ExperienceLevel::Sometimes: return "sometimes";
    case ExperienceLevel::Often: return "often";
  }
  return "";
}

ExperienceLevel parse_experience(std::string_view name) {
  for (ExperienceLevel l : {ExperienceLevel::Never, ExperienceLevel::Rarely, ExperienceLevel::Sometimes,
                            ExperienceLevel::Often}) {
    if (experience_name(l) == name) return l;
  }
  throw Error(Errc::Parse, "unknown experience level '" + std::string(name) + "'");
}

}  // namespace checkmate
