#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "checkmate/types.hpp"

namespace checkmate {

using Timestamp = std::chrono::system_clock::time_point;

struct InteractionStep {
  std::size_t index = 0;
  std::string user_query;
  std::string model_response;
  std::optional<Score> correctness;
  std::optional<Score> helpfulness;

  bool rated() const noexcept { return correctness.has_value() && helpfulness.has_value(); }
  /// Correctness 0 means "no mathematical content"; such steps are dropped by
  /// most analyses but kept in storage.
  bool zero_correctness() const noexcept { return correctness && correctness->value() == 0; }

  friend bool operator==(const InteractionStep&, const InteractionStep&) = default;
};

struct Trace {
  std::string trace_id;
  Topic topic = Topic::Algebra;
  std::string problem_id;
  std::string model_tag;
  Score confidence_pre = validate_score(ScaleKind::Confidence, 0);
  std::vector<InteractionStep> steps;
  std::size_t round_index = 0;
  std::string round_group_id;
  Timestamp created_at{};
  std::optional<ExperienceLevel> experience;

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct PreferenceRecord {
  std::string round_group_id;
  std::map<std::string, PreferenceRank> ranks;  // model tag -> rank

  bool has_tie() const;
  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

struct Dataset {
  std::vector<Trace> traces;
  std::vector<PreferenceRecord> preferences;
  std::string provenance;

  std::size_t step_count() const noexcept;
  std::size_t zero_correctness_steps() const noexcept;
};

/// UTC calendar date, "YYYY-MM-DD".
std::string format_date(Timestamp t);
/// ISO-8601 UTC with seconds, "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp t);
/// Accepts either of the two forms above. Throws Error{Parse}.
Timestamp parse_timestamp(const std::string& text);

/// Field names used when reading trace/preference records. The defaults are
/// this project's own schema; an alternate table adapts third-party releases.
struct FieldMap {
  std::string trace_id = "trace_id";
  std::string topic = "topic";
  std::string problem_id = "problem_id";
  std::string model_tag = "model_tag";
  std::string confidence_pre = "confidence_pre";
  std::string steps = "steps";
  std::string step_index = "index";
  std::string user_query = "user_query";
  std::string model_response = "model_response";
  std::string correctness = "correctness";
  std::string helpfulness = "helpfulness";
  std::string round_group_id = "round_group_id";
  std::string date = "date";
  std::string experience = "experience";
  std::string ranks = "ranks";

  /// Partial JSON object overriding any of the names above. Throws Error{Parse}.
  static FieldMap from_json(const std::string& text);
};

enum class RecordForm {
  Export,  // dataset files: date only, no round index
  Event,   // event log: exact timestamp and round index
};

nlohmann::json trace_to_json(const Trace& trace, RecordForm form);
/// Throws Error{Parse} naming the offending field.
Trace trace_from_json(const nlohmann::json& doc, RecordForm form, const FieldMap& fields = {});
nlohmann::json preference_to_json(const PreferenceRecord& record);
PreferenceRecord preference_from_json(const nlohmann::json& doc, const FieldMap& fields = {});

}  // namespace checkmate
