#include "checkmate/records.hpp"

#include <cstdio>
#include <ctime>
#include <set>

#include <nlohmann/json.hpp>

#include "checkmate/error.hpp"

namespace checkmate {

using json = nlohmann::json;

bool PreferenceRecord::has_tie() const {
  std::set<int> seen;
  for (const auto& [tag, rank] : ranks) {
    if (!seen.insert(rank.value()).second) return true;
  }
  return false;
}

std::size_t Dataset::step_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.steps.size();
  return n;
}

std::size_t Dataset::zero_correctness_steps() const noexcept {
  std::size_t n = 0;
  for (const auto& t : traces) {
    for (const auto& s : t.steps) n += s.zero_correctness();
  }
  return n;
}

namespace {

std::tm to_utc(Timestamp t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return tm;
}

}  // namespace

std::string format_date(Timestamp t) {
  const std::tm tm = to_utc(t);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday);
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const std::tm tm = to_utc(t);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

Timestamp parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  int consumed = 0;
  bool ok = false;
  if (text.size() == 10) {
    ok = std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) == 3 && consumed == 10;
  } else if (text.size() == 20) {
    ok = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%n", &y, &mo, &d, &h, &mi, &s, &consumed) == 6 &&
         consumed == 20;
  }
  if (!ok || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
    throw Error(Errc::Parse, "bad timestamp '" + text + "'");
  }
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

FieldMap FieldMap::from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::Parse, "field map must be a JSON object");
  FieldMap map;
  const std::pair<const char*, std::string*> slots[] = {
      {"trace_id", &map.trace_id},         {"topic", &map.topic},
      {"problem_id", &map.problem_id},     {"model_tag", &map.model_tag},
      {"confidence_pre", &map.confidence_pre}, {"steps", &map.steps},
      {"index", &map.step_index},          {"user_query", &map.user_query},
      {"model_response", &map.model_response}, {"correctness", &map.correctness},
      {"helpfulness", &map.helpfulness},   {"round_group_id", &map.round_group_id},
      {"date", &map.date},                 {"experience", &map.experience},
      {"ranks", &map.ranks},
  };
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& [name, slot] : slots) {
      if (key == name) {
        if (!value.is_string()) throw Error(Errc::Parse, "field map entry '" + key + "' must be a string");
        *slot = value.get<std::string>();
        known = true;
      }
    }
    if (!known) throw Error(Errc::Parse, "field map has unknown entry '" + key + "'");
  }
  return map;
}

namespace {

json score_json(const std::optional<Score>& s) { return s ? json(s->value()) : json(nullptr); }

const json& require(const json& doc, const std::string& field) {
  if (!doc.is_object() || !doc.contains(field)) throw Error(Errc::Parse, "missing field '" + field + "'");
  return doc.at(field);
}

std::string require_string(const json& doc, const std::string& field) {
  const json& v = require(doc, field);
  if (!v.is_string()) throw Error(Errc::Parse, "field '" + field + "' must be a string");
  return v.get<std::string>();
}

long long require_integer(const json& doc, const std::string& field) {
  const json& v = require(doc, field);
  if (!v.is_number_integer()) throw Error(Errc::Parse, "field '" + field + "' must be an integer");
  return v.get<long long>();
}

Score require_score(const json& doc, const std::string& field, ScaleKind kind) {
  const long long raw = require_integer(doc, field);
  try {
    return validate_score(kind, raw);
  } catch (const Error&) {
    throw Error(Errc::Parse, "field '" + field + "' value " + std::to_string(raw) + " outside [0, 6]");
  }
}

}  // namespace

json trace_to_json(const Trace& trace, RecordForm form) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"index", s.index},
                     {"user_query", s.user_query},
                     {"model_response", s.model_response},
                     {"correctness", score_json(s.correctness)},
                     {"helpfulness", score_json(s.helpfulness)}});
  }
  json doc = {{"trace_id", trace.trace_id},
              {"topic", topic_name(trace.topic)},
              {"problem_id", trace.problem_id},
              {"model_tag", trace.model_tag},
              {"confidence_pre", trace.confidence_pre.value()},
              {"steps", std::move(steps)},
              {"round_group_id", trace.round_group_id}};
  if (form == RecordForm::Export) {
    doc["date"] = format_date(trace.created_at);
  } else {
    doc["created_at"] = format_timestamp(trace.created_at);
    doc["round_index"] = trace.round_index;
  }
  if (trace.experience) doc["experience"] = experience_name(*trace.experience);
  return doc;
}

Trace trace_from_json(const json& doc, RecordForm form, const FieldMap& f) {
  if (!doc.is_object()) throw Error(Errc::Parse, "trace record is not an object");
  Trace t;
  t.trace_id = require_string(doc, f.trace_id);
  try {
    t.topic = parse_topic(require_string(doc, f.topic));
  } catch (const Error& e) {
    if (e.code() != Errc::UnknownTopic) throw;
    throw Error(Errc::Parse, "field '" + f.topic + "' has unknown topic '" + e.detail() + "'");
  }
  t.problem_id = require_string(doc, f.problem_id);
  t.model_tag = require_string(doc, f.model_tag);
  t.confidence_pre = require_score(doc, f.confidence_pre, ScaleKind::Confidence);
  t.round_group_id = require_string(doc, f.round_group_id);

  const json& steps = require(doc, f.steps);
  if (!steps.is_array()) throw Error(Errc::Parse, "field '" + f.steps + "' must be an array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const json& js = steps[i];
    InteractionStep s;
    const long long index = require_integer(js, f.step_index);
    if (index != static_cast<long long>(i)) {
      throw Error(Errc::Parse, "field '" + f.step_index + "' must be contiguous from 0 (got " +
                                   std::to_string(index) + " at position " + std::to_string(i) + ")");
    }
    s.index = i;
    s.user_query = require_string(js, f.user_query);
    s.model_response = require_string(js, f.model_response);
    const bool has_c = js.contains(f.correctness) && !js.at(f.correctness).is_null();
    const bool has_h = js.contains(f.helpfulness) && !js.at(f.helpfulness).is_null();
    if (has_c != has_h) throw Error(Errc::Parse, "step " + std::to_string(i) + " has only one of its two ratings");
    if (has_c) {
      s.correctness = require_score(js, f.correctness, ScaleKind::Correctness);
      s.helpfulness = require_score(js, f.helpfulness, ScaleKind::Helpfulness);
    }
    t.steps.push_back(std::move(s));
  }

  if (form == RecordForm::Export) {
    t.created_at = parse_timestamp(require_string(doc, f.date));
  } else {
    t.created_at = parse_timestamp(require_string(doc, "created_at"));
    const long long round = require_integer(doc, "round_index");
    if (round < 0) throw Error(Errc::Parse, "field 'round_index' must be >= 0");
    t.round_index = static_cast<std::size_t>(round);
  }
  if (doc.contains(f.experience) && !doc.at(f.experience).is_null()) {
    t.experience = parse_experience(require_string(doc, f.experience));
  }
  return t;
}

json preference_to_json(const PreferenceRecord& record) {
  json ranks = json::object();
  for (const auto& [tag, rank] : record.ranks) ranks[tag] = rank.value();
  return {{"round_group_id", record.round_group_id}, {"ranks", std::move(ranks)}};
}

PreferenceRecord preference_from_json(const json& doc, const FieldMap& f) {
  PreferenceRecord rec;
  rec.round_group_id = require_string(doc, f.round_group_id);
  const json& ranks = require(doc, f.ranks);
  if (!ranks.is_object() || ranks.empty()) throw Error(Errc::Parse, "field '" + f.ranks + "' must be a non-empty object");
  for (const auto& [tag, value] : ranks.items()) {
    if (!value.is_number_integer()) throw Error(Errc::Parse, "rank for a model is not an integer");
    const long long raw = value.get<long long>();
    if (raw < PreferenceRank::kBest || raw > PreferenceRank::kWorst) {
      throw Error(Errc::Parse, "field '" + f.ranks + "' value " + std::to_string(raw) + " outside [1, 3]");
    }
    rec.ranks.emplace(tag, PreferenceRank(raw));
  }
  return rec;
}

}  // namespace checkmate
