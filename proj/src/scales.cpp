#include "checkmate/scales.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "checkmate/error.hpp"

namespace checkmate {
namespace {

using json = nlohmann::json;

constexpr std::string_view kDefaultScales = R"json({
  "confidence": {
    "question": "Before interacting with the AI -- how confident are you that you could solve this problem entirely on your own, with your current knowledge base and no extra assistance?",
    "labels": [
      "Definitely could not solve on my own",
      "Very unlikely to be able to solve on my own",
      "Unlikely to be able to solve on my own",
      "May be able to solve on my own",
      "Likely be able to solve on my own",
      "Very likely to be able to solve on my own",
      "Definitely can solve on my own"
    ]
  },
  "correctness": {
    "question": "How correct (i.e., mathematically sound) is the generation?",
    "labels": [
      "N/A - this response does not contain any mathematical information",
      "Completely incorrect or nonsensical",
      "Multiple critical maths errors",
      "At least one critical math error or multiple small errors",
      "One or more minor errors, but otherwise mostly correct",
      "One or two minor errors, but almost entirely correct",
      "Completely correct"
    ]
  },
  "helpfulness": {
    "question": "How helpful would this AI generated response be towards helping someone solve this problem? If you already know how to solve the problem, evaluate this as if you were an undergraduate mathematics student encountering this problem for the first time.",
    "labels": [
      "Actively harmful",
      "Very harmful",
      "Somewhat harmful",
      "Unlikely to help, but unlikely to hurt",
      "Somewhat helpful",
      "Very helpful",
      "Definitely helpful"
    ]
  },
  "preference": {
    "question": "You will now rate which model(s) you prefer as a mathematical assistant. 1 = best, 3 = worst. You can assign the same rating if you think two (or more) models tied"
  }
})json";

std::size_t slot(ScaleKind kind) { return static_cast<std::size_t>(kind); }

}  // namespace

const ScaleSet& ScaleSet::defaults() {
  static const ScaleSet set = from_json(kDefaultScales);
  return set;
}

ScaleSet ScaleSet::from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::Parse, "scale table is not a JSON object");

  ScaleSet out;
  for (ScaleKind kind : {ScaleKind::Confidence, ScaleKind::Correctness, ScaleKind::Helpfulness}) {
    const std::string name(scale_kind_name(kind));
    if (!doc.contains(name)) throw Error(Errc::Parse, "scale table missing '" + name + "'");
    const json& entry = doc.at(name);
    if (!entry.contains("question") || !entry["question"].is_string() || !entry.contains("labels") ||
        !entry["labels"].is_array() || entry["labels"].size() != 7) {
      throw Error(Errc::Parse, "scale '" + name + "' needs a question and exactly 7 labels");
    }
    ScaleDefinition& def = out.scales_[slot(kind)];
    def.question = entry["question"].get<std::string>();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < 7; ++i) {
      def.labels[i] = entry["labels"][i].get<std::string>();
      if (!seen.insert(def.labels[i]).second) {
        throw Error(Errc::Parse, "scale '" + name + "' repeats label '" + def.labels[i] + "'");
      }
    }
  }
  if (doc.contains("preference")) {
    out.preference_question_ = doc["preference"].value("question", "");
  }
  return out;
}

const ScaleDefinition& ScaleSet::scale(ScaleKind kind) const noexcept { return scales_[slot(kind)]; }

const std::string& ScaleSet::label(ScaleKind kind, int value) const {
  if (value < kScaleMin || value > kScaleMax) {
    throw Error(Errc::OutOfRange, "no label for value " + std::to_string(value));
  }
  return scales_[slot(kind)].labels[static_cast<std::size_t>(value)];
}

std::string ScaleSet::to_json() const {
  json doc = json::object();
  for (ScaleKind kind : {ScaleKind::Confidence, ScaleKind::Correctness, ScaleKind::Helpfulness}) {
    const auto& def = scale(kind);
    doc[std::string(scale_kind_name(kind))] = {{"question", def.question}, {"labels", def.labels}};
  }
  doc["preference"] = {{"question", preference_question_}};
  return doc.dump();
}

}  // namespace checkmate
