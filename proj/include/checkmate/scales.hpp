#pragma once

#include <array>
#include <string>
#include <string_view>

#include "checkmate/types.hpp"

namespace checkmate {

struct ScaleDefinition {
  std::string question;
  std::array<std::string, 7> labels;
};

/// The three rating scales plus the cross-model preference prompt.
/// Loaded from JSON so deployments can swap in alternate wording; the
/// defaults reproduce the labels participants originally saw.
class ScaleSet {
 public:
  static const ScaleSet& defaults();
  /// Throws Error{Parse} on malformed input or a scale without 7 distinct labels.
  static ScaleSet from_json(std::string_view text);

  const ScaleDefinition& scale(ScaleKind kind) const noexcept;
  /// Throws Error{OutOfRange}.
  const std::string& label(ScaleKind kind, int value) const;
  const std::string& preference_question() const noexcept { return preference_question_; }

  std::string to_json() const;

 private:
  std::array<ScaleDefinition, 3> scales_;
  std::string preference_question_;
};

/// Verbatim label for `value` on the default scales.
inline const std::string& scale_label(ScaleKind kind, int value) {
  return ScaleSet::defaults().label(kind, value);
}

}  // namespace checkmate
