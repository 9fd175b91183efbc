#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace checkmate {

enum class Errc {
  // core
  OutOfRange,
  DuplicateId,
  EmptyStatement,
  UnknownTopic,
  BankShape,
  Io,
  // session engine
  InvalidConfig,
  WrongPhase,
  InsufficientProblems,
  KindMismatch,
  CapReached,
  EmptyQuery,
  NoExchanges,
  LengthMismatch,
  MissingRank,
  InvalidRank,
  UnknownSession,
  GatewayError,
  // model gateway
  MalformedTranscript,
  Timeout,
  ProviderError,
  AuthMissing,
  // trace store
  Conflict,
  Parse,
  // taxonomy
  OtherTextWithoutOtherMark,
  UnknownCategory,
  HeaderMismatch,
  UnknownQueryRef,
  // analysis
  DegenerateInput,
  EmptyAfterFilter,
  MissingExperienceMetadata,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library. `code()` identifies the failure;
/// `line()` is set for parse errors that can be pinned to an input line.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  Errc code() const noexcept { return code_; }
  const std::optional<std::size_t>& line() const noexcept { return line_; }
  /// The message without the code/line decoration added by what().
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

}  // namespace checkmate
