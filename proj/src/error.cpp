#include "checkmate/error.hpp"

namespace checkmate {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyStatement: return "EmptyStatement";
    case Errc::UnknownTopic: return "UnknownTopic";
    case Errc::BankShape: return "BankShapeError";
    case Errc::Io: return "Io";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::WrongPhase: return "WrongPhase";
    case Errc::InsufficientProblems: return "InsufficientProblems";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::CapReached: return "CapReached";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::NoExchanges: return "NoExchanges";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::MissingRank: return "MissingRank";
    case Errc::InvalidRank: return "InvalidRank";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::GatewayError: return "GatewayError";
    case Errc::MalformedTranscript: return "MalformedTranscript";
    case Errc::Timeout: return "Timeout";
    case Errc::ProviderError: return "ProviderError";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::Conflict: return "Conflict";
    case Errc::Parse: return "Parse";
    case Errc::OtherTextWithoutOtherMark: return "OtherTextWithoutOtherMark";
    case Errc::UnknownCategory: return "UnknownCategory";
    case Errc::HeaderMismatch: return "HeaderMismatch";
    case Errc::UnknownQueryRef: return "UnknownQueryRef";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::EmptyAfterFilter: return "EmptyAfterFilter";
    case Errc::MissingExperienceMetadata: return "MissingExperienceMetadata";
  }
  return "Unknown";
}

namespace {

std::string decorate(Errc code, const std::string& message, const std::optional<std::size_t>& line) {
  std::string out(errc_name(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line), detail_(message) {}

}  // namespace checkmate
