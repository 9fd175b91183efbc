#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace checkmate::gateway {

inline constexpr std::string_view kChatSystemPrompt = "You are an assistant to a professional mathematician.";
inline constexpr std::string_view kCompletionInstruction = "Help a professional mathematician solve a problem:";

enum class ApiMode { Chat, Completion };
enum class ProviderKind { OpenAiCompatible, Stub };

std::string_view api_mode_name(ApiMode mode) noexcept;

struct ModelSpec {
  std::string tag;  // internal only; never shown to participants
  ApiMode api_mode = ApiMode::Chat;
  ProviderKind provider = ProviderKind::OpenAiCompatible;
  std::string provider_model_name;
  double temperature = 0.0;
  int max_tokens = 512;
  std::string base_url = "https://api.openai.com";
  std::string api_key_env = "PROVIDER_API_KEY";

  /// Throws Error{InvalidConfig}.
  void validate() const;
};

/// Three-model roster used in the original study: two chat models and one
/// completion model, all OpenAI-hosted.
std::vector<ModelSpec> default_roster();
/// Same shape as default_roster() with every spec pointed at the stub provider.
std::vector<ModelSpec> stub_roster(std::size_t size = 3);

/// Roster config file: JSON array of {tag, api_mode, provider, model, temperature,
/// max_tokens, base_url, api_key_env}. Throws Error{Parse | InvalidConfig}.
std::vector<ModelSpec> parse_roster(std::string_view json_text);

enum class Role { User, Assistant };

struct Turn {
  Role role;
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Transcript {
  std::vector<Turn> turns;

  /// Throws Error{MalformedTranscript} unless roles alternate starting with user.
  void validate() const;
  std::size_t user_turns() const noexcept;
  friend bool operator==(const Transcript&, const Transcript&) = default;
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

std::vector<ChatMessage> render_chat_messages(const Transcript& transcript);

/// Instruction line, then one "User: "/"Assistant: " block per turn, then a
/// bare "Assistant:" cue. Continuation lines inside a turn are indented by one
/// space so that turn text can never forge a block header.
std::string render_completion_prompt(const Transcript& transcript);

/// "STUB:" + last user text + "#" + number of user turns.
std::string stub_generate(const Transcript& transcript);

struct GenerationRequest {
  ModelSpec spec;
  Transcript transcript;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Outbound HTTP seam. Implementations throw Error{Timeout} when the deadline
/// passes and return status 0 for connection-level failures.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& base_url, const std::string& path,
                                 const std::map<std::string, std::string>& headers, const std::string& body,
                                 std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (HTTPS via OpenSSL).
std::shared_ptr<HttpTransport> make_http_transport();

struct GatewayOptions {
  std::chrono::milliseconds default_timeout{60'000};
  int default_max_retries = 2;
  std::chrono::milliseconds backoff_base{500};
  std::size_t max_concurrent_per_provider = 8;
  std::uint64_t jitter_seed = 0x5eed;

  /// Reads GATEWAY_TIMEOUT_SECS and GATEWAY_MAX_RETRIES.
  static GatewayOptions from_env(const std::function<std::optional<std::string>(const std::string&)>& env);
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

EnvLookup process_env();

class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<HttpTransport> transport, GatewayOptions options = {},
               EnvLookup env = process_env(), Sleeper sleep = {});
  ~ModelGateway();
  ModelGateway(const ModelGateway&) = delete;
  ModelGateway& operator=(const ModelGateway&) = delete;

  /// Throws Error{MalformedTranscript | AuthMissing | Timeout | ProviderError | InvalidConfig}.
  /// Error messages never contain credentials or model names.
  std::string generate(const GenerationRequest& request);

  /// Convenience overload using the gateway's default timeout/retries.
  std::string generate(const ModelSpec& spec, const Transcript& transcript);

  const GatewayOptions& options() const noexcept { return options_; }

  /// True when the spec is the stub or its credential variable is set.
  bool has_credentials(const ModelSpec& spec) const;

 private:
  class Limiter;
  Limiter& limiter_for(const std::string& base_url);
  std::chrono::milliseconds backoff(int attempt);

  std::shared_ptr<HttpTransport> transport_;
  GatewayOptions options_;
  EnvLookup env_;
  Sleeper sleep_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
  std::mt19937_64 jitter_;
};

}  // namespace checkmate::gateway
