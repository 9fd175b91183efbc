#include "checkmate/gateway.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "checkmate/error.hpp"

namespace checkmate::gateway {

using json = nlohmann::json;

std::string_view api_mode_name(ApiMode mode) noexcept {
  return mode == ApiMode::Chat ? "chat" : "completion";
}

void ModelSpec::validate() const {
  if (tag.empty()) throw Error(Errc::InvalidConfig, "model spec needs a tag");
  if (!(temperature >= 0.0)) throw Error(Errc::InvalidConfig, "temperature must be >= 0");
  if (max_tokens <= 0) throw Error(Errc::InvalidConfig, "max_tokens must be > 0");
  if (provider == ProviderKind::OpenAiCompatible && provider_model_name.empty()) {
    throw Error(Errc::InvalidConfig, "provider model name required");
  }
}

std::vector<ModelSpec> default_roster() {
  ModelSpec instruct;
  instruct.tag = "instructgpt";
  instruct.api_mode = ApiMode::Completion;
  instruct.provider_model_name = "text-davinci-003";

  ModelSpec chat;
  chat.tag = "chatgpt";
  chat.provider_model_name = "gpt-3.5-turbo";

  ModelSpec gpt4;
  gpt4.tag = "gpt4";
  gpt4.provider_model_name = "gpt-4";
  return {instruct, chat, gpt4};
}

std::vector<ModelSpec> stub_roster(std::size_t size) {
  std::vector<ModelSpec> roster;
  for (std::size_t i = 0; i < size; ++i) {
    ModelSpec spec;
    spec.tag = "stub-model-" + std::to_string(i + 1);
    spec.provider = ProviderKind::Stub;
    spec.provider_model_name = "stub-engine-" + std::to_string(i + 1);
    spec.api_mode = (i == 0) ? ApiMode::Completion : ApiMode::Chat;
    roster.push_back(spec);
  }
  return roster;
}

std::vector<ModelSpec> parse_roster(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) throw Error(Errc::Parse, "roster must be a JSON array");
  std::vector<ModelSpec> roster;
  try {
    for (const auto& entry : doc) {
      ModelSpec spec;
      spec.tag = entry.at("tag").get<std::string>();
      const auto mode = entry.value("api_mode", std::string("chat"));
      if (mode == "chat") spec.api_mode = ApiMode::Chat;
      else if (mode == "completion") spec.api_mode = ApiMode::Completion;
      else throw Error(Errc::Parse, "api_mode must be chat or completion");
      const auto provider = entry.value("provider", std::string("openai"));
      if (provider == "openai") spec.provider = ProviderKind::OpenAiCompatible;
      else if (provider == "stub") spec.provider = ProviderKind::Stub;
      else throw Error(Errc::Parse, "provider must be openai or stub");
      spec.provider_model_name = entry.value("model", std::string());
      spec.temperature = entry.value("temperature", 0.0);
      spec.max_tokens = entry.value("max_tokens", 512);
      spec.base_url = entry.value("base_url", spec.base_url);
      spec.api_key_env = entry.value("api_key_env", spec.api_key_env);
      spec.validate();
      roster.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Parse, std::string("roster entry: ") + e.what());
  }
  return roster;
}

void Transcript::validate() const {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::User : Role::Assistant;
    if (turns[i].role != expected) {
      throw Error(Errc::MalformedTranscript, "turn " + std::to_string(i) + " breaks user/assistant alternation");
    }
  }
}

std::size_t Transcript::user_turns() const noexcept {
  std::size_t n = 0;
  for (const auto& t : turns) n += (t.role == Role::User);
  return n;
}

std::vector<ChatMessage> render_chat_messages(const Transcript& transcript) {
  transcript.validate();
  std::vector<ChatMessage> out;
  out.reserve(transcript.turns.size() + 1);
  out.push_back({"system", std::string(kChatSystemPrompt)});
  for (const auto& turn : transcript.turns) {
    out.push_back({turn.role == Role::User ? "user" : "assistant", turn.text});
  }
  return out;
}

namespace {

void append_block(std::string& out, std::string_view header, std::string_view text) {
  out += '\n';
  out += header;
  out += ' ';
  for (char c : text) {
    out += c;
    if (c == '\n') out += ' ';
  }
}

}  // namespace

std::string render_completion_prompt(const Transcript& transcript) {
  transcript.validate();
  std::string out(kCompletionInstruction);
  for (const auto& turn : transcript.turns) {
    append_block(out, turn.role == Role::User ? "User:" : "Assistant:", turn.text);
  }
  out += "\nAssistant:";
  return out;
}

std::string stub_generate(const Transcript& transcript) {
  std::string last_user;
  std::size_t users = 0;
  for (const auto& turn : transcript.turns) {
    if (turn.role == Role::User) {
      last_user = turn.text;
      ++users;
    }
  }
  return "STUB:" + last_user + "#" + std::to_string(users);
}

GatewayOptions GatewayOptions::from_env(const EnvLookup& env) {
  GatewayOptions options;
  auto read_int = [&](const std::string& name) -> std::optional<long long> {
    auto value = env(name);
    if (!value || value->empty()) return std::nullopt;
    try {
      std::size_t used = 0;
      long long parsed = std::stoll(*value, &used);
      if (used != value->size()) throw std::invalid_argument(name);
      return parsed;
    } catch (const std::exception&) {
      throw Error(Errc::InvalidConfig, name + " must be an integer");
    }
  };
  if (auto secs = read_int("GATEWAY_TIMEOUT_SECS")) {
    if (*secs <= 0) throw Error(Errc::InvalidConfig, "GATEWAY_TIMEOUT_SECS must be > 0");
    options.default_timeout = std::chrono::seconds(*secs);
  }
  if (auto retries = read_int("GATEWAY_MAX_RETRIES")) {
    if (*retries < 0) throw Error(Errc::InvalidConfig, "GATEWAY_MAX_RETRIES must be >= 0");
    options.default_max_retries = static_cast<int>(*retries);
  }
  return options;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

class ModelGateway::Limiter {
 public:
  explicit Limiter(std::size_t cap) : available_(cap) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++available_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t available_;
};

ModelGateway::ModelGateway(std::shared_ptr<HttpTransport> transport, GatewayOptions options, EnvLookup env,
                           Sleeper sleep)
    : transport_(std::move(transport)),
      options_(options),
      env_(std::move(env)),
      sleep_(std::move(sleep)),
      jitter_(options.jitter_seed) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ModelGateway::~ModelGateway() = default;

ModelGateway::Limiter& ModelGateway::limiter_for(const std::string& base_url) {
  std::lock_guard lock(mutex_);
  auto& slot = limiters_[base_url];
  if (!slot) slot = std::make_unique<Limiter>(std::max<std::size_t>(1, options_.max_concurrent_per_provider));
  return *slot;
}

std::chrono::milliseconds ModelGateway::backoff(int attempt) {
  double jitter;
  {
    std::lock_guard lock(mutex_);
    jitter = std::uniform_real_distribution<double>(0.5, 1.5)(jitter_);
  }
  const double base = static_cast<double>(options_.backoff_base.count()) * static_cast<double>(1u << attempt);
  return std::chrono::milliseconds(static_cast<long long>(base * jitter));
}

bool ModelGateway::has_credentials(const ModelSpec& spec) const {
  if (spec.provider == ProviderKind::Stub) return true;
  auto key = env_(spec.api_key_env);
  return key && !key->empty();
}

std::string ModelGateway::generate(const ModelSpec& spec, const Transcript& transcript) {
  return generate(GenerationRequest{spec, transcript, options_.default_timeout, options_.default_max_retries});
}

namespace {

bool is_transient(int status) { return status == 0 || status == 429 || (status >= 500 && status <= 599); }

std::string extract_text(ApiMode mode, const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::ProviderError, "provider returned a malformed response");
  try {
    const auto& choice = doc.at("choices").at(0);
    if (mode == ApiMode::Chat) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::ProviderError, "provider response has no generated text");
  }
}

}  // namespace

std::string ModelGateway::generate(const GenerationRequest& request) {
  const ModelSpec& spec = request.spec;
  spec.validate();
  if (request.timeout.count() <= 0) throw Error(Errc::InvalidConfig, "timeout must be > 0");
  if (request.max_retries < 0) throw Error(Errc::InvalidConfig, "max_retries must be >= 0");

  if (spec.provider == ProviderKind::Stub) {
    request.transcript.validate();
    return stub_generate(request.transcript);
  }

  json body;
  std::string path;
  if (spec.api_mode == ApiMode::Chat) {
    json messages = json::array();
    for (const auto& m : render_chat_messages(request.transcript)) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    body = {{"model", spec.provider_model_name}, {"messages", std::move(messages)}};
    path = "/v1/chat/completions";
  } else {
    body = {{"model", spec.provider_model_name}, {"prompt", render_completion_prompt(request.transcript)}};
    path = "/v1/completions";
  }
  body["temperature"] = spec.temperature;
  body["max_tokens"] = spec.max_tokens;

  auto key = env_(spec.api_key_env);
  if (!key || key->empty()) throw Error(Errc::AuthMissing, "credential variable " + spec.api_key_env + " is not set");
  const std::map<std::string, std::string> headers = {{"Authorization", "Bearer " + *key},
                                                      {"Content-Type", "application/json"}};
  const std::string payload = body.dump();

  if (!transport_) throw Error(Errc::ProviderError, "no transport configured");
  Limiter& limiter = limiter_for(spec.base_url);

  bool last_was_timeout = false;
  int last_status = 0;
  for (int attempt = 0; attempt <= request.max_retries; ++attempt) {
    if (attempt > 0) sleep_(backoff(attempt - 1));
    HttpResponse response;
    limiter.acquire();
    try {
      response = transport_->post_json(spec.base_url, path, headers, payload, request.timeout);
      limiter.release();
    } catch (const Error& e) {
      limiter.release();
      if (e.code() != Errc::Timeout) throw;
      last_was_timeout = true;
      continue;
    } catch (...) {
      limiter.release();
      throw;
    }
    last_was_timeout = false;
    last_status = response.status;
    if (response.status >= 200 && response.status < 300) return extract_text(spec.api_mode, response.body);
    if (!is_transient(response.status)) break;
  }

  if (last_was_timeout) throw Error(Errc::Timeout, "provider did not answer in time");
  throw Error(Errc::ProviderError, last_status == 0 ? std::string("provider unreachable")
                                                    : "provider returned status " + std::to_string(last_status));
}

}  // namespace checkmate::gateway
