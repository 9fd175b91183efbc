#include "checkmate/http_api.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "checkmate/annotation_sheet.hpp"
#include "checkmate/error.hpp"

namespace checkmate::api {

using json = nlohmann::json;

std::optional<std::string> Request::header(const std::string& lower_name) const {
  auto it = headers.find(lower_name);
  if (it == headers.end()) return std::nullopt;
  return it->second;
}

std::string_view api_error_name(ApiErrorCode code) noexcept {
  switch (code) {
    case ApiErrorCode::WrongPhase: return "wrong_phase";
    case ApiErrorCode::CapReached: return "cap_reached";
    case ApiErrorCode::NotFound: return "not_found";
    case ApiErrorCode::InvalidInput: return "invalid_input";
    case ApiErrorCode::GatewayUnavailable: return "gateway_unavailable";
    case ApiErrorCode::Conflict: return "conflict";
    case ApiErrorCode::Forbidden: return "forbidden";
    case ApiErrorCode::Internal: return "internal";
  }
  return "internal";
}

std::pair<int, ApiErrorCode> map_error(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownSession: return {404, ApiErrorCode::NotFound};
    case Errc::WrongPhase:
    case Errc::NoExchanges: return {409, ApiErrorCode::WrongPhase};
    case Errc::CapReached: return {409, ApiErrorCode::CapReached};
    case Errc::Conflict: return {409, ApiErrorCode::Conflict};
    case Errc::GatewayError:
    case Errc::Timeout:
    case Errc::ProviderError:
    case Errc::AuthMissing: return {503, ApiErrorCode::GatewayUnavailable};
    case Errc::Io: return {500, ApiErrorCode::Internal};
    default: return {422, ApiErrorCode::InvalidInput};
  }
}

namespace {

Response json_response(int status, const json& body) {
  Response r;
  r.status = status;
  r.headers["Content-Type"] = "application/json";
  r.body = body.dump();
  return r;
}

json parse_body(const Request& request) {
  if (request.body.empty()) return json::object();
  json doc = json::parse(request.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::Parse, "request body must be a JSON object");
  return doc;
}

const json& field(const json& doc, const char* name) {
  if (!doc.contains(name)) throw Error(Errc::Parse, std::string("missing field '") + name + "'");
  return doc.at(name);
}

long long int_field(const json& doc, const char* name) {
  const json& v = field(doc, name);
  if (!v.is_number_integer()) throw Error(Errc::Parse, std::string("field '") + name + "' must be an integer");
  return v.get<long long>();
}

std::string string_field(const json& doc, const char* name) {
  const json& v = field(doc, name);
  if (!v.is_string()) throw Error(Errc::Parse, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t slash = path.find('/', start);
    const std::size_t end = slash == std::string::npos ? path.size() : slash;
    if (end > start) parts.push_back(path.substr(start, end - start));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return parts;
}

std::string provider_key(const gateway::ModelSpec& spec) {
  return spec.provider == gateway::ProviderKind::Stub ? std::string("stub") : spec.base_url;
}

bool default_probe(const std::string& base_url) {
  try {
    httplib::Client client(base_url);
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(5));
    return static_cast<bool>(client.Get("/"));
  } catch (const std::exception&) {
    return false;
  }
}

bool constant_time_equal(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

}  // namespace

Api::Api(session::SessionEngine& engine, store::TraceStore& store, gateway::ModelGateway& gateway, ApiConfig config)
    : engine_(engine), store_(store), gateway_(gateway), config_(std::move(config)) {
  if (!config_.provider_probe) config_.provider_probe = default_probe;
}

std::vector<std::string> Api::blinded_terms() const {
  std::set<std::string> terms;
  for (const auto& spec : config_.roster) {
    if (!spec.tag.empty()) terms.insert(spec.tag);
    if (!spec.provider_model_name.empty()) terms.insert(spec.provider_model_name);
  }
  return {terms.begin(), terms.end()};
}

std::string Api::scrub(std::string message) const {
  for (const auto& term : blinded_terms()) {
    for (std::size_t pos = message.find(term); pos != std::string::npos; pos = message.find(term, pos)) {
      message.replace(pos, term.size(), "[model]");
      pos += 7;
    }
  }
  return message;
}

Response Api::error_response(int status, ApiErrorCode code, std::string message) const {
  return json_response(status, {{"error", {{"code", api_error_name(code)}, {"message", scrub(std::move(message))}}}});
}

bool Api::admin_ok(const Request& request) const {
  if (config_.admin_token.empty()) return false;
  auto auth = request.header("authorization");
  if (!auth || auth->rfind("Bearer ", 0) != 0) return false;
  return constant_time_equal(auth->substr(7), config_.admin_token);
}

Response Api::handle(const Request& request) {
  struct InFlight {
    std::atomic<std::size_t>& n;
    ~InFlight() { --n; }
  };
  const std::size_t now_in_flight = ++in_flight_;
  InFlight guard{in_flight_};

  Response response;
  if (now_in_flight > config_.max_in_flight) {
    response = error_response(503, ApiErrorCode::GatewayUnavailable, "server is busy; please try again");
    response.headers["Retry-After"] = "1";
  } else if (request.method == "OPTIONS") {
    response.status = 204;
  } else {
    auto key = request.header("idempotency-key");
    if (request.method != "POST" || !key || key->empty()) {
      response = dispatch(request);
    } else {
      const std::string cache_key = request.path + "\n" + *key;
      std::promise<Response> promise;
      std::shared_future<Response> future;
      bool owner = false;
      {
        std::lock_guard lock(idem_mutex_);
        auto it = idem_cache_.find(cache_key);
        if (it != idem_cache_.end()) {
          future = it->second;
        } else {
          future = promise.get_future().share();
          idem_cache_.emplace(cache_key, future);
          idem_order_.push_back(cache_key);
          owner = true;
          while (idem_order_.size() > config_.idempotency_cache_size) {
            idem_cache_.erase(idem_order_.front());
            idem_order_.erase(idem_order_.begin());
          }
        }
      }
      if (owner) {
        response = dispatch(request);
        promise.set_value(response);
        // Server-side failures may be retried under the same key.
        if (response.status >= 500) {
          std::lock_guard lock(idem_mutex_);
          idem_cache_.erase(cache_key);
          idem_order_.erase(std::remove(idem_order_.begin(), idem_order_.end(), cache_key), idem_order_.end());
        }
      } else {
        response = future.get();
        response.headers["Idempotent-Replay"] = "true";
      }
    }
  }

  if (config_.ui_origin) {
    auto origin = request.header("origin");
    if (origin && *origin == *config_.ui_origin) {
      response.headers["Access-Control-Allow-Origin"] = *origin;
      response.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
      response.headers["Access-Control-Allow-Headers"] = "Content-Type, Idempotency-Key, Authorization";
      response.headers["Vary"] = "Origin";
    }
  }
  return response;
}

Response Api::dispatch(const Request& request) {
  try {
    const auto parts = split_path(request.path);
    const bool get = request.method == "GET";
    const bool post = request.method == "POST";

    if (parts.size() == 1 && parts[0] == "healthz" && get) return health();
    if (parts.size() == 2 && parts[0] == "export" && get) {
      if (parts[1] == "traces") return export_traces(request);
      if (parts[1] == "annotation-sheet") return export_sheet(request);
    }
    if (!parts.empty() && parts[0] == "sessions") {
      if (parts.size() == 1 && post) return route_session(request, "", "create");
      if (parts.size() == 2 && get) return route_session(request, parts[1], "get");
      if (parts.size() == 3 && post) return route_session(request, parts[1], parts[2]);
    }
    return error_response(404, ApiErrorCode::NotFound, "no route for " + request.method + " " + request.path);
  } catch (const Error& e) {
    auto [status, code] = map_error(e.code());
    return error_response(status, code, e.detail());
  } catch (const std::exception&) {
    return error_response(500, ApiErrorCode::Internal, "internal error");
  }
}

Response Api::route_session(const Request& request, const std::string& id, const std::string& action) {
  const json body = parse_body(request);
  auto view = [&](int status = 200) {
    return json_response(status, engine_.get_state(id).to_json());
  };

  if (action == "create") {
    session::SessionConfig config;
    config.roster = config_.roster;
    config.bank = config_.bank;
    config.interaction_cap = config_.interaction_cap;
    if (body.contains("seed")) {
      if (!admin_ok(request)) return error_response(403, ApiErrorCode::Forbidden, "seeding a session requires admin");
      const json& seed = body.at("seed");
      if (!seed.is_number_unsigned()) throw Error(Errc::Parse, "field 'seed' must be a non-negative integer");
      config.rng_seed = seed.get<std::uint64_t>();
    }
    if (body.contains("experience")) config.experience = parse_experience(string_field(body, "experience"));
    const std::string created = engine_.create_session(std::move(config));
    json out = engine_.get_state(created).to_json();
    return json_response(201, out);
  }
  if (action == "get") return view();
  if (action == "acknowledge") {
    engine_.acknowledge_instructions(id);
    return view();
  }
  if (action == "topic") {
    engine_.select_topic(id, parse_topic(string_field(body, "topic")));
    return view();
  }
  if (action == "confidence") {
    engine_.record_confidence(id, validate_score(ScaleKind::Confidence, int_field(body, "value")));
    return view();
  }
  if (action == "messages") {
    const std::string reply = engine_.send_message(id, string_field(body, "text"));
    return json_response(200, {{"response", reply}, {"session", engine_.get_state(id).to_json()}});
  }
  if (action == "finish") {
    engine_.finish_interaction(id);
    return view();
  }
  if (action == "ratings") {
    const json& list = field(body, "ratings");
    if (!list.is_array()) throw Error(Errc::Parse, "field 'ratings' must be an array");
    std::vector<std::pair<Score, Score>> ratings;
    for (const auto& entry : list) {
      if (!entry.is_object()) throw Error(Errc::Parse, "each rating must be an object");
      ratings.emplace_back(validate_score(ScaleKind::Correctness, int_field(entry, "correctness")),
                           validate_score(ScaleKind::Helpfulness, int_field(entry, "helpfulness")));
    }
    engine_.submit_step_ratings(id, ratings);
    return view();
  }
  if (action == "preferences") {
    const json& ranks = field(body, "ranks");
    if (!ranks.is_object()) throw Error(Errc::Parse, "field 'ranks' must be an object keyed by position label");
    std::map<std::size_t, PreferenceRank> by_position;
    for (const auto& [label, value] : ranks.items()) {
      std::optional<std::size_t> position;
      for (std::size_t p = 0; p < config_.roster.size(); ++p) {
        if (session::position_label(p) == label) position = p;
      }
      if (!position) throw Error(Errc::InvalidRank, "unknown position '" + label + "'");
      if (!value.is_number_integer()) throw Error(Errc::InvalidRank, "rank for " + label + " must be an integer");
      by_position.emplace(*position, PreferenceRank(value.get<long long>()));
    }
    engine_.submit_preference(id, by_position);
    return view();
  }
  return error_response(404, ApiErrorCode::NotFound, "no route for " + request.path);
}

Response Api::health() {
  const bool store_ok = store_.writable();

  std::map<std::string, const gateway::ModelSpec*> providers;
  for (const auto& spec : config_.roster) providers.emplace(provider_key(spec), &spec);

  json provider_json = json::object();
  std::size_t usable = 0;
  {
    std::lock_guard lock(health_mutex_);
    const auto now = std::chrono::steady_clock::now();
    const bool stale = !health_checked_ || now - *health_checked_ >= config_.health_cache_ttl;
    for (const auto& [key, spec] : providers) {
      const bool configured = gateway_.has_credentials(*spec);
      if (spec->provider == gateway::ProviderKind::Stub) {
        provider_reachable_[key] = true;
      } else if (stale || !provider_reachable_.count(key)) {
        provider_reachable_[key] = configured && config_.provider_probe(spec->base_url);
      }
      const bool reachable = provider_reachable_[key];
      provider_json[key] = !configured ? "unconfigured" : reachable ? "ok" : "unreachable";
      usable += configured && reachable;
    }
    if (stale) health_checked_ = now;
  }

  std::string status = "ok";
  if (!store_ok || (!providers.empty() && usable == 0)) status = "unhealthy";
  else if (usable < providers.size()) status = "degraded";

  return json_response(status == "unhealthy" ? 503 : 200,
                       {{"status", status}, {"store", store_ok ? "ok" : "read_only"}, {"providers", provider_json}});
}

Response Api::export_traces(const Request& request) {
  if (!admin_ok(request)) return error_response(403, ApiErrorCode::Forbidden, "admin token required");
  const Dataset dataset = store_.dataset();
  return json_response(200, {{"traces_jsonl", store::traces_jsonl(dataset)},
                             {"preferences_jsonl", store::preferences_jsonl(dataset)}});
}

Response Api::export_sheet(const Request& request) {
  if (!admin_ok(request)) return error_response(403, ApiErrorCode::Forbidden, "admin token required");
  store::StatementLookup statements;
  if (config_.bank) {
    for (const auto& p : config_.bank->problems()) statements.emplace(p.id, p.statement);
  }
  Response r;
  r.headers["Content-Type"] = "text/csv; charset=utf-8";
  r.body = store::export_annotation_sheet(store_.dataset(), statements);
  return r;
}

struct HttpServer::Impl {
  Api& api;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Api& a) : api(a) {
    server.set_payload_max_length(1 << 20);
    auto handler = [this](const httplib::Request& in, httplib::Response& out) {
      Request request;
      request.method = in.method;
      request.path = in.path;
      request.body = in.body;
      for (const auto& [name, value] : in.headers) {
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        request.headers[lower] = value;
      }
      Response response = api.handle(request);
      out.status = response.status;
      std::string content_type = "text/plain";
      for (const auto& [name, value] : response.headers) {
        if (name == "Content-Type") content_type = value;
        else out.set_header(name, value);
      }
      if (!response.body.empty() || response.status != 204) out.set_content(response.body, content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Options(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
  }
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>(api)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::Io, "cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(Errc::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace checkmate::api
