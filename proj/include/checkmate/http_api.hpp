#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "checkmate/error.hpp"
#include "checkmate/gateway.hpp"
#include "checkmate/problem_bank.hpp"
#include "checkmate/session.hpp"
#include "checkmate/trace_store.hpp"

namespace checkmate::api {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;

  std::optional<std::string> header(const std::string& lower_name) const;
};

struct Response {
  int status = 200;
  std::map<std::string, std::string> headers;
  std::string body;
};

enum class ApiErrorCode { WrongPhase, CapReached, NotFound, InvalidInput, GatewayUnavailable, Conflict, Forbidden, Internal };

std::string_view api_error_name(ApiErrorCode code) noexcept;

/// Maps an engine/store error to an HTTP status and client-facing code.
std::pair<int, ApiErrorCode> map_error(Errc code) noexcept;

using ProviderProbe = std::function<bool(const std::string& base_url)>;

struct ApiConfig {
  std::vector<gateway::ModelSpec> roster;
  std::shared_ptr<const ProblemBank> bank;
  std::size_t interaction_cap = session::kDefaultInteractionCap;
  std::string admin_token;                  // empty disables the export routes
  std::optional<std::string> ui_origin;     // exact origin allowed by CORS
  std::size_t max_in_flight = 64;
  std::size_t idempotency_cache_size = 10'000;
  std::chrono::seconds health_cache_ttl{30};
  ProviderProbe provider_probe;             // defaults to an HTTP GET of the base URL
};

/// Request router. handle() is safe to call from many threads.
class Api {
 public:
  Api(session::SessionEngine& engine, store::TraceStore& store, gateway::ModelGateway& gateway, ApiConfig config);

  Response handle(const Request& request);

  /// Strings that must never reach a participant: roster tags and provider
  /// model names.
  std::vector<std::string> blinded_terms() const;

 private:
  Response dispatch(const Request& request);
  Response route_session(const Request& request, const std::string& id, const std::string& action);
  Response health();
  Response export_traces(const Request& request);
  Response export_sheet(const Request& request);
  bool admin_ok(const Request& request) const;
  Response error_response(int status, ApiErrorCode code, std::string message) const;
  std::string scrub(std::string message) const;

  session::SessionEngine& engine_;
  store::TraceStore& store_;
  gateway::ModelGateway& gateway_;
  ApiConfig config_;

  std::atomic<std::size_t> in_flight_{0};

  std::mutex idem_mutex_;
  std::map<std::string, std::shared_future<Response>> idem_cache_;
  std::vector<std::string> idem_order_;

  std::mutex health_mutex_;
  std::optional<std::chrono::steady_clock::time_point> health_checked_;
  std::map<std::string, bool> provider_reachable_;
};

/// cpp-httplib front end. start() binds and serves on a background thread.
class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port. Throws Error{Io}.
  int start(const std::string& host, int port);
  /// Stops accepting and waits for in-flight requests.
  void stop();
  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace checkmate::api
