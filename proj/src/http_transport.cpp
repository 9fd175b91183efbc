#include <httplib.h>

#include "checkmate/error.hpp"
#include "checkmate/gateway.hpp"

namespace checkmate::gateway {
namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& base_url, const std::string& path,
                         const std::map<std::string, std::string>& headers, const std::string& body,
                         std::chrono::milliseconds timeout) override {
    httplib::Client client(base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) {
      if (k != "Content-Type") hdrs.emplace(k, v);
    }
    auto result = client.Post(path, hdrs, body, "application/json");
    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw Error(Errc::Timeout, "provider did not answer in time");
      }
      return HttpResponse{0, {}};
    }
    return HttpResponse{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace checkmate::gateway
