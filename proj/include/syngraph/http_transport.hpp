#pragma once

// Network transport for HttpBackend. Kept out of llm.hpp so that only the
// binaries that talk to a real endpoint pay for including cpp-httplib.

#include <chrono>
#include <map>
#include <memory>
#include <regex>
#include <string>

#include <httplib.h>

#include "syngraph/llm.hpp"

namespace syngraph {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::map<std::string, std::string>& headers,
                         const std::string& body, std::chrono::milliseconds timeout) override {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, url_re)) throw Error(Errc::InvalidConfig, "bad endpoint url " + url);
    std::string origin = m[1];
    std::string path = m[2].matched ? std::string(m[2]) : "/";

    // A fresh client per call keeps the transport reentrant.
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client.Post(path, hdrs, body, "application/json");

    HttpResponse out;
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write ||
          err == httplib::Error::ConnectionTimeout) {
        out.timed_out = true;
      } else {
        out.transport_error = httplib::to_string(err);
      }
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }
};

inline std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg) {
  validate(cfg);
  if (cfg.kind == BackendConfig::Kind::Mock) return std::make_unique<MockBackend>(cfg.positive_skew);
  return std::make_unique<HttpBackend>(cfg, std::make_shared<HttplibTransport>());
}

}  // namespace syngraph
