#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "syngraph/detail/hash.hpp"
#include "syngraph/error.hpp"

namespace syngraph {

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;
  // Consumed by the mock backend only.
  std::uint64_t seed = 0;
};

inline void validate(const CompletionRequest& req) {
  if (req.prompt.empty()) throw Error(Errc::InvalidArgument, "empty prompt");
  if (req.max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be positive");
  if (req.temperature < 0.0) throw Error(Errc::InvalidArgument, "temperature must be >= 0");
}

struct Completion {
  std::string text;
  // Transport attempts used, including the successful one.
  int attempts = 1;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;

  // Delay before retry number `retry` (1-based): base * multiplier^(retry-1).
  std::chrono::milliseconds delay_before(int retry) const {
    double ms = static_cast<double>(base_delay.count());
    for (int i = 1; i < retry; ++i) ms *= multiplier;
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
  }
};

struct BackendConfig {
  enum class Kind { Mock, Http };

  Kind kind = Kind::Mock;
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};
  int max_in_flight = 1;
  // Mock only: probability that a synthesized rating is drawn from {4, 5}
  // instead of uniformly from 1..5.
  double positive_skew = 0.7;
};

inline void validate(const BackendConfig& cfg) {
  if (cfg.kind == BackendConfig::Kind::Http) {
    if (cfg.endpoint.empty()) throw Error(Errc::InvalidConfig, "http backend needs an endpoint");
    if (cfg.api_key_env.empty()) throw Error(Errc::InvalidConfig, "http backend needs api_key_env");
  }
  if (cfg.retry.max_attempts < 1) throw Error(Errc::InvalidConfig, "retry.max_attempts must be >= 1");
  if (cfg.retry.multiplier < 1.0) throw Error(Errc::InvalidConfig, "retry.multiplier must be >= 1");
  if (cfg.max_in_flight < 1) throw Error(Errc::InvalidConfig, "max_in_flight must be >= 1");
  if (!(cfg.positive_skew >= 0.0 && cfg.positive_skew <= 1.0)) {
    throw Error(Errc::InvalidConfig, "positive_skew must lie in [0, 1]");
  }
}

// Implementations must be safe to call from several threads at once.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Output-format lines that prompt templates end with. The mock backend keys on
// them to decide what kind of answer to produce.
inline constexpr std::string_view kReviewContract = "rating: <1-5>\nreview: <text>";
inline constexpr std::string_view kSelectionContract = "selected: <comma-separated product ids>";
inline constexpr std::string_view kJudgeContract = "LSS: <1-5>";

// Offline backend whose output is a pure function of (prompt, seed). It reads
// the output contract the prompt asks for and fills a matching template:
// judge scores, a pick among "candidate <id>:" lines, a synthesized review,
// or otherwise a profile paragraph.
class MockBackend final : public LlmBackend {
 public:
  explicit MockBackend(double positive_skew = 0.7) : positive_skew_(positive_skew) {}

  Completion complete(const CompletionRequest& request) override {
    validate(request);
    std::uint64_t h = detail::splitmix64(detail::fnv1a64(request.prompt) ^ request.seed);
    const auto& p = request.prompt;
    if (p.find(kJudgeContract) != std::string::npos) return {judge(h), 1};
    if (p.find(kSelectionContract) != std::string::npos) return {select(p, h), 1};
    if (p.find(kReviewContract) != std::string::npos) return {review(h), 1};
    return {profile(h), 1};
  }

  std::string name() const override { return "mock"; }

  // Rating the mock assigns for a given hash; exposed for tests.
  int rating_for(std::uint64_t h) const {
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    std::uint64_t g = detail::splitmix64(h);
    if (u < positive_skew_) return 4 + static_cast<int>(g % 2);
    return 1 + static_cast<int>(g % 5);
  }

 private:
  static const char* pick(std::uint64_t& h, const std::vector<const char*>& options) {
    h = detail::splitmix64(h);
    return options[h % options.size()];
  }

  std::string profile(std::uint64_t h) const {
    static const std::vector<const char*> tone = {"practical", "enthusiastic", "critical",
                                                  "detail-oriented", "budget-conscious"};
    static const std::vector<const char*> focus = {"durability", "value for money", "ease of use",
                                                   "packaging and delivery", "design"};
    static const std::vector<const char*> style = {"short and direct", "long and descriptive",
                                                   "casual", "balanced"};
    std::string out = "Profile: a ";
    out += pick(h, tone);
    out += " reviewer who mostly cares about ";
    out += pick(h, focus);
    out += " and writes ";
    out += pick(h, style);
    out += " reviews.";
    return out;
  }

  std::string review(std::uint64_t h) const {
    int r = rating_for(h);
    static const std::vector<const char*> good = {"Works exactly as described", "Really happy with this purchase",
                                                  "Great quality for the price", "Would buy again"};
    static const std::vector<const char*> mid = {"It is okay overall", "Does the job but nothing special",
                                                 "Mixed feelings about this one"};
    static const std::vector<const char*> bad = {"Disappointed with the quality", "Stopped working quickly",
                                                 "Not worth the money"};
    static const std::vector<const char*> details = {"the setup was simple", "delivery was fast",
                                                    "the material feels sturdy", "the instructions were unclear",
                                                    "it fits my needs"};
    const auto& opener = r >= 4 ? good : (r == 3 ? mid : bad);
    std::string out = "rating: " + std::to_string(r) + "\nreview: ";
    out += pick(h, opener);
    out += " and ";
    out += pick(h, details);
    out += ".";
    return out;
  }

  static std::string select(const std::string& prompt, std::uint64_t h) {
    std::vector<std::string> ids;
    std::size_t pos = 0;
    while (pos < prompt.size()) {
      std::size_t eol = prompt.find('\n', pos);
      if (eol == std::string::npos) eol = prompt.size();
      std::string_view line(prompt.data() + pos, eol - pos);
      if (line.starts_with("candidate ")) {
        auto colon = line.find(':');
        if (colon != std::string_view::npos && colon > 10) ids.emplace_back(line.substr(10, colon - 10));
      }
      pos = eol + 1;
    }
    if (ids.empty()) return "selected: none";
    std::string out = "selected: ";
    std::size_t first = h % ids.size();
    out += ids[first];
    if (ids.size() > 1) {
      std::size_t second = (first + 1 + detail::splitmix64(h) % (ids.size() - 1)) % ids.size();
      out += ", " + ids[second];
    }
    return out;
  }

  static std::string judge(std::uint64_t h) {
    std::string out;
    for (const char* axis : {"LSS", "RHS", "SS", "AS"}) {
      h = detail::splitmix64(h);
      out += std::string(axis) + ": " + std::to_string(1 + h % 5) + "\n";
    }
    return out;
  }

  double positive_skew_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  bool timed_out = false;
  // Connection-level failure other than a timeout.
  std::string transport_error;
};

// Minimal seam over the network so retry behavior is testable offline.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url,
                                 const std::map<std::string, std::string>& headers,
                                 const std::string& body,
                                 std::chrono::milliseconds timeout) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline nlohmann::json chat_request_body(const BackendConfig& cfg, const CompletionRequest& req) {
  return {{"model", cfg.model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

// Chat-completions client. Retries 429, 5xx and timeouts with exponential
// backoff; any other 4xx fails immediately.
class HttpBackend final : public LlmBackend {
 public:
  HttpBackend(BackendConfig cfg, std::shared_ptr<HttpTransport> transport,
              Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); },
              std::function<const char*(const char*)> getenv = [](const char* k) { return std::getenv(k); })
      : cfg_(std::move(cfg)),
        transport_(std::move(transport)),
        sleep_(std::move(sleeper)),
        getenv_(std::move(getenv)) {
    cfg_.kind = BackendConfig::Kind::Http;
    validate(cfg_);
    if (!transport_) throw Error(Errc::InvalidConfig, "http backend needs a transport");
  }

  Completion complete(const CompletionRequest& request) override {
    validate(request);
    const char* key = getenv_(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(Errc::AuthError, "environment variable " + cfg_.api_key_env + " is not set");
    }
    std::map<std::string, std::string> headers = {{"Authorization", std::string("Bearer ") + key}};
    const std::string body = chat_request_body(cfg_, request).dump();

    Errc last = Errc::ServerError;
    std::string last_detail;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      if (attempt > 1) sleep_(cfg_.retry.delay_before(attempt - 1));
      HttpResponse resp = transport_->post_json(cfg_.endpoint, headers, body, cfg_.timeout);
      if (resp.timed_out) {
        last = Errc::Timeout;
        last_detail = "request timed out";
        continue;
      }
      if (!resp.transport_error.empty()) {
        last = Errc::ServerError;
        last_detail = resp.transport_error;
        continue;
      }
      if (resp.status == 429) {
        last = Errc::RateLimited;
        last_detail = "HTTP 429";
        continue;
      }
      if (resp.status >= 500) {
        last = Errc::ServerError;
        last_detail = "HTTP " + std::to_string(resp.status);
        continue;
      }
      if (resp.status == 401 || resp.status == 403) {
        throw Error(Errc::AuthError, "HTTP " + std::to_string(resp.status));
      }
      if (resp.status < 200 || resp.status >= 300) {
        throw Error(Errc::ClientError, "HTTP " + std::to_string(resp.status) + ": " + resp.body);
      }
      return {extract_content(resp.body), attempt};
    }
    throw Error(last, last_detail + " after " + std::to_string(cfg_.retry.max_attempts) + " attempts");
  }

  std::string name() const override { return "http:" + cfg_.model; }

 private:
  static std::string extract_content(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ServerError, std::string("malformed completion body: ") + e.what());
    }
  }

  BackendConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  std::function<const char*(const char*)> getenv_;
};

}  // namespace syngraph
