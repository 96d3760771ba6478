#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "tagkit/embed.hpp"
#include "tagkit/llm.hpp"

namespace tagkit {

struct HttpResponse {
    int status = 0;  // 0 = transport failure, see error
    std::string body;
    std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                   const HttpHeaders& headers) = 0;
};

// cpp-httplib transport. base_url may carry a path prefix
// (e.g. https://api.example.com/v1) which is prepended to request paths.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, double timeout_s);

using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
    int max_attempts = 4;       // total attempts, including the first
    int base_backoff_ms = 1000;  // schedule: base * 2^k before retry k
    bool jitter = true;          // deterministic-test runs disable this
    int rate_interval_ms = 250;  // minimum spacing between requests
};

// Paces requests so consecutive acquisitions are at least `interval` apart.
// Contention-safe; waiting happens outside the lock.
class RateLimiter {
public:
    explicit RateLimiter(std::chrono::milliseconds interval);
    void acquire(const SleepFn& sleep);

private:
    std::chrono::milliseconds interval_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_free_;
};

struct RemoteBackendConfig {
    std::string base_url;
    std::string model;
    std::string api_key_env = "TAGKIT_API_KEY";
    double timeout_s = 30.0;
    RetryPolicy retry;
};

// OpenAI-compatible chat-completions client: one user-role message per
// request, retries on 429/5xx/transport with exponential backoff, and maps
// other 4xx to permanent errors.
class HttpChatBackend : public LlmBackend {
public:
    explicit HttpChatBackend(RemoteBackendConfig cfg);
    HttpChatBackend(RemoteBackendConfig cfg, std::unique_ptr<HttpTransport> transport,
                    SleepFn sleep);

    CompletionResult complete(const CompletionRequest& req) override;
    std::string name() const override;

private:
    RemoteBackendConfig cfg_;
    std::unique_ptr<HttpTransport> transport_;
    SleepFn sleep_;
    RateLimiter limiter_;
};

// Remote embedding endpoint speaking {"model":..., "input":[...]} ->
// data[i].embedding. Vectors are re-normalized to unit length on receipt.
class HttpEncoder : public Encoder {
public:
    explicit HttpEncoder(RemoteBackendConfig cfg, size_t batch_size = 64);
    HttpEncoder(RemoteBackendConfig cfg, std::unique_ptr<HttpTransport> transport, SleepFn sleep,
                size_t batch_size = 64);

    EmbeddingVector encode(std::string_view text) override;
    std::vector<EmbeddingVector> encode_many(const std::vector<std::string>& texts) override;
    std::string name() const override;

private:
    RemoteBackendConfig cfg_;
    std::unique_ptr<HttpTransport> transport_;
    SleepFn sleep_;
    RateLimiter limiter_;
    size_t batch_size_;
};

}  // namespace tagkit
