#include "tagkit/http.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "json.hpp"

#include "tagkit/text.hpp"

namespace tagkit {

using nlohmann::json;

namespace {

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix, may be empty
};

SplitUrl split_base_url(const std::string& base_url) {
    const size_t scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url must include a scheme: " + base_url);
    }
    const size_t path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.origin = base_url;
    } else {
        out.origin = base_url.substr(0, path_start);
        out.prefix = base_url.substr(path_start);
        while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    }
    return out;
}

class HttplibTransport : public HttpTransport {
public:
    HttplibTransport(const std::string& base_url, double timeout_s)
        : url_(split_base_url(base_url)), client_(url_.origin) {
        const auto seconds = static_cast<time_t>(timeout_s);
        const auto usec = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
        client_.set_connection_timeout(seconds, usec);
        client_.set_read_timeout(seconds, usec);
        client_.set_write_timeout(seconds, usec);
    }

    HttpResponse post_json(const std::string& path, const std::string& body,
                           const HttpHeaders& headers) override {
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client_.Post(url_.prefix + path, h, body, "application/json");
        HttpResponse out;
        if (!res) {
            out.status = 0;
            out.error = "transport: " + httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

private:
    SplitUrl url_;
    httplib::Client client_;
};

// Jitter spreads concurrent retries apart; +-25% of the nominal delay.
int64_t apply_jitter(int64_t delay_ms) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    const double factor = 0.75 + 0.5 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    return static_cast<int64_t>(static_cast<double>(delay_ms) * factor);
}

bool retriable_status(int status) { return status == 0 || status == 429 || status >= 500; }

// Runs one request through the rate limiter and retry schedule. Throws
// BackendError; fills *attempts either way.
HttpResponse post_with_retry(HttpTransport& transport, RateLimiter& limiter,
                             const RetryPolicy& policy, const SleepFn& sleep,
                             const std::string& path, const std::string& body,
                             const HttpHeaders& headers, int* attempts) {
    std::string last_error;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        if (attempts) *attempts = attempt;
        limiter.acquire(sleep);
        HttpResponse resp = transport.post_json(path, body, headers);
        if (resp.status >= 200 && resp.status < 300) {
            if (resp.body.empty()) {
                throw BackendError("empty response body from " + path, false);
            }
            return resp;
        }
        if (resp.status == 401 || resp.status == 403) {
            throw BackendError("authentication failed (HTTP " + std::to_string(resp.status) + ")",
                               false);
        }
        if (!retriable_status(resp.status)) {
            throw BackendError("HTTP " + std::to_string(resp.status) + " from " + path + ": " +
                                   resp.body.substr(0, 200),
                               false);
        }
        last_error = resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status);
        if (attempt < policy.max_attempts) {
            int64_t delay = static_cast<int64_t>(policy.base_backoff_ms) << (attempt - 1);
            if (policy.jitter) delay = apply_jitter(delay);
            sleep(std::chrono::milliseconds(delay));
        }
    }
    throw BackendError("request failed after " + std::to_string(policy.max_attempts) +
                           " attempts: " + last_error,
                       true);
}

HttpHeaders auth_headers(const std::string& api_key_env) {
    HttpHeaders headers;
    if (!api_key_env.empty()) {
        if (const char* key = std::getenv(api_key_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
    }
    return headers;
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, double timeout_s) {
    return std::make_unique<HttplibTransport>(base_url, timeout_s);
}

RateLimiter::RateLimiter(std::chrono::milliseconds interval)
    : interval_(interval), next_free_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire(const SleepFn& sleep) {
    if (interval_.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_free_);
        next_free_ = slot + interval_;
    }
    const auto now = std::chrono::steady_clock::now();
    if (slot > now) {
        sleep(std::chrono::duration_cast<std::chrono::milliseconds>(slot - now));
    }
}

HttpChatBackend::HttpChatBackend(RemoteBackendConfig cfg)
    : HttpChatBackend(std::move(cfg), nullptr, default_sleep) {
    transport_ = make_http_transport(cfg_.base_url, cfg_.timeout_s);
}

HttpChatBackend::HttpChatBackend(RemoteBackendConfig cfg, std::unique_ptr<HttpTransport> transport,
                                 SleepFn sleep)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      limiter_(std::chrono::milliseconds(cfg_.retry.rate_interval_ms)) {}

CompletionResult HttpChatBackend::complete(const CompletionRequest& req) {
    if (req.prompt.empty()) throw BackendError("chat: empty prompt", false);

    const json payload{{"model", cfg_.model},
                       {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
                       {"temperature", req.temperature}};

    const auto started = std::chrono::steady_clock::now();
    int attempts = 1;
    const HttpResponse resp =
        post_with_retry(*transport_, limiter_, cfg_.retry, sleep_, "/chat/completions",
                        payload.dump(), auth_headers(cfg_.api_key_env), &attempts);

    json parsed = json::parse(resp.body, nullptr, false);
    if (parsed.is_discarded()) {
        throw BackendError("chat: response is not valid JSON", false);
    }
    const json* content = nullptr;
    if (parsed.contains("choices") && parsed["choices"].is_array() && !parsed["choices"].empty()) {
        const json& msg = parsed["choices"][0];
        if (msg.contains("message") && msg["message"].contains("content") &&
            msg["message"]["content"].is_string()) {
            content = &msg["message"]["content"];
        }
    }
    if (!content) {
        throw BackendError("chat: response missing choices[0].message.content", false);
    }

    CompletionResult result;
    result.text = content->get<std::string>();
    result.backend_name = name();
    result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    result.attempt_count = attempts;
    return result;
}

std::string HttpChatBackend::name() const { return "http-chat:" + cfg_.model; }

HttpEncoder::HttpEncoder(RemoteBackendConfig cfg, size_t batch_size)
    : HttpEncoder(std::move(cfg), nullptr, default_sleep, batch_size) {
    transport_ = make_http_transport(cfg_.base_url, cfg_.timeout_s);
}

HttpEncoder::HttpEncoder(RemoteBackendConfig cfg, std::unique_ptr<HttpTransport> transport,
                         SleepFn sleep, size_t batch_size)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      limiter_(std::chrono::milliseconds(cfg_.retry.rate_interval_ms)),
      batch_size_(std::max<size_t>(1, batch_size)) {}

EmbeddingVector HttpEncoder::encode(std::string_view text) {
    return encode_many({std::string(text)}).front();
}

std::vector<EmbeddingVector> HttpEncoder::encode_many(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (size_t begin = 0; begin < texts.size(); begin += batch_size_) {
        const size_t end = std::min(texts.size(), begin + batch_size_);
        json input = json::array();
        for (size_t i = begin; i < end; ++i) input.push_back(texts[i]);
        const json payload{{"model", cfg_.model}, {"input", input}};

        const HttpResponse resp =
            post_with_retry(*transport_, limiter_, cfg_.retry, sleep_, "/embeddings",
                            payload.dump(), auth_headers(cfg_.api_key_env), nullptr);

        json parsed = json::parse(resp.body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array() ||
            parsed["data"].size() != end - begin) {
            throw BackendError("embeddings: malformed response", false);
        }
        for (size_t i = begin; i < end; ++i) {
            const json& item = parsed["data"][i - begin];
            if (!item.contains("embedding") || !item["embedding"].is_array()) {
                throw BackendError("embeddings: missing data[i].embedding", false);
            }
            EmbeddingVector v;
            v.values = item["embedding"].get<std::vector<double>>();
            if (is_blank(texts[i])) {
                v.values.assign(v.values.size(), 0.0);
            } else {
                const double n = v.norm();
                if (n > 0.0) {
                    for (double& x : v.values) x /= n;
                }
            }
            out.push_back(std::move(v));
        }
    }
    if (out.empty() && !texts.empty()) {
        throw BackendError("embeddings: empty batch result", false);
    }
    return out;
}

std::string HttpEncoder::name() const { return "http-embed:" + cfg_.model; }

}  // namespace tagkit
