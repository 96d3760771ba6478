#include "tagkit/llm.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "tagkit/text.hpp"

namespace tagkit {

MockLlm::MockLlm(MockLlmConfig cfg) : cfg_(std::move(cfg)) {}

std::vector<std::string> MockLlm::extract_clue_regions(std::string_view prompt,
                                                       const std::vector<std::string>& markers) {
    std::vector<std::string> regions;
    size_t pos = 0;
    while (pos < prompt.size()) {
        size_t best = std::string_view::npos;
        size_t best_len = 0;
        for (const auto& m : markers) {
            const size_t at = prompt.find(m, pos);
            if (at != std::string_view::npos && (best == std::string_view::npos || at < best)) {
                best = at;
                best_len = m.size();
            }
        }
        if (best == std::string_view::npos) break;
        const size_t open = best + best_len;
        const size_t close = prompt.find('"', open);
        if (close == std::string_view::npos) break;
        regions.emplace_back(prompt.substr(open, close - open));
        pos = close + 1;
    }
    return regions;
}

CompletionResult MockLlm::complete(const CompletionRequest& req) {
    if (req.prompt.empty()) throw BackendError("mock: empty prompt", false);
    if (req.max_output_chars == 0) throw BackendError("mock: max_output_chars must be > 0", false);

    std::map<std::string, size_t> counts;  // token -> frequency, key order breaks ties
    for (const auto& region : extract_clue_regions(req.prompt, cfg_.clue_markers)) {
        for (auto& token : tokenize_words(region)) {
            if (utf8_length(token) < cfg_.min_token_chars) continue;
            ++counts[token];
        }
    }

    std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::string text;
    size_t text_chars = 0;
    size_t taken = 0;
    for (const auto& [token, freq] : ranked) {
        (void)freq;
        if (taken >= cfg_.top_tags) break;
        const size_t extra =
            utf8_length(token) + (text.empty() ? 0 : utf8_length(cfg_.join_delimiter));
        if (text_chars + extra > req.max_output_chars) break;
        if (!text.empty()) text += cfg_.join_delimiter;
        text += token;
        text_chars += extra;
        ++taken;
    }

    CompletionResult result;
    result.text = std::move(text);
    result.backend_name = name();
    result.latency_ms = 0;
    result.attempt_count = 1;
    return result;
}

std::vector<CompletionOutcome> batch_complete(LlmBackend& backend,
                                              const std::vector<CompletionRequest>& reqs,
                                              int parallelism, BatchStats* stats) {
    if (parallelism < 1) throw DataError("batch_complete: parallelism must be >= 1");

    std::vector<CompletionOutcome> outcomes(reqs.size());
    std::atomic<size_t> next{0};
    std::atomic<size_t> failures{0};

    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= reqs.size()) return;
            try {
                outcomes[i].result = backend.complete(reqs[i]);
            } catch (const BackendError& err) {
                outcomes[i].error = err.what();
                outcomes[i].retriable_error = err.retriable();
                failures.fetch_add(1);
            } catch (const std::exception& err) {
                outcomes[i].error = err.what();
                failures.fetch_add(1);
            }
        }
    };

    const size_t n_workers = std::min<size_t>(static_cast<size_t>(parallelism), reqs.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    if (stats) stats->failures = failures.load();
    return outcomes;
}

}  // namespace tagkit
