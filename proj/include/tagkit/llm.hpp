#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tagkit/errors.hpp"

namespace tagkit {

struct CompletionRequest {
    std::string prompt;
    size_t max_output_chars = 4096;
    double temperature = 0.0;  // zero keeps runs reproducible
    std::string request_tag;
};

struct CompletionResult {
    std::string text;
    std::string backend_name;
    int64_t latency_ms = 0;
    int attempt_count = 1;
};

// Uniform completion interface. Implementations throw BackendError; they must
// be shareable across concurrent workers.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    virtual std::string name() const = 0;
};

struct MockLlmConfig {
    size_t top_tags = 5;
    size_t min_token_chars = 2;
    std::string join_delimiter = ", ";
    // Clue regions in rendered prompts open with one of these markers and run
    // to the next '"'.
    std::vector<std::string> clue_markers{"is \"", "为\""};
};

// Deterministic extractive stand-in for a real model: pulls the quoted clue
// regions out of the prompt, tokenizes them, and returns the most frequent
// tokens (ties broken lexicographically). Pure function of the prompt and
// config; temperature is ignored.
class MockLlm : public LlmBackend {
public:
    explicit MockLlm(MockLlmConfig cfg = {});
    CompletionResult complete(const CompletionRequest& req) override;
    std::string name() const override { return "mock"; }

    static std::vector<std::string> extract_clue_regions(std::string_view prompt,
                                                         const std::vector<std::string>& markers);

private:
    MockLlmConfig cfg_;
};

struct CompletionOutcome {
    std::optional<CompletionResult> result;
    std::string error;
    bool retriable_error = false;

    bool ok() const { return result.has_value(); }
};

struct BatchStats {
    size_t failures = 0;
};

// Runs requests on up to `parallelism` workers. result[i] always corresponds
// to reqs[i]; per-request failures are captured in their slot and never abort
// the batch.
std::vector<CompletionOutcome> batch_complete(LlmBackend& backend,
                                              const std::vector<CompletionRequest>& reqs,
                                              int parallelism, BatchStats* stats = nullptr);

}  // namespace tagkit
