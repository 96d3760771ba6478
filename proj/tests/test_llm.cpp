#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "tagkit/errors.hpp"
#include "tagkit/llm.hpp"
#include "tagkit/text.hpp"

using namespace tagkit;

namespace {

// Keys responses by request_tag; unknown tags raise a retriable BackendError.
class ScriptedLlm : public LlmBackend {
public:
    std::map<std::string, std::string> responses;

    CompletionResult complete(const CompletionRequest& req) override {
        const auto it = responses.find(req.request_tag);
        if (it == responses.end()) {
            throw BackendError("scripted: no response for " + req.request_tag, true);
        }
        CompletionResult r;
        r.text = it->second;
        r.backend_name = name();
        return r;
    }
    std::string name() const override { return "scripted"; }
};

class AlwaysThrows : public LlmBackend {
public:
    CompletionResult complete(const CompletionRequest&) override {
        throw std::runtime_error("boom");
    }
    std::string name() const override { return "thrower"; }
};

CompletionRequest make_req(std::string prompt, std::string tag = "r") {
    CompletionRequest req;
    req.prompt = std::move(prompt);
    req.request_tag = std::move(tag);
    return req;
}

}  // namespace

TEST_CASE("extract_clue_regions pulls quoted spans after each marker") {
    const std::string prompt =
        R"(The "title" is "cook pasta fast". The "ocr" is "boil water". 分类为"美食".)";
    const auto regions =
        MockLlm::extract_clue_regions(prompt, {"is \"", "为\""});
    REQUIRE(regions.size() == 3);
    CHECK(regions[0] == "cook pasta fast");
    CHECK(regions[1] == "boil water");
    CHECK(regions[2] == "美食");
}

TEST_CASE("extract_clue_regions ignores unterminated regions and plain text") {
    CHECK(MockLlm::extract_clue_regions("no markers at all", {"is \""}).empty());
    const auto regions = MockLlm::extract_clue_regions("x is \"unterminated", {"is \""});
    CHECK(regions.empty());
}

TEST_CASE("MockLlm ranks tokens by frequency then lexicographically") {
    // Token counts computed by hand: cat 2, dog 2, ant 1, pets 1, zebra 1.
    MockLlm llm;
    const auto r = llm.complete(
        make_req(R"(The "title" is "cat cat dog". The "ocr" is "pets dog zebra ant".)"));
    CHECK(r.text == "cat, dog, ant, pets, zebra");
    CHECK(r.backend_name == "mock");
    CHECK(r.attempt_count == 1);
}

TEST_CASE("MockLlm output agrees with an independent frequency count") {
    const std::string prompt =
        R"(The "title" is "run run lift jump". The "asr" is "lift run stretch".)";

    // Reference ranking built from scratch.
    std::map<std::string, size_t> counts;
    for (const std::string region : {"run run lift jump", "lift run stretch"}) {
        for (const auto& tok : tokenize_words(region)) {
            if (utf8_length(tok) >= 2) ++counts[tok];
        }
    }
    std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::string expected;
    for (size_t i = 0; i < std::min<size_t>(5, ranked.size()); ++i) {
        if (i) expected += ", ";
        expected += ranked[i].first;
    }

    MockLlm llm;
    CHECK(llm.complete(make_req(prompt)).text == expected);
}

TEST_CASE("MockLlm filters tokens below min_token_chars") {
    MockLlm llm;
    const auto r = llm.complete(make_req(R"(The "title" is "a bb c dd".)"));
    CHECK(r.text == "bb, dd");
}

TEST_CASE("MockLlm caps the tag count at top_tags") {
    MockLlmConfig cfg;
    cfg.top_tags = 2;
    MockLlm llm(cfg);
    const auto r = llm.complete(make_req(R"(The "title" is "aa bb cc dd ee".)"));
    CHECK(r.text == "aa, bb");
}

TEST_CASE("MockLlm respects max_output_chars by whole tokens") {
    MockLlm llm;
    auto req = make_req(R"(The "title" is "cat dog emu fox".)");
    req.max_output_chars = 7;  // "cat" fits, "cat, dog" (8 scalars) does not
    const auto r = llm.complete(req);
    CHECK(r.text == "cat");
    CHECK(utf8_length(r.text) <= 7);
}

TEST_CASE("MockLlm tokenizes ideographic regions as cjk runs") {
    MockLlm llm;
    const auto r = llm.complete(make_req(R"(视频的"标题"为"小户型装修".)"));
    CHECK(r.text == "小户型装修");
}

TEST_CASE("MockLlm is a pure function of prompt and config") {
    MockLlm llm;
    const auto req = make_req(R"(The "title" is "several random words here".)");
    CHECK(llm.complete(req).text == llm.complete(req).text);
}

TEST_CASE("MockLlm rejects empty prompts and zero budgets") {
    MockLlm llm;
    CHECK_THROWS_AS(llm.complete(make_req("")), BackendError);
    auto req = make_req("x is \"y\"");
    req.max_output_chars = 0;
    CHECK_THROWS_AS(llm.complete(req), BackendError);
}

TEST_CASE("MockLlm yields empty text when no region tokenizes") {
    MockLlm llm;
    CHECK(llm.complete(make_req("prompt without quoted regions")).text.empty());
}

TEST_CASE("batch_complete keeps slot order and captures per-request failures") {
    ScriptedLlm llm;
    llm.responses = {{"r0", "alpha"}, {"r2", "gamma"}};
    std::vector<CompletionRequest> reqs = {make_req("p0", "r0"), make_req("p1", "r1"),
                                           make_req("p2", "r2")};
    BatchStats stats;
    const auto outcomes = batch_complete(llm, reqs, 1, &stats);
    REQUIRE(outcomes.size() == 3);
    CHECK(stats.failures == 1);

    REQUIRE(outcomes[0].ok());
    CHECK(outcomes[0].result->text == "alpha");
    CHECK_FALSE(outcomes[1].ok());
    CHECK(outcomes[1].retriable_error);
    CHECK(outcomes[1].error.find("r1") != std::string::npos);
    REQUIRE(outcomes[2].ok());
    CHECK(outcomes[2].result->text == "gamma");
}

TEST_CASE("batch_complete captures non-backend exceptions too") {
    AlwaysThrows llm;
    const auto outcomes = batch_complete(llm, {make_req("p", "r")}, 1);
    REQUIRE(outcomes.size() == 1);
    CHECK_FALSE(outcomes[0].ok());
    CHECK(outcomes[0].error == "boom");
    CHECK_FALSE(outcomes[0].retriable_error);
}

TEST_CASE("batch_complete results are independent of parallelism") {
    ScriptedLlm llm;
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < 40; ++i) {
        const std::string tag = "r" + std::to_string(i);
        if (i % 5 != 3) llm.responses[tag] = "text-" + std::to_string(i);
        reqs.push_back(make_req("p" + std::to_string(i), tag));
    }

    const auto seq = batch_complete(llm, reqs, 1);
    for (const int par : {2, 4, 8}) {
        const auto got = batch_complete(llm, reqs, par);
        REQUIRE(got.size() == seq.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].ok() == seq[i].ok());
            if (got[i].ok()) {
                CHECK(got[i].result->text == seq[i].result->text);
            } else {
                CHECK(got[i].error == seq[i].error);
            }
        }
    }
}

TEST_CASE("batch_complete validates parallelism and handles empty batches") {
    ScriptedLlm llm;
    CHECK_THROWS_AS(batch_complete(llm, {make_req("p")}, 0), DataError);
    BatchStats stats;
    CHECK(batch_complete(llm, {}, 4, &stats).empty());
    CHECK(stats.failures == 0);
}
