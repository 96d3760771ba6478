#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tagkit/builder.hpp"
#include "tagkit/embed.hpp"
#include "tagkit/errors.hpp"
#include "tagkit/llm.hpp"
#include "tagkit/prompt.hpp"
#include "tagkit/tagger.hpp"

using namespace tagkit;

namespace {

class FixedLlm : public LlmBackend {
public:
    explicit FixedLlm(std::string text) : text_(std::move(text)) {}
    CompletionResult complete(const CompletionRequest&) override {
        CompletionResult r;
        r.text = text_;
        r.backend_name = name();
        return r;
    }
    std::string name() const override { return "fixed"; }

private:
    std::string text_;
};

// Fails whenever the request tag (the entity id) is in the block list.
class SelectiveFailLlm : public LlmBackend {
public:
    std::set<std::string> blocked;
    std::string text;

    CompletionResult complete(const CompletionRequest& req) override {
        if (blocked.count(req.request_tag)) {
            throw BackendError("blocked entity " + req.request_tag, false);
        }
        CompletionResult r;
        r.text = text;
        r.backend_name = name();
        return r;
    }
    std::string name() const override { return "selective-fail"; }
};

// Maps known strings to preset vectors; everything else embeds to zero.
class TableEncoder : public Encoder {
public:
    std::map<std::string, std::vector<double>> table;
    size_t dim = 4;

    EmbeddingVector encode(std::string_view text) override {
        const auto it = table.find(std::string(text));
        if (it == table.end()) return EmbeddingVector{std::vector<double>(dim, 0.0)};
        return EmbeddingVector{it->second};
    }
    std::string name() const override { return "table"; }
};

TagSystem hashed_system(HashingEncoder& enc, const std::vector<std::string>& tags) {
    TagSystem ts;
    int64_t freq = static_cast<int64_t>(tags.size()) + 1;
    for (const auto& t : tags) {
        TagRecord r;
        r.tag = t;
        r.frequency = freq--;
        r.embedding = enc.encode(t);
        ts.records.push_back(std::move(r));
    }
    ts.encoder_name = enc.name();
    return ts;
}

Entity clue_entity(std::string id, std::string title) {
    Entity e;
    e.id = std::move(id);
    e.clues = {{"title", std::move(title)}};
    return e;
}

const PromptTemplate kGenerativeTpl = PromptTemplate::parse("tags for \"{title}\":");
const SelectiveTemplate kSelectiveTpl =
    SelectiveTemplate::parse("pick for \"{title}\" from {candidates}:");

}  // namespace

TEST_CASE("TaggerConfig validation") {
    TaggerConfig ok;
    CHECK_NOTHROW(ok.validate());

    TaggerConfig bad = ok;
    bad.accept_threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.accept_threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.candidate_floor = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.candidate_k = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.max_tags_per_item = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("tag source names") {
    CHECK(to_string(TagSource::generative) == "generative");
    CHECK(to_string(TagSource::selective) == "selective");
}

TEST_CASE("generative exact match scores 1.0") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen", "travel"});
    FixedLlm llm("sushi");

    const auto r = tag_generative(clue_entity("e1", "食"), ts, llm, enc, kGenerativeTpl, {});
    REQUIRE(r.tags.size() == 1);
    CHECK(r.tags[0].tag == "sushi");
    CHECK(r.tags[0].score == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.tags[0].matched_candidate == "sushi");
    CHECK(r.tags[0].source == TagSource::generative);
    CHECK(r.tags[0].rank == 0);
}

TEST_CASE("generative drops candidates below the acceptance threshold") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen"});
    FixedLlm llm("quantum, blockchain");

    const auto r = tag_generative(clue_entity("e1", "t"), ts, llm, enc, kGenerativeTpl, {});
    CHECK(r.tags.empty());
}

TEST_CASE("generative with zero parsed candidates is empty, not an error") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi"});
    FixedLlm llm("\"x\"");  // strips to a single scalar, under the length floor

    const auto r = tag_generative(clue_entity("e1", "t"), ts, llm, enc, kGenerativeTpl, {});
    CHECK(r.tags.empty());
    bool noted = false;
    for (const auto& d : r.diagnostics) {
        if (d.find("no candidate tags parsed") != std::string::npos) noted = true;
    }
    CHECK(noted);
}

TEST_CASE("generative assignment equals an argmax double loop over hand-set vectors") {
    // Four axis-aligned tags plus one diagonal, and twelve random candidates.
    TableEncoder enc;
    enc.table = {
        {"t-north", {1.0, 0.0, 0.0, 0.0}},
        {"t-east", {0.0, 1.0, 0.0, 0.0}},
        {"t-south", {0.0, 0.0, 1.0, 0.0}},
        {"t-west", {0.0, 0.0, 0.0, 1.0}},
        {"t-mixed", {0.5, 0.5, 0.5, 0.5}},
    };
    TagSystem ts;
    const std::vector<std::string> tag_names = {"t-north", "t-east", "t-south", "t-west",
                                                "t-mixed"};
    int64_t freq = 10;
    for (const auto& t : tag_names) {
        TagRecord r;
        r.tag = t;
        r.frequency = freq--;
        r.embedding = enc.encode(t);
        ts.records.push_back(std::move(r));
    }

    // Candidate vectors with varying alignment to the tags above.
    std::vector<std::string> cand_names;
    uint64_t state = 7;
    const auto next = [&state] {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return state >> 33;
    };
    std::string completion;
    for (int j = 0; j < 12; ++j) {
        const std::string name = "cand" + std::to_string(j);
        std::vector<double> v(4);
        double norm = 0.0;
        for (auto& x : v) {
            x = static_cast<double>(next() % 1000) / 1000.0 - 0.2;
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (auto& x : v) x /= norm;
        enc.table[name] = v;
        cand_names.push_back(name);
        if (j) completion += ", ";
        completion += name;
    }

    TaggerConfig cfg;
    cfg.accept_threshold = 0.6;
    cfg.max_tags_per_item = 10;

    FixedLlm llm(completion);
    const auto r = tag_generative(clue_entity("e1", "x"), ts, llm, enc, kGenerativeTpl, cfg);

    // Reference: per candidate argmax over tags, threshold, keep max per tag.
    std::map<std::string, std::pair<double, std::string>> best;
    for (const auto& cand : cand_names) {
        const auto& cv = enc.table.at(cand);
        size_t best_i = 0;
        double best_score = -2.0;
        for (size_t i = 0; i < tag_names.size(); ++i) {
            const auto& tv = enc.table.at(tag_names[i]);
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (size_t d = 0; d < 4; ++d) {
                dot += cv[d] * tv[d];
                na += cv[d] * cv[d];
                nb += tv[d] * tv[d];
            }
            const double score = dot / (std::sqrt(na) * std::sqrt(nb));
            if (score > best_score) {
                best_score = score;
                best_i = i;
            }
        }
        if (best_score < cfg.accept_threshold) continue;
        auto it = best.find(tag_names[best_i]);
        if (it == best.end() || best_score > it->second.first) {
            best[tag_names[best_i]] = {best_score, cand};
        }
    }
    std::vector<std::pair<std::string, std::pair<double, std::string>>> expected(best.begin(),
                                                                                 best.end());
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });

    REQUIRE(r.tags.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
        CHECK(r.tags[i].tag == expected[i].first);
        CHECK(r.tags[i].score == doctest::Approx(expected[i].second.first).epsilon(1e-12));
        CHECK(r.tags[i].matched_candidate == expected[i].second.second);
    }
}

TEST_CASE("generative keeps the best-scoring candidate per tag") {
    TableEncoder enc;
    enc.table = {
        {"target", {1.0, 0.0, 0.0, 0.0}},
        {"close", {0.98, std::sqrt(1.0 - 0.98 * 0.98), 0.0, 0.0}},
        {"closer", {0.999, std::sqrt(1.0 - 0.999 * 0.999), 0.0, 0.0}},
    };
    TagSystem ts;
    TagRecord rec;
    rec.tag = "target";
    rec.frequency = 1;
    rec.embedding = enc.encode("target");
    ts.records.push_back(rec);

    FixedLlm llm("close, closer");
    const auto r = tag_generative(clue_entity("e1", "x"), ts, llm, enc, kGenerativeTpl, {});
    REQUIRE(r.tags.size() == 1);
    CHECK(r.tags[0].tag == "target");
    CHECK(r.tags[0].matched_candidate == "closer");
    CHECK(r.tags[0].score == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("generative truncates to max_tags_per_item after sorting") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"alpha", "bravo", "carol", "delta"});
    FixedLlm llm("alpha, bravo, carol, delta");
    TaggerConfig cfg;
    cfg.max_tags_per_item = 2;

    const auto r = tag_generative(clue_entity("e1", "x"), ts, llm, enc, kGenerativeTpl, cfg);
    REQUIRE(r.tags.size() == 2);
    // All four match exactly at 1.0; the tie-break is tag ascending.
    CHECK(r.tags[0].tag == "alpha");
    CHECK(r.tags[1].tag == "bravo");
}

TEST_CASE("tagging an empty system is an error") {
    HashingEncoder enc(64);
    TagSystem empty;
    FixedLlm llm("x");
    CHECK_THROWS_AS(tag_generative(clue_entity("e1", "t"), empty, llm, enc, kGenerativeTpl, {}),
                    DataError);
    CHECK_THROWS_AS(tag_selective(clue_entity("e1", "t"), empty, llm, enc, kSelectiveTpl, {}),
                    DataError);
}

TEST_CASE("selective keeps only exact candidate matches with 1-based ranks") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen", "travel", "stocks"});
    FixedLlm llm("sushi, noodles, ramen");
    TaggerConfig cfg;
    cfg.candidate_floor = 0.01;
    cfg.candidate_k = 4;

    const Entity e = clue_entity("e1", "sushi ramen dinner");
    const auto r = tag_selective(e, ts, llm, enc, kSelectiveTpl, cfg);

    // The reference candidate list, recomputed directly.
    EmbeddingMatrix m;
    for (const auto& rec : ts.records) m.push(rec.tag, rec.embedding);
    const auto expected =
        top_k(enc.encode("title: sushi ramen dinner"), m, cfg.candidate_k, cfg.candidate_floor);

    std::map<std::string, int> expected_rank;
    for (size_t i = 0; i < expected.size(); ++i) {
        expected_rank[expected[i].key] = static_cast<int>(i) + 1;
    }

    REQUIRE(r.tags.size() == 2);
    for (const auto& a : r.tags) {
        CHECK((a.tag == "sushi" || a.tag == "ramen"));
        CHECK(a.score == 1.0);
        CHECK(a.source == TagSource::selective);
        CHECK(a.rank == expected_rank.at(a.tag));
        CHECK(a.matched_candidate == a.tag);
    }

    bool dropped_noted = false;
    for (const auto& d : r.diagnostics) {
        if (d.find("dropped off-list output 'noodles'") != std::string::npos) {
            dropped_noted = true;
        }
    }
    CHECK(dropped_noted);
}

TEST_CASE("selective maps alias surface forms to their canonical tag") {
    HashingEncoder enc(64);
    auto ts = hashed_system(enc, {"sushi", "travel"});
    ts.records[0].aliases = {"Sushi", "sushi dish"};

    FixedLlm llm("sushi dish");
    TaggerConfig cfg;
    cfg.candidate_floor = 0.01;

    const auto r =
        tag_selective(clue_entity("e1", "sushi dinner"), ts, llm, enc, kSelectiveTpl, cfg);
    REQUIRE(r.tags.size() == 1);
    CHECK(r.tags[0].tag == "sushi");
    CHECK(r.tags[0].matched_candidate == "sushi dish");
    CHECK(r.tags[0].rank >= 1);
}

TEST_CASE("selective de-duplicates repeated selections") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen"});
    FixedLlm llm("sushi, sushi, sushi");
    TaggerConfig cfg;
    cfg.candidate_floor = 0.01;

    const auto r = tag_selective(clue_entity("e1", "sushi"), ts, llm, enc, kSelectiveTpl, cfg);
    CHECK(r.tags.size() == 1);
}

TEST_CASE("selective with an empty retrieval set is empty, not an error") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen"});
    FixedLlm llm("sushi");
    TaggerConfig cfg;
    cfg.candidate_floor = 0.999;  // nothing this similar to the clue text

    const auto r =
        tag_selective(clue_entity("e1", "completely unrelated"), ts, llm, enc, kSelectiveTpl, cfg);
    CHECK(r.tags.empty());
    REQUIRE(r.diagnostics.size() >= 1);
    CHECK(r.diagnostics[0].find("retrieval floor") != std::string::npos);
}

TEST_CASE("selective truncates at max_tags_per_item") {
    // Tags long enough to share interior trigrams with the clue text, so all
    // three clear the retrieval floor.
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen", "tacos"});
    FixedLlm llm("sushi, ramen, tacos");
    TaggerConfig cfg;
    cfg.candidate_floor = 0.01;
    cfg.max_tags_per_item = 2;

    const auto r =
        tag_selective(clue_entity("e1", "sushi ramen tacos"), ts, llm, enc, kSelectiveTpl, cfg);
    CHECK(r.tags.size() == 2);
}

TEST_CASE("tag_batch keys outcomes by id and is parallelism independent") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen", "travel", "stocks", "guitar"});

    std::vector<Entity> entities;
    for (int i = 0; i < 25; ++i) {
        entities.push_back(
            clue_entity("e" + std::to_string(i), "sushi trip " + std::to_string(i)));
    }

    MockLlmConfig mock_cfg;
    MockLlm llm(mock_cfg);
    TaggerConfig cfg;
    cfg.accept_threshold = 0.5;
    cfg.candidate_floor = 0.01;

    const PromptTemplate gen = PromptTemplate::parse("The \"title\" is \"{title}\".");

    const auto seq =
        tag_batch(entities, ts, TagSource::generative, llm, enc, &gen, nullptr, cfg, 1);
    const auto par =
        tag_batch(entities, ts, TagSource::generative, llm, enc, &gen, nullptr, cfg, 4);

    REQUIRE(seq.size() == entities.size());
    REQUIRE(par.size() == entities.size());
    for (const auto& [id, outcome] : seq) {
        const auto& other = par.at(id);
        REQUIRE(outcome.ok() == other.ok());
        if (!outcome.ok()) continue;
        REQUIRE(outcome.result->tags.size() == other.result->tags.size());
        for (size_t i = 0; i < outcome.result->tags.size(); ++i) {
            CHECK(outcome.result->tags[i].tag == other.result->tags[i].tag);
            CHECK(outcome.result->tags[i].score == other.result->tags[i].score);
        }
        CHECK(outcome.result->diagnostics == other.result->diagnostics);
    }
}

TEST_CASE("tag_batch captures per-entity failures in their slot") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi", "ramen"});

    SelectiveFailLlm llm;
    llm.text = "sushi";
    llm.blocked = {"e1"};

    const std::vector<Entity> entities = {clue_entity("e0", "sushi"), clue_entity("e1", "sushi"),
                                          clue_entity("e2", "sushi")};
    const PromptTemplate gen = PromptTemplate::parse("t {title}:");
    TaggerConfig cfg;

    const auto out = tag_batch(entities, ts, TagSource::generative, llm, enc, &gen, nullptr, cfg, 2);
    REQUIRE(out.size() == 3);
    CHECK(out.at("e0").ok());
    CHECK(out.at("e2").ok());
    CHECK_FALSE(out.at("e1").ok());
    CHECK(out.at("e1").error.find("blocked entity e1") != std::string::npos);
}

TEST_CASE("tag_batch validates mode templates, ids, and parallelism") {
    HashingEncoder enc(64);
    const auto ts = hashed_system(enc, {"sushi"});
    FixedLlm llm("sushi");
    const PromptTemplate gen = PromptTemplate::parse("t {title}:");
    TaggerConfig cfg;

    CHECK_THROWS_AS(tag_batch({clue_entity("e1", "x")}, ts, TagSource::generative, llm, enc,
                              nullptr, nullptr, cfg, 1),
                    ConfigError);
    CHECK_THROWS_AS(tag_batch({clue_entity("e1", "x")}, ts, TagSource::selective, llm, enc, &gen,
                              nullptr, cfg, 1),
                    ConfigError);
    CHECK_THROWS_AS(tag_batch({clue_entity("dup", "x"), clue_entity("dup", "y")}, ts,
                              TagSource::generative, llm, enc, &gen, nullptr, cfg, 1),
                    DataError);
    CHECK_THROWS_AS(tag_batch({clue_entity("e1", "x")}, ts, TagSource::generative, llm, enc, &gen,
                              nullptr, cfg, 0),
                    DataError);
}
