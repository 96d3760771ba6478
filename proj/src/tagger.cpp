#include "tagkit/tagger.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "tagkit/errors.hpp"

namespace tagkit {

std::string_view to_string(TagSource s) {
    return s == TagSource::generative ? "generative" : "selective";
}

void TaggerConfig::validate() const {
    if (accept_threshold <= 0.0 || accept_threshold > 1.0) {
        throw ConfigError("tagger: accept_threshold must be in (0, 1]");
    }
    if (candidate_floor <= 0.0 || candidate_floor > 1.0) {
        throw ConfigError("tagger: candidate_floor must be in (0, 1]");
    }
    if (candidate_k < 1) throw ConfigError("tagger: candidate_k must be >= 1");
    if (max_tags_per_item < 1) throw ConfigError("tagger: max_tags_per_item must be >= 1");
    parse_rules.validate();
}

namespace {

CompletionResult complete_for(LlmBackend& llm, std::string prompt, const std::string& id) {
    CompletionRequest req;
    req.prompt = std::move(prompt);
    req.request_tag = id;
    return llm.complete(req);
}

TagResult generative_with_matrix(const Entity& e, const TagSystem& ts,
                                 const EmbeddingMatrix& tag_matrix, LlmBackend& llm,
                                 Encoder& encoder, const PromptTemplate& tpl,
                                 const TaggerConfig& cfg) {
    TagResult out;
    auto rendered = render(tpl, e);
    for (const auto& slot : rendered.missing_slots) {
        out.diagnostics.push_back("missing clue for slot {" + slot + "}");
    }

    const auto completion = complete_for(llm, std::move(rendered.text), e.id);
    std::string parse_note;
    const auto candidates = parse_tag_list(completion.text, cfg.parse_rules, &parse_note);
    if (!parse_note.empty()) out.diagnostics.push_back(parse_note);
    if (candidates.empty()) {
        out.diagnostics.push_back("no candidate tags parsed from model output");
        return out;
    }

    EmbeddingMatrix cand_matrix;
    auto cand_vecs = encoder.encode_many(candidates);
    for (size_t j = 0; j < candidates.size(); ++j) {
        cand_matrix.push(candidates[j], std::move(cand_vecs[j]));
    }
    const SimilarityMatrix s = similarity_matrix(tag_matrix, cand_matrix);

    // Per candidate, the best-matching system tag (first record on ties).
    std::map<std::string, AssignedTag> best;
    for (size_t j = 0; j < s.cols; ++j) {
        size_t best_i = 0;
        for (size_t i = 1; i < s.rows; ++i) {
            if (s.at(i, j) > s.at(best_i, j)) best_i = i;
        }
        const double score = s.at(best_i, j);
        if (score < cfg.accept_threshold) continue;
        const std::string& tag = ts.records[best_i].tag;
        auto it = best.find(tag);
        if (it == best.end() || score > it->second.score) {
            AssignedTag a;
            a.tag = tag;
            a.score = score;
            a.source = TagSource::generative;
            a.matched_candidate = candidates[j];
            best[tag] = std::move(a);
        }
    }

    out.tags.reserve(best.size());
    for (auto& [tag, a] : best) out.tags.push_back(std::move(a));
    std::sort(out.tags.begin(), out.tags.end(), [](const AssignedTag& a, const AssignedTag& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.tag < b.tag;
    });
    if (out.tags.size() > cfg.max_tags_per_item) out.tags.resize(cfg.max_tags_per_item);
    return out;
}

TagResult selective_with_matrix(const Entity& e, const TagSystem& ts,
                                const EmbeddingMatrix& tag_matrix, LlmBackend& llm,
                                Encoder& encoder, const SelectiveTemplate& tpl,
                                const TaggerConfig& cfg) {
    TagResult out;
    std::vector<std::string> order;
    order.reserve(e.clues.size());
    for (const auto& c : e.clues) order.push_back(c.name);
    const EmbeddingVector input = encoder.encode(compose_clue_text(e, order));

    const auto retrieved = top_k(input, tag_matrix, cfg.candidate_k, cfg.candidate_floor);
    if (retrieved.empty()) {
        out.diagnostics.push_back("no candidate tags at or above the retrieval floor");
        return out;
    }
    std::vector<std::string> candidates;
    candidates.reserve(retrieved.size());
    for (const auto& sk : retrieved) candidates.push_back(sk.key);

    auto rendered = render_selective(tpl, e, candidates);
    for (const auto& slot : rendered.missing_slots) {
        out.diagnostics.push_back("missing clue for slot {" + slot + "}");
    }
    const auto completion = complete_for(llm, std::move(rendered.text), e.id);
    std::string parse_note;
    const auto selections = parse_tag_list(completion.text, cfg.parse_rules, &parse_note);
    if (!parse_note.empty()) out.diagnostics.push_back(parse_note);

    // Index candidates and their aliases by exact surface form, keeping the
    // candidate's 1-based retrieval rank.
    std::map<std::string, std::pair<std::string, int>> surface_to_canonical;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const int rank = static_cast<int>(i) + 1;
        surface_to_canonical.emplace(candidates[i], std::make_pair(candidates[i], rank));
        if (const TagRecord* rec = ts.find(candidates[i])) {
            for (const auto& alias : rec->aliases) {
                surface_to_canonical.emplace(alias, std::make_pair(candidates[i], rank));
            }
        }
    }

    std::set<std::string> seen;
    for (const auto& sel : selections) {
        const auto it = surface_to_canonical.find(sel);
        if (it == surface_to_canonical.end()) {
            out.diagnostics.push_back("dropped off-list output '" + sel + "'");
            continue;
        }
        if (!seen.insert(it->second.first).second) continue;
        AssignedTag a;
        a.tag = it->second.first;
        a.score = 1.0;
        a.source = TagSource::selective;
        a.matched_candidate = sel;
        a.rank = it->second.second;
        out.tags.push_back(std::move(a));
        if (out.tags.size() == cfg.max_tags_per_item) break;
    }
    return out;
}

}  // namespace

TagResult tag_generative(const Entity& e, const TagSystem& ts, LlmBackend& llm, Encoder& encoder,
                         const PromptTemplate& tpl, const TaggerConfig& cfg) {
    if (ts.records.empty()) throw DataError("tag: tag system is empty");
    cfg.validate();
    return generative_with_matrix(e, ts, tag_embedding_matrix(ts, encoder), llm, encoder, tpl,
                                  cfg);
}

TagResult tag_selective(const Entity& e, const TagSystem& ts, LlmBackend& llm, Encoder& encoder,
                        const SelectiveTemplate& tpl, const TaggerConfig& cfg) {
    if (ts.records.empty()) throw DataError("tag: tag system is empty");
    cfg.validate();
    return selective_with_matrix(e, ts, tag_embedding_matrix(ts, encoder), llm, encoder, tpl,
                                 cfg);
}

std::map<std::string, TagOutcome> tag_batch(const std::vector<Entity>& entities,
                                            const TagSystem& ts, TagSource mode, LlmBackend& llm,
                                            Encoder& encoder, const PromptTemplate* generative_tpl,
                                            const SelectiveTemplate* selective_tpl,
                                            const TaggerConfig& cfg, int parallelism) {
    if (ts.records.empty()) throw DataError("tag: tag system is empty");
    if (parallelism < 1) throw DataError("tag: parallelism must be >= 1");
    if (mode == TagSource::generative && generative_tpl == nullptr) {
        throw ConfigError("tag: generative mode needs a generation template");
    }
    if (mode == TagSource::selective && selective_tpl == nullptr) {
        throw ConfigError("tag: selective mode needs a selective template");
    }
    cfg.validate();
    {
        std::set<std::string> ids;
        for (const auto& e : entities) {
            if (!ids.insert(e.id).second) throw DataError("tag: duplicate entity id '" + e.id + "'");
        }
    }

    const EmbeddingMatrix tag_matrix = tag_embedding_matrix(ts, encoder);
    std::vector<TagOutcome> slots(entities.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= entities.size()) return;
            try {
                TagResult r = mode == TagSource::generative
                                  ? generative_with_matrix(entities[i], ts, tag_matrix, llm,
                                                           encoder, *generative_tpl, cfg)
                                  : selective_with_matrix(entities[i], ts, tag_matrix, llm,
                                                          encoder, *selective_tpl, cfg);
                slots[i].result = std::move(r);
            } catch (const std::exception& ex) {
                slots[i].error = ex.what();
            }
        }
    };
    const size_t workers =
        std::min<size_t>(static_cast<size_t>(parallelism), std::max<size_t>(entities.size(), 1));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::map<std::string, TagOutcome> out;
    for (size_t i = 0; i < entities.size(); ++i) out[entities[i].id] = std::move(slots[i]);
    return out;
}

}  // namespace tagkit
