#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tagkit/builder.hpp"
#include "tagkit/corpus.hpp"
#include "tagkit/embed.hpp"
#include "tagkit/llm.hpp"
#include "tagkit/prompt.hpp"

namespace tagkit {

enum class TagSource { generative, selective };

std::string_view to_string(TagSource s);

// A tag assigned to one entity. `tag` is always canonical in the source
// TagSystem; generative scores are cosines and respect the acceptance
// threshold, selective scores are the 1.0 sentinel with the candidate rank
// recorded instead.
struct AssignedTag {
    std::string tag;
    double score = 0.0;
    TagSource source = TagSource::generative;
    std::string matched_candidate;  // surface form the model emitted
    int rank = 0;                   // 1-based rank in the candidate list, selective only
};

struct TaggerConfig {
    double accept_threshold = 0.8;
    size_t candidate_k = 50;
    double candidate_floor = 0.3;
    size_t max_tags_per_item = 10;
    ParseRules parse_rules;

    void validate() const;  // throws ConfigError
};

struct TagResult {
    std::vector<AssignedTag> tags;
    std::vector<std::string> diagnostics;
};

// Late matching: the model emits free-form candidate tags which are mapped
// onto the tag system by cosine argmax, gated by the acceptance threshold.
// Zero parsed candidates is an empty result, not an error.
TagResult tag_generative(const Entity& e, const TagSystem& ts, LlmBackend& llm, Encoder& encoder,
                         const PromptTemplate& tpl, const TaggerConfig& cfg);

// Early matching: embedding retrieval picks the top-k candidate tags, the
// model selects from that list in-prompt, and only exact candidate (or alias)
// matches survive. Off-list outputs are dropped with a diagnostic.
TagResult tag_selective(const Entity& e, const TagSystem& ts, LlmBackend& llm, Encoder& encoder,
                        const SelectiveTemplate& tpl, const TaggerConfig& cfg);

struct TagOutcome {
    std::optional<TagResult> result;
    std::string error;

    bool ok() const { return result.has_value(); }
};

// Tags every entity with bounded workers. Per-entity failures land in their
// slot and never abort the batch; results are keyed by entity id and
// independent of parallelism. The template for the chosen source must be
// non-null.
std::map<std::string, TagOutcome> tag_batch(const std::vector<Entity>& entities,
                                            const TagSystem& ts, TagSource mode, LlmBackend& llm,
                                            Encoder& encoder, const PromptTemplate* generative_tpl,
                                            const SelectiveTemplate* selective_tpl,
                                            const TaggerConfig& cfg, int parallelism = 1);

}  // namespace tagkit
