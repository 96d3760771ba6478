#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tagkit/corpus.hpp"
#include "tagkit/embed.hpp"
#include "tagkit/llm.hpp"
#include "tagkit/prompt.hpp"

namespace tagkit {

// Candidate tag statistics before post-processing. A tag's frequency is the
// number of entities that listed it (each entity counts once per tag).
struct RawCounts {
    std::map<std::string, int64_t> frequency;
    std::map<std::string, std::vector<std::string>> entity_tags;  // id -> per-entity tag list
    size_t entity_count = 0;
    size_t failed_completions = 0;

    int64_t total_tags() const { return static_cast<int64_t>(frequency.size()); }
};

struct TagRecord {
    std::string tag;
    int64_t frequency = 0;
    std::vector<std::string> aliases;  // fused surface forms, sorted
    EmbeddingVector embedding;         // may be empty when not persisted
};

struct BuildManifest {
    std::string corpus_hash;
    std::vector<std::string> template_ids;
    std::string llm_backend;
    std::string encoder_name;
    std::string created_at;
};

// The constructed tag system. Records are sorted by (frequency desc, tag
// asc); after fusion no two records meet the fusion threshold.
struct TagSystem {
    std::vector<TagRecord> records;
    double fusion_threshold = 0.8;
    std::string encoder_name;
    BuildManifest manifest;

    const TagRecord* find(std::string_view tag) const;
    // Canonical tag for a surface form (itself, or the record it was fused
    // into); empty when unknown.
    std::string canonical_for(std::string_view surface) const;
    std::vector<std::string> tag_list() const;
};

// Stored embeddings where present, encoding the rest; rows follow record order.
EmbeddingMatrix tag_embedding_matrix(const TagSystem& ts, Encoder& encoder);

struct BuilderConfig {
    int64_t min_freq = 2;
    int64_t max_freq = 0;  // 0 = auto: 20% of corpus size (never below min_freq)
    double fusion_threshold = 0.8;
    int parallelism = 1;
    ParseRules parse_rules;
};

// Renders every template against every entity, completes, parses, and
// aggregates per-entity tag sets (union across templates, exact-string
// de-dup). Failed completions are counted and skipped. The result does not
// depend on parallelism.
RawCounts generate_candidates(const std::vector<Entity>& corpus,
                              const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                              const ParseRules& rules, int parallelism = 1);

// Retains tags with min_freq <= frequency <= max_freq; max_freq <= 0 means
// unbounded. Per-entity lists are filtered consistently.
RawCounts frequency_truncate(const RawCounts& counts, int64_t min_freq, int64_t max_freq);

// Encodes every tag, links pairs with cosine >= threshold, and collapses
// connected components: the highest-frequency member (ties: lexicographically
// smallest) survives, its frequency becomes the number of distinct entities
// covered by any member, the rest become aliases.
TagSystem semantic_fuse(const RawCounts& counts, Encoder& encoder, double threshold);

// The configured cap, or 20% of the corpus (never below min_freq) when
// max_freq is 0; negative stays negative (unbounded).
int64_t effective_max_freq(const BuilderConfig& config, size_t corpus_size);

struct BuildArtifacts {
    RawCounts raw;
    RawCounts truncated;
    TagSystem system;
};

// generate -> truncate -> fuse, keeping the stage outputs. The caller
// supplies `manifest.corpus_hash` and `manifest.created_at`; the rest is
// filled in.
BuildArtifacts build_artifacts(const std::vector<Entity>& corpus,
                               const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                               Encoder& encoder, const BuilderConfig& config,
                               BuildManifest manifest = {});

TagSystem build_tag_system(const std::vector<Entity>& corpus,
                           const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                           Encoder& encoder, const BuilderConfig& config,
                           BuildManifest manifest = {});

// Versioned, checksummed JSON round-trip including embeddings and manifest.
void save_tag_system(const TagSystem& ts, const std::string& path);
TagSystem load_tag_system(const std::string& path, const std::string& expected_encoder = {},
                          std::string* warning = nullptr);

// Stage artifacts (raw and truncated counts) for resumable builds.
void save_counts(const RawCounts& counts, const std::string& path);
RawCounts load_counts(const std::string& path);

}  // namespace tagkit
