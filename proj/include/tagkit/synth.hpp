#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagkit/corpus.hpp"

namespace tagkit {

// Seeded synthetic corpus: topic-clustered entities with title, category,
// ocr, and asr clues plus human-style hashtags. Word choice follows a Zipf
// law inside each topic. Identical config yields identical entities on any
// platform; the generator avoids std:: distributions for that reason.
struct SynthConfig {
    size_t entity_count = 500;
    uint64_t seed = 42;
    size_t topic_count = 12;  // 1..16
    double zipf_skew = 1.1;   // > 0; larger is more skewed

    void validate() const;  // throws ConfigError
};

std::vector<Entity> synth_corpus(const SynthConfig& cfg);

// Field mapping for corpora produced by write_corpus_jsonl.
SchemaMap synth_schema();

void write_corpus_jsonl(const std::vector<Entity>& entities, const std::string& path);

}  // namespace tagkit
