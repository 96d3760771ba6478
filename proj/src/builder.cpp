#include "tagkit/builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tagkit/errors.hpp"
#include "tagkit/text.hpp"

namespace tagkit {

using nlohmann::json;

const TagRecord* TagSystem::find(std::string_view tag) const {
    for (const auto& r : records) {
        if (r.tag == tag) return &r;
    }
    return nullptr;
}

std::string TagSystem::canonical_for(std::string_view surface) const {
    for (const auto& r : records) {
        if (r.tag == surface) return r.tag;
        for (const auto& a : r.aliases) {
            if (a == surface) return r.tag;
        }
    }
    return {};
}

std::vector<std::string> TagSystem::tag_list() const {
    std::vector<std::string> tags;
    tags.reserve(records.size());
    for (const auto& r : records) tags.push_back(r.tag);
    return tags;
}

EmbeddingMatrix tag_embedding_matrix(const TagSystem& ts, Encoder& encoder) {
    EmbeddingMatrix m;
    std::vector<std::string> missing;
    for (const auto& r : ts.records) {
        if (r.embedding.dim() == 0) missing.push_back(r.tag);
    }
    std::map<std::string, EmbeddingVector> encoded;
    if (!missing.empty()) {
        auto fresh = encoder.encode_many(missing);
        for (size_t i = 0; i < missing.size(); ++i) encoded[missing[i]] = std::move(fresh[i]);
    }
    for (const auto& r : ts.records) {
        if (r.embedding.dim() != 0) {
            m.push(r.tag, r.embedding);
        } else {
            m.push(r.tag, encoded.at(r.tag));
        }
    }
    return m;
}

RawCounts generate_candidates(const std::vector<Entity>& corpus,
                              const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                              const ParseRules& rules, int parallelism) {
    if (corpus.empty()) throw DataError("generate: corpus is empty");
    if (templates.empty()) throw DataError("generate: no templates configured");
    rules.validate();

    std::vector<CompletionRequest> requests;
    requests.reserve(corpus.size() * templates.size());
    for (const auto& e : corpus) {
        for (size_t t = 0; t < templates.size(); ++t) {
            CompletionRequest req;
            req.prompt = render(templates[t], e).text;
            req.request_tag = e.id + "#t" + std::to_string(t);
            requests.push_back(std::move(req));
        }
    }

    BatchStats stats;
    const auto outcomes = batch_complete(llm, requests, parallelism, &stats);

    RawCounts counts;
    counts.entity_count = corpus.size();
    counts.failed_completions = stats.failures;

    size_t succeeded = 0;
    for (size_t ei = 0; ei < corpus.size(); ++ei) {
        std::vector<std::string> entity_tags;
        std::set<std::string> seen;
        for (size_t t = 0; t < templates.size(); ++t) {
            const auto& outcome = outcomes[ei * templates.size() + t];
            if (!outcome.ok()) continue;
            ++succeeded;
            for (auto& tag : parse_tag_list(outcome.result->text, rules)) {
                if (seen.insert(tag).second) entity_tags.push_back(std::move(tag));
            }
        }
        if (entity_tags.empty()) continue;
        for (const auto& tag : entity_tags) ++counts.frequency[tag];
        counts.entity_tags[corpus[ei].id] = std::move(entity_tags);
    }

    if (counts.frequency.empty()) {
        if (succeeded == 0) {
            throw BackendError("generate: no candidates generated (all completions failed)", false);
        }
        throw DataError("generate: no candidates generated (no tags parsed from any completion)");
    }
    return counts;
}

namespace {

std::string distribution_summary(const std::map<std::string, int64_t>& frequency) {
    std::vector<int64_t> freqs;
    freqs.reserve(frequency.size());
    for (const auto& [tag, f] : frequency) freqs.push_back(f);
    std::sort(freqs.begin(), freqs.end());
    std::ostringstream out;
    out << frequency.size() << " tags, freq min=" << freqs.front()
        << " median=" << freqs[freqs.size() / 2] << " max=" << freqs.back();
    return out.str();
}

class UnionFind {
public:
    explicit UnionFind(size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    size_t find(size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(size_t a, size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[b] = a;
    }

private:
    std::vector<size_t> parent_;
};

}  // namespace

RawCounts frequency_truncate(const RawCounts& counts, int64_t min_freq, int64_t max_freq) {
    if (min_freq < 1) throw DataError("truncate: min_freq must be >= 1");
    if (max_freq > 0 && min_freq > max_freq) {
        throw DataError("truncate: min_freq must not exceed max_freq");
    }

    RawCounts out;
    out.entity_count = counts.entity_count;
    out.failed_completions = counts.failed_completions;
    for (const auto& [tag, freq] : counts.frequency) {
        if (freq >= min_freq && (max_freq <= 0 || freq <= max_freq)) out.frequency[tag] = freq;
    }
    if (out.frequency.empty()) {
        throw DataError("truncate: no tags in band [" + std::to_string(min_freq) + ", " +
                        (max_freq <= 0 ? std::string("inf") : std::to_string(max_freq)) + "]; " +
                        distribution_summary(counts.frequency));
    }
    for (const auto& [id, tags] : counts.entity_tags) {
        std::vector<std::string> kept;
        for (const auto& tag : tags) {
            if (out.frequency.count(tag)) kept.push_back(tag);
        }
        if (!kept.empty()) out.entity_tags[id] = std::move(kept);
    }
    return out;
}

TagSystem semantic_fuse(const RawCounts& counts, Encoder& encoder, double threshold) {
    if (threshold <= 0.0 || threshold > 1.0) {
        throw DataError("fuse: threshold must be in (0, 1]");
    }
    if (counts.frequency.empty()) throw DataError("fuse: no tags to fuse");

    std::vector<std::string> tags;
    tags.reserve(counts.frequency.size());
    for (const auto& [tag, freq] : counts.frequency) tags.push_back(tag);

    auto embeddings = encoder.encode_many(tags);
    for (size_t i = 0; i < tags.size(); ++i) {
        if (embeddings[i].dim() == 0) {
            throw BackendError("fuse: encoder returned no embedding for tag '" + tags[i] + "'",
                               false);
        }
    }

    // tag -> set of entity ids that listed it
    std::map<std::string, std::set<std::string>> tag_entities;
    for (const auto& [id, entity_tags] : counts.entity_tags) {
        for (const auto& tag : entity_tags) tag_entities[tag].insert(id);
    }

    const size_t n = tags.size();
    UnionFind uf(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (cosine(embeddings[i], embeddings[j]) >= threshold) uf.unite(i, j);
        }
    }

    std::map<size_t, std::vector<size_t>> components;
    for (size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

    TagSystem ts;
    ts.fusion_threshold = threshold;
    ts.encoder_name = encoder.name();
    for (const auto& [root, members] : components) {
        size_t rep = members.front();
        for (const size_t m : members) {
            const int64_t fm = counts.frequency.at(tags[m]);
            const int64_t fr = counts.frequency.at(tags[rep]);
            if (fm > fr || (fm == fr && tags[m] < tags[rep])) rep = m;
        }
        std::set<std::string> covered;
        TagRecord rec;
        rec.tag = tags[rep];
        rec.embedding = embeddings[rep];
        for (const size_t m : members) {
            const auto it = tag_entities.find(tags[m]);
            if (it != tag_entities.end()) covered.insert(it->second.begin(), it->second.end());
            if (m != rep) rec.aliases.push_back(tags[m]);
        }
        std::sort(rec.aliases.begin(), rec.aliases.end());
        rec.frequency = covered.empty() ? counts.frequency.at(tags[rep])
                                        : static_cast<int64_t>(covered.size());
        ts.records.push_back(std::move(rec));
    }

    std::sort(ts.records.begin(), ts.records.end(), [](const TagRecord& a, const TagRecord& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.tag < b.tag;
    });

    // Representatives of distinct components cannot meet the threshold: such
    // a pair would share an edge and hence a component.
    for (size_t i = 0; i < ts.records.size(); ++i) {
        for (size_t j = i + 1; j < ts.records.size(); ++j) {
            if (cosine(ts.records[i].embedding, ts.records[j].embedding) >= threshold) {
                throw DataError("fuse: residual redundancy between '" + ts.records[i].tag +
                                "' and '" + ts.records[j].tag + "'");
            }
        }
    }
    return ts;
}

int64_t effective_max_freq(const BuilderConfig& config, size_t corpus_size) {
    if (config.max_freq != 0) return config.max_freq;
    const auto cap = static_cast<int64_t>(std::ceil(0.2 * static_cast<double>(corpus_size)));
    return std::max(cap, config.min_freq);
}

BuildArtifacts build_artifacts(const std::vector<Entity>& corpus,
                               const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                               Encoder& encoder, const BuilderConfig& config,
                               BuildManifest manifest) {
    BuildArtifacts out;
    out.raw = generate_candidates(corpus, templates, llm, config.parse_rules, config.parallelism);
    out.truncated =
        frequency_truncate(out.raw, config.min_freq, effective_max_freq(config, corpus.size()));
    out.system = semantic_fuse(out.truncated, encoder, config.fusion_threshold);

    manifest.template_ids.clear();
    for (const auto& tpl : templates) manifest.template_ids.push_back(tpl.content_id());
    manifest.llm_backend = llm.name();
    manifest.encoder_name = encoder.name();
    out.system.manifest = std::move(manifest);
    return out;
}

TagSystem build_tag_system(const std::vector<Entity>& corpus,
                           const std::vector<PromptTemplate>& templates, LlmBackend& llm,
                           Encoder& encoder, const BuilderConfig& config, BuildManifest manifest) {
    return build_artifacts(corpus, templates, llm, encoder, config, std::move(manifest)).system;
}

namespace {

constexpr int kTagSystemVersion = 1;
constexpr int kCountsVersion = 1;

json manifest_to_json(const BuildManifest& m) {
    return json{{"corpus_hash", m.corpus_hash},
                {"template_ids", m.template_ids},
                {"llm_backend", m.llm_backend},
                {"encoder_name", m.encoder_name},
                {"created_at", m.created_at}};
}

BuildManifest manifest_from_json(const json& j) {
    BuildManifest m;
    m.corpus_hash = j.value("corpus_hash", "");
    m.template_ids = j.value("template_ids", std::vector<std::string>{});
    m.llm_backend = j.value("llm_backend", "");
    m.encoder_name = j.value("encoder_name", "");
    m.created_at = j.value("created_at", "");
    return m;
}

void write_document(const json& doc, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out << doc.dump(2) << '\n';
        if (!out) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot move " + tmp + " to " + path);
    }
}

json read_document(const std::string& path, const std::string& expected_format, int version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != expected_format) {
        throw FormatError(path + ": not a " + expected_format + " file");
    }
    if (doc.value("version", 0) != version) {
        throw FormatError(path + ": unsupported " + expected_format + " version");
    }
    return doc;
}

}  // namespace

void save_tag_system(const TagSystem& ts, const std::string& path) {
    json records = json::array();
    for (const auto& r : ts.records) {
        records.push_back(json{{"tag", r.tag},
                               {"frequency", r.frequency},
                               {"aliases", r.aliases},
                               {"embedding", r.embedding.values}});
    }
    json doc{{"format", "tag-system"},
             {"version", kTagSystemVersion},
             {"fusion_threshold", ts.fusion_threshold},
             {"encoder_name", ts.encoder_name},
             {"manifest", manifest_to_json(ts.manifest)},
             {"records", std::move(records)}};
    doc["checksum"] = fnv1a64_hex(doc.dump());
    write_document(doc, path);
}

TagSystem load_tag_system(const std::string& path, const std::string& expected_encoder,
                          std::string* warning) {
    json doc = read_document(path, "tag-system", kTagSystemVersion);
    if (!doc.contains("checksum") || !doc["checksum"].is_string()) {
        throw FormatError(path + ": missing checksum");
    }
    const std::string stored = doc["checksum"];
    doc.erase("checksum");
    if (fnv1a64_hex(doc.dump()) != stored) throw FormatError(path + ": checksum mismatch");

    TagSystem ts;
    try {
        ts.fusion_threshold = doc.at("fusion_threshold").get<double>();
        ts.encoder_name = doc.at("encoder_name").get<std::string>();
        ts.manifest = manifest_from_json(doc.at("manifest"));
        for (const auto& jr : doc.at("records")) {
            TagRecord r;
            r.tag = jr.at("tag").get<std::string>();
            r.frequency = jr.at("frequency").get<int64_t>();
            r.aliases = jr.at("aliases").get<std::vector<std::string>>();
            r.embedding.values = jr.at("embedding").get<std::vector<double>>();
            ts.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!expected_encoder.empty() && ts.encoder_name != expected_encoder && warning != nullptr) {
        *warning = "embedding provenance mismatch: tag system was built with '" + ts.encoder_name +
                   "', current encoder is '" + expected_encoder + "'";
    }
    return ts;
}

void save_counts(const RawCounts& counts, const std::string& path) {
    json doc{{"format", "tag-counts"},
             {"version", kCountsVersion},
             {"entity_count", counts.entity_count},
             {"failed_completions", counts.failed_completions},
             {"frequency", counts.frequency},
             {"entity_tags", counts.entity_tags}};
    write_document(doc, path);
}

RawCounts load_counts(const std::string& path) {
    json doc = read_document(path, "tag-counts", kCountsVersion);
    RawCounts counts;
    try {
        counts.entity_count = doc.at("entity_count").get<size_t>();
        counts.failed_completions = doc.at("failed_completions").get<size_t>();
        counts.frequency = doc.at("frequency").get<std::map<std::string, int64_t>>();
        counts.entity_tags =
            doc.at("entity_tags").get<std::map<std::string, std::vector<std::string>>>();
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return counts;
}

}  // namespace tagkit
