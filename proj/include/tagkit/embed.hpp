#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tagkit {

// Unit-norm dense text representation. All-zero values are the designated
// sentinel for empty/whitespace text.
struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }
    bool is_zero() const;
    double norm() const;
};

// Row-major stack of embeddings with the source texts they came from.
struct EmbeddingMatrix {
    std::vector<EmbeddingVector> rows;
    std::vector<std::string> row_keys;

    size_t row_count() const { return rows.size(); }
    size_t dim() const { return rows.empty() ? 0 : rows.front().dim(); }
    void push(std::string key, EmbeddingVector v);
};

// Text encoder contract: deterministic per backend+text, unit norm for
// non-blank text, zero sentinel for blank text.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual EmbeddingVector encode(std::string_view text) = 0;
    virtual std::string name() const = 0;

    // Bulk entry point; remote encoders override this with batched requests.
    virtual std::vector<EmbeddingVector> encode_many(const std::vector<std::string>& texts);
};

// Offline encoder: character trigrams (inputs NFC-normalized and ASCII
// case-folded, padded with '#') are feature-hashed with FNV-1a 64 — bucket
// = hash mod dim, sign from hash bit 63 — then L2-normalized. Reproducible
// across platforms.
class HashingEncoder : public Encoder {
public:
    explicit HashingEncoder(size_t dimension = 256);  // dimension >= 16

    EmbeddingVector encode(std::string_view text) override;
    std::string name() const override;
    size_t dimension() const { return dim_; }

private:
    size_t dim_;
};

double cosine(const EmbeddingVector& v, const EmbeddingVector& w);

// N x n matching scores between a tag matrix and a candidate matrix;
// entry (i, j) is the cosine of tag row i and candidate row j.
struct SimilarityMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> scores;  // row-major

    double at(size_t i, size_t j) const { return scores[i * cols + j]; }
};

SimilarityMatrix similarity_matrix(const EmbeddingMatrix& tags, const EmbeddingMatrix& cands);

struct ScoredKey {
    std::string key;
    double score = 0.0;
};

// The min(k, #rows with score >= floor) best rows for the query, ordered by
// (score desc, key asc).
std::vector<ScoredKey> top_k(const EmbeddingVector& query, const EmbeddingMatrix& tags, size_t k,
                             double floor);

// Disk-backed embedding store keyed by (backend, text). Writes are
// serialized; the file is content-addressed and safe to delete.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string path = {});

    std::optional<EmbeddingVector> get(const std::string& backend, const std::string& text) const;
    void put(const std::string& backend, const std::string& text, EmbeddingVector v);
    size_t size() const;

    void load();        // ignores a missing file
    void save() const;  // atomic rewrite, entries in sorted key order

private:
    std::string path_;
    mutable std::mutex mu_;
    std::map<std::string, EmbeddingVector> entries_;  // key = backend '\n' text
};

// Wraps an encoder with a shared cache.
class CachingEncoder : public Encoder {
public:
    CachingEncoder(std::shared_ptr<Encoder> inner, std::shared_ptr<EmbeddingCache> cache);

    EmbeddingVector encode(std::string_view text) override;
    std::vector<EmbeddingVector> encode_many(const std::vector<std::string>& texts) override;
    std::string name() const override;

private:
    std::shared_ptr<Encoder> inner_;
    std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace tagkit
