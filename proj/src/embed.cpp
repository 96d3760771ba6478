#include "tagkit/embed.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "tagkit/errors.hpp"
#include "tagkit/text.hpp"

namespace tagkit {

using nlohmann::json;

bool EmbeddingVector::is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

double EmbeddingVector::norm() const {
    double acc = 0.0;
    for (const double v : values) acc += v * v;
    return std::sqrt(acc);
}

void EmbeddingMatrix::push(std::string key, EmbeddingVector v) {
    if (!rows.empty() && v.dim() != dim()) {
        throw DataError("embedding matrix: row dimension mismatch (" + std::to_string(v.dim()) +
                        " vs " + std::to_string(dim()) + ")");
    }
    rows.push_back(std::move(v));
    row_keys.push_back(std::move(key));
}

std::vector<EmbeddingVector> Encoder::encode_many(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(encode(t));
    return out;
}

HashingEncoder::HashingEncoder(size_t dimension) : dim_(dimension) {
    if (dimension < 16) throw ConfigError("hashing encoder: dimension must be >= 16");
}

EmbeddingVector HashingEncoder::encode(std::string_view text) {
    EmbeddingVector out;
    out.values.assign(dim_, 0.0);
    if (is_blank(text)) return out;

    const std::string norm_text = ascii_lower(nfc_normalize(text));
    // '#' boundary markers, one per side, then every 3-scalar window.
    std::string padded = "#";
    padded += norm_text;
    padded += "#";
    const auto chars = decode_utf8(padded);
    if (chars.size() < 3) return out;

    for (size_t i = 0; i + 3 <= chars.size(); ++i) {
        const size_t begin = chars[i].byte_offset;
        const size_t end = chars[i + 2].byte_offset + chars[i + 2].byte_len;
        const uint64_t h = fnv1a64(std::string_view(padded).substr(begin, end - begin));
        const size_t bucket = static_cast<size_t>(h % dim_);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        out.values[bucket] += sign;
    }

    const double n = out.norm();
    if (n == 0.0) return EmbeddingVector{std::vector<double>(dim_, 0.0)};
    for (double& v : out.values) v /= n;
    return out;
}

std::string HashingEncoder::name() const {
    return "hashing-trigram-fnv1a64-m" + std::to_string(dim_);
}

double cosine(const EmbeddingVector& v, const EmbeddingVector& w) {
    if (v.dim() != w.dim()) {
        throw DataError("cosine: dimension mismatch (" + std::to_string(v.dim()) + " vs " +
                        std::to_string(w.dim()) + ")");
    }
    double dot = 0.0;
    double nv = 0.0;
    double nw = 0.0;
    for (size_t i = 0; i < v.values.size(); ++i) {
        dot += v.values[i] * w.values[i];
        nv += v.values[i] * v.values[i];
        nw += w.values[i] * w.values[i];
    }
    if (nv == 0.0 || nw == 0.0) return 0.0;  // zero sentinel: no evidence, no match
    const double score = dot / (std::sqrt(nv) * std::sqrt(nw));
    return std::clamp(score, -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(const EmbeddingMatrix& tags, const EmbeddingMatrix& cands) {
    if (tags.row_count() > 0 && cands.row_count() > 0 && tags.dim() != cands.dim()) {
        throw DataError("similarity_matrix: dimension mismatch (" + std::to_string(tags.dim()) +
                        " vs " + std::to_string(cands.dim()) + ")");
    }
    SimilarityMatrix s;
    s.rows = tags.row_count();
    s.cols = cands.row_count();
    s.scores.assign(s.rows * s.cols, 0.0);
    for (size_t i = 0; i < s.rows; ++i) {
        for (size_t j = 0; j < s.cols; ++j) {
            s.scores[i * s.cols + j] = cosine(tags.rows[i], cands.rows[j]);
        }
    }
    return s;
}

std::vector<ScoredKey> top_k(const EmbeddingVector& query, const EmbeddingMatrix& tags, size_t k,
                             double floor) {
    if (k < 1) throw DataError("top_k: k must be >= 1");
    std::vector<ScoredKey> scored;
    scored.reserve(tags.row_count());
    for (size_t i = 0; i < tags.row_count(); ++i) {
        const double score = cosine(query, tags.rows[i]);
        if (score >= floor) scored.push_back({tags.row_keys[i], score});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredKey& a, const ScoredKey& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

namespace {
constexpr int kCacheVersion = 1;
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& backend,
                                                   const std::string& text) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = entries_.find(backend + "\n" + text);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(const std::string& backend, const std::string& text, EmbeddingVector v) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_[backend + "\n" + text] = std::move(v);
}

size_t EmbeddingCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

void EmbeddingCache::load() {
    if (path_.empty()) return;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;

    std::string line;
    if (!std::getline(in, line)) return;
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "embedding-cache" ||
        header.value("version", 0) != kCacheVersion) {
        throw FormatError("embedding cache: unrecognized header in " + path_);
    }

    std::lock_guard<std::mutex> lock(mu_);
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            throw FormatError("embedding cache: malformed line " + std::to_string(line_no) + " in " +
                              path_);
        }
        EmbeddingVector v;
        v.values = rec.at("values").get<std::vector<double>>();
        entries_[rec.at("backend").get<std::string>() + "\n" + rec.at("text").get<std::string>()] =
            std::move(v);
    }
}

void EmbeddingCache::save() const {
    if (path_.empty()) return;
    std::lock_guard<std::mutex> lock(mu_);

    const std::string tmp = path_ + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write embedding cache: " + tmp);
        json header{{"format", "embedding-cache"}, {"version", kCacheVersion}};
        out << header.dump() << "\n";
        for (const auto& [key, vec] : entries_) {
            const size_t sep = key.find('\n');
            json rec{{"backend", key.substr(0, sep)},
                     {"text", key.substr(sep + 1)},
                     {"values", vec.values}};
            out << rec.dump() << "\n";
        }
    }
    std::filesystem::rename(tmp, path_);
}

CachingEncoder::CachingEncoder(std::shared_ptr<Encoder> inner, std::shared_ptr<EmbeddingCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EmbeddingVector CachingEncoder::encode(std::string_view text) {
    const std::string key(text);
    if (auto hit = cache_->get(inner_->name(), key)) return *hit;
    EmbeddingVector v = inner_->encode(text);
    cache_->put(inner_->name(), key, v);
    return v;
}

std::vector<EmbeddingVector> CachingEncoder::encode_many(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> misses;
    std::vector<size_t> miss_idx;
    for (size_t i = 0; i < texts.size(); ++i) {
        if (auto hit = cache_->get(inner_->name(), texts[i])) {
            out[i] = *hit;
        } else {
            misses.push_back(texts[i]);
            miss_idx.push_back(i);
        }
    }
    if (!misses.empty()) {
        auto fresh = inner_->encode_many(misses);
        for (size_t j = 0; j < misses.size(); ++j) {
            cache_->put(inner_->name(), misses[j], fresh[j]);
            out[miss_idx[j]] = std::move(fresh[j]);
        }
    }
    return out;
}

std::string CachingEncoder::name() const { return inner_->name(); }

}  // namespace tagkit
