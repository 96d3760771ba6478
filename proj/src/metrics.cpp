#include "tagkit/metrics.hpp"

#include <fstream>

#include "json.hpp"

#include "tagkit/errors.hpp"

namespace tagkit {

using nlohmann::json;

Histogram popularity_histogram(const TagSystem& ts) {
    Histogram h;
    for (const auto& r : ts.records) {
        ++h.bins[r.frequency];
        ++h.total;
    }
    return h;
}

Histogram tags_per_item_histogram(const ItemTags& assignments) {
    Histogram h;
    for (const auto& [id, tags] : assignments) {
        ++h.bins[static_cast<int64_t>(tags.size())];
        ++h.total;
    }
    return h;
}

namespace {

void check_threshold(double threshold) {
    if (threshold <= 0.0 || threshold > 1.0) {
        throw DataError("metrics: threshold must be in (0, 1]");
    }
}

void note(std::vector<std::string>* diagnostics, std::string message) {
    if (diagnostics != nullptr) diagnostics->push_back(std::move(message));
}

// Redundant-pair fraction among the given embeddings; expects >= 2 rows.
double pair_fraction(const std::vector<EmbeddingVector>& vecs, double threshold) {
    const size_t n = vecs.size();
    int64_t redundant = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (cosine(vecs[i], vecs[j]) >= threshold) ++redundant;
        }
    }
    const auto pairs = static_cast<double>(n * (n - 1) / 2);
    return static_cast<double>(redundant) / pairs;
}

}  // namespace

double intra_item_redundancy(const ItemTags& assignments, Encoder& encoder, double threshold,
                             std::vector<std::string>* diagnostics) {
    check_threshold(threshold);

    // One encoding per distinct tag text across all items.
    std::map<std::string, EmbeddingVector> by_tag;
    for (const auto& [id, tags] : assignments) {
        for (const auto& t : tags) by_tag.emplace(t, EmbeddingVector{});
    }
    std::vector<std::string> distinct;
    distinct.reserve(by_tag.size());
    for (const auto& [t, v] : by_tag) distinct.push_back(t);
    auto encoded = encoder.encode_many(distinct);
    for (size_t i = 0; i < distinct.size(); ++i) by_tag[distinct[i]] = std::move(encoded[i]);

    double sum = 0.0;
    int64_t eligible = 0;
    for (const auto& [id, tags] : assignments) {
        if (tags.size() < 2) continue;
        std::vector<EmbeddingVector> vecs;
        vecs.reserve(tags.size());
        for (const auto& t : tags) vecs.push_back(by_tag.at(t));
        sum += pair_fraction(vecs, threshold);
        ++eligible;
    }
    if (eligible == 0) {
        note(diagnostics, "intra_item_redundancy: no item has 2 or more tags; reporting 0.0");
        return 0.0;
    }
    return sum / static_cast<double>(eligible);
}

double uniformity(const TagSystem& ts, Encoder& encoder, double threshold,
                  std::vector<std::string>* diagnostics) {
    check_threshold(threshold);
    if (ts.records.size() < 2) {
        note(diagnostics, "uniformity: fewer than 2 tags; reporting 0.0");
        return 0.0;
    }
    return pair_fraction(tag_embedding_matrix(ts, encoder).rows, threshold);
}

namespace {

json histogram_to_json(const Histogram& h) {
    json bins = json::object();
    for (const auto& [bin, count] : h.bins) bins[std::to_string(bin)] = count;
    return json{{"bins", std::move(bins)}, {"total", h.total}};
}

Histogram histogram_from_json(const json& j) {
    Histogram h;
    for (const auto& [key, value] : j.at("bins").items()) {
        h.bins[std::stoll(key)] = value.get<int64_t>();
    }
    h.total = j.at("total").get<int64_t>();
    return h;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

std::string histogram_csv(const Histogram& h) {
    std::string csv = "bin,count\n";
    for (const auto& [bin, count] : h.bins) {
        csv += std::to_string(bin);
        csv += ',';
        csv += std::to_string(count);
        csv += '\n';
    }
    return csv;
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& path, ReportFormat format) {
    if (format == ReportFormat::json) {
        json doc{{"format", "metrics-report"},
                 {"version", 1},
                 {"popularity", histogram_to_json(report.popularity)},
                 {"tags_per_item", histogram_to_json(report.tags_per_item)},
                 {"intra_item_redundancy", report.intra_item_redundancy},
                 {"uniformity", report.uniformity},
                 {"tag_count", report.tag_count},
                 {"threshold", report.threshold},
                 {"provenance", report.provenance},
                 {"diagnostics", report.diagnostics}};
        write_text(path, doc.dump(2) + "\n");
        return;
    }
    std::string stem = path;
    if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") {
        stem.resize(stem.size() - 4);
    }
    write_text(stem + ".popularity.csv", histogram_csv(report.popularity));
    write_text(stem + ".tags_per_item.csv", histogram_csv(report.tags_per_item));
}

MetricsReport parse_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "metrics-report" ||
        doc.value("version", 0) != 1) {
        throw FormatError(path + ": not a metrics-report file");
    }
    MetricsReport r;
    try {
        r.popularity = histogram_from_json(doc.at("popularity"));
        r.tags_per_item = histogram_from_json(doc.at("tags_per_item"));
        r.intra_item_redundancy = doc.at("intra_item_redundancy").get<double>();
        r.uniformity = doc.at("uniformity").get<double>();
        r.tag_count = doc.at("tag_count").get<int64_t>();
        r.threshold = doc.at("threshold").get<double>();
        r.provenance = doc.at("provenance").get<std::string>();
        r.diagnostics = doc.at("diagnostics").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return r;
}

}  // namespace tagkit
