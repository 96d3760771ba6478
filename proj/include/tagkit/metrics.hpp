#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tagkit/builder.hpp"
#include "tagkit/embed.hpp"

namespace tagkit {

struct Histogram {
    std::map<int64_t, int64_t> bins;
    int64_t total = 0;
};

// Per-item tag lists keyed by entity id; works for tagger output and for
// human ground truth alike.
using ItemTags = std::map<std::string, std::vector<std::string>>;

// Bin f -> number of records with frequency f.
Histogram popularity_histogram(const TagSystem& ts);

// Bin t -> number of items carrying t tags; t = 0 items are counted.
Histogram tags_per_item_histogram(const ItemTags& assignments);

// Mean over items with >= 2 tags of (tag pairs with cosine >= threshold) /
// (all tag pairs); items with fewer tags are excluded from the mean. No
// eligible items is defined as 0.0 with a diagnostic.
double intra_item_redundancy(const ItemTags& assignments, Encoder& encoder, double threshold,
                             std::vector<std::string>* diagnostics = nullptr);

// Fraction of all unordered record pairs with cosine >= threshold. Stored
// embeddings are used when present. Fewer than 2 records is defined as 0.0
// with a diagnostic.
double uniformity(const TagSystem& ts, Encoder& encoder, double threshold,
                  std::vector<std::string>* diagnostics = nullptr);

struct MetricsReport {
    Histogram popularity;
    Histogram tags_per_item;
    double intra_item_redundancy = 0.0;
    double uniformity = 0.0;
    int64_t tag_count = 0;
    double threshold = 0.8;
    std::string provenance;
    std::vector<std::string> diagnostics;
};

enum class ReportFormat { json, csv_histograms };

// json: one versioned document at `path`. csv_histograms: `<stem>.popularity.csv`
// and `<stem>.tags_per_item.csv` with a bin,count header row, where stem is
// `path` minus a trailing ".csv".
void emit_report(const MetricsReport& report, const std::string& path, ReportFormat format);

MetricsReport parse_report_json(const std::string& path);

}  // namespace tagkit
