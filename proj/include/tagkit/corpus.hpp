#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tagkit {

// One textual clue of a multimodal item (title, category, ocr, asr, ...).
struct ClueField {
    std::string name;
    std::string value;
};

// Clue names follow [a-z][a-z0-9_]*.
bool valid_clue_name(std::string_view name);

// Clue values may contain newlines but no other raw control characters.
bool valid_clue_value(std::string_view value);

// A multimodal item reduced to its textual clues. Clue iteration order is the
// declared order and stays stable across runs.
struct Entity {
    std::string id;
    std::vector<ClueField> clues;
    std::vector<std::string> ground_truth_tags;

    std::string_view clue(std::string_view name) const;
    bool has_nonempty_clue() const;
};

// Maps source-record fields onto clue names. `field_to_clue` pairs are
// (source field, clue name) in declared order; each clue name at most once.
struct SchemaMap {
    std::vector<std::pair<std::string, std::string>> field_to_clue;
    std::string id_field;
    std::string hashtag_field;  // empty = no ground-truth extraction

    void validate() const;  // throws ConfigError
};

struct LoadOptions {
    bool strict = true;  // lenient mode skips malformed lines instead of aborting
};

struct LoadStats {
    size_t lines_read = 0;
    size_t skipped = 0;
    std::vector<std::string> warnings;
};

// Reads a UTF-8 JSONL corpus. Duplicate ids and missing id fields always
// abort; malformed lines abort in strict mode and are skipped in lenient mode.
std::vector<Entity> load_corpus(const std::string& path, const SchemaMap& schema,
                                const LoadOptions& opts = {}, LoadStats* stats = nullptr);

// The segment after each '#' up to the next '#' or end, trimmed, empties
// dropped. Text before the first '#' is not a tag.
std::vector<std::string> split_hashtags(std::string_view text);

struct TruncationResult {
    Entity entity;
    bool truncated = false;
    bool all_empty = false;  // budget did not fit even one character
};

// Keeps whole fields in priority order until the budget runs out, tail-cuts
// the first overflowing field, empties the rest. Budgets count Unicode
// scalars and never split one. Clue names missing from `priority` rank last,
// alphabetically.
TruncationResult truncate_clues(const Entity& e, size_t budget_chars,
                                const std::vector<std::string>& priority);

// label_format supports {name} and {value}; non-empty fields in `order` are
// rendered and joined with single newlines.
std::string compose_clue_text(const Entity& e, const std::vector<std::string>& order,
                              std::string_view label_format = "{name}: {value}");

}  // namespace tagkit
