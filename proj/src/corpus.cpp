#include "tagkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "tagkit/errors.hpp"
#include "tagkit/text.hpp"

namespace tagkit {

using nlohmann::json;

bool valid_clue_name(std::string_view name) {
    if (name.empty()) return false;
    if (name[0] < 'a' || name[0] > 'z') return false;
    for (const char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

bool valid_clue_value(std::string_view value) {
    for (const char c : value) {
        const auto b = static_cast<unsigned char>(c);
        if (b < 0x20 && c != '\n') return false;
        if (b == 0x7F) return false;
    }
    return true;
}

std::string_view Entity::clue(std::string_view name) const {
    for (const auto& f : clues) {
        if (f.name == name) return f.value;
    }
    return {};
}

bool Entity::has_nonempty_clue() const {
    return std::any_of(clues.begin(), clues.end(),
                       [](const ClueField& f) { return !f.value.empty(); });
}

void SchemaMap::validate() const {
    if (id_field.empty()) throw ConfigError("schema: id_field is required");
    std::set<std::string> seen;
    for (const auto& [field, clue] : field_to_clue) {
        if (field.empty()) throw ConfigError("schema: empty source field name");
        if (!valid_clue_name(clue)) throw ConfigError("schema: invalid clue name '" + clue + "'");
        if (!seen.insert(clue).second) {
            throw ConfigError("schema: clue name '" + clue + "' mapped more than once");
        }
    }
}

std::vector<std::string> split_hashtags(std::string_view text) {
    std::vector<std::string> tags;
    size_t pos = text.find('#');
    while (pos != std::string_view::npos) {
        const size_t next = text.find('#', pos + 1);
        const size_t end = (next == std::string_view::npos) ? text.size() : next;
        std::string tag = trim(text.substr(pos + 1, end - pos - 1));
        if (!tag.empty()) tags.push_back(std::move(tag));
        pos = next;
    }
    return tags;
}

namespace {

std::string json_field_as_text(const json& rec, const std::string& key) {
    const auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    return it->dump();  // numbers/bools kept as their literal text
}

// Control characters arrive JSON-escaped; fold the ones the clue contract
// rejects into spaces rather than failing the record.
std::string sanitize_value(std::string value) {
    for (char& c : value) {
        const auto b = static_cast<unsigned char>(c);
        if ((b < 0x20 && c != '\n') || b == 0x7F) c = ' ';
    }
    return value;
}

}  // namespace

std::vector<Entity> load_corpus(const std::string& path, const SchemaMap& schema,
                                const LoadOptions& opts, LoadStats* stats) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);

    std::vector<Entity> entities;
    std::set<std::string> seen_ids;
    LoadStats local;
    LoadStats& st = stats ? *stats : local;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++st.lines_read;
        if (line.empty() || is_blank(line)) continue;

        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            const std::string msg = "corpus line " + std::to_string(line_no) + ": malformed JSON object";
            if (opts.strict) throw FormatError(msg);
            ++st.skipped;
            st.warnings.push_back(msg + " (skipped)");
            continue;
        }

        const std::string id = json_field_as_text(rec, schema.id_field);
        if (id.empty()) {
            throw DataError("corpus line " + std::to_string(line_no) + ": missing id field '" +
                            schema.id_field + "'");
        }
        if (!seen_ids.insert(id).second) {
            throw DataError("corpus line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
        }

        Entity e;
        e.id = id;
        for (const auto& [field, clue] : schema.field_to_clue) {
            std::string value = sanitize_value(json_field_as_text(rec, field));
            e.clues.push_back({clue, std::move(value)});
        }
        if (!schema.hashtag_field.empty()) {
            e.ground_truth_tags = split_hashtags(json_field_as_text(rec, schema.hashtag_field));
        }
        if (!e.has_nonempty_clue()) {
            const std::string msg =
                "corpus line " + std::to_string(line_no) + ": entity '" + id + "' has no non-empty clue";
            if (opts.strict) throw DataError(msg);
            ++st.skipped;
            st.warnings.push_back(msg + " (skipped)");
            seen_ids.erase(id);
            continue;
        }
        entities.push_back(std::move(e));
    }
    return entities;
}

TruncationResult truncate_clues(const Entity& e, size_t budget_chars,
                                const std::vector<std::string>& priority) {
    if (budget_chars == 0) throw DataError("truncate_clues: budget must be > 0");

    // Allocation order: listed names first, then unlisted names alphabetically.
    std::vector<std::string> order;
    std::set<std::string> listed;
    for (const auto& name : priority) {
        if (listed.insert(name).second) order.push_back(name);
    }
    std::vector<std::string> unlisted;
    for (const auto& f : e.clues) {
        if (!listed.count(f.name)) unlisted.push_back(f.name);
    }
    std::sort(unlisted.begin(), unlisted.end());
    unlisted.erase(std::unique(unlisted.begin(), unlisted.end()), unlisted.end());
    order.insert(order.end(), unlisted.begin(), unlisted.end());

    std::map<std::string, std::string> new_values;
    size_t remaining = budget_chars;
    bool truncated = false;
    for (const auto& name : order) {
        const std::string_view value = e.clue(name);
        if (value.empty()) continue;
        const size_t len = utf8_length(value);
        if (len <= remaining) {
            new_values[name] = std::string(value);
            remaining -= len;
        } else {
            truncated = true;
            new_values[name] = std::string(utf8_prefix(value, remaining));
            remaining = 0;
        }
    }

    TruncationResult result;
    result.entity.id = e.id;
    result.entity.ground_truth_tags = e.ground_truth_tags;
    for (const auto& f : e.clues) {
        const auto it = new_values.find(f.name);
        result.entity.clues.push_back({f.name, it == new_values.end() ? std::string() : it->second});
    }
    result.truncated = truncated;
    result.all_empty = e.has_nonempty_clue() && !result.entity.has_nonempty_clue();
    return result;
}

std::string compose_clue_text(const Entity& e, const std::vector<std::string>& order,
                              std::string_view label_format) {
    if (order.empty()) throw DataError("compose_clue_text: order must be non-empty");
    std::string out;
    for (const auto& name : order) {
        const std::string_view value = e.clue(name);
        if (value.empty()) continue;
        std::string piece(label_format);
        const auto sub = [&piece](std::string_view slot, std::string_view repl) {
            size_t pos = 0;
            while ((pos = piece.find(slot, pos)) != std::string::npos) {
                piece.replace(pos, slot.size(), repl);
                pos += repl.size();
            }
        };
        sub("{name}", name);
        sub("{value}", value);
        if (!out.empty()) out.push_back('\n');
        out += piece;
    }
    return out;
}

}  // namespace tagkit
