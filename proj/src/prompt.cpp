#include "tagkit/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "tagkit/errors.hpp"
#include "tagkit/text.hpp"

namespace tagkit {

std::string_view delimiter_for(DelimiterConvention dc) {
    switch (dc) {
        case DelimiterConvention::ideographic:
            return "、";
        case DelimiterConvention::comma:
        case DelimiterConvention::mixed:
            break;
    }
    return ", ";
}

DelimiterConvention delimiter_convention_from_string(std::string_view name) {
    if (name == "comma") return DelimiterConvention::comma;
    if (name == "ideographic") return DelimiterConvention::ideographic;
    if (name == "mixed") return DelimiterConvention::mixed;
    throw ConfigError("unknown delimiter convention '" + std::string(name) + "'");
}

std::string_view to_string(DelimiterConvention dc) {
    switch (dc) {
        case DelimiterConvention::comma:
            return "comma";
        case DelimiterConvention::ideographic:
            return "ideographic";
        case DelimiterConvention::mixed:
            break;
    }
    return "mixed";
}

namespace {

bool valid_slot_name(std::string_view name) { return valid_clue_name(name); }

// Walks the body once, validating escapes and returning every placeholder
// occurrence in order (duplicates included).
std::vector<std::string> scan_placeholders(const std::string& body) {
    std::vector<std::string> found;
    size_t pos = 0;
    while (pos < body.size()) {
        const char c = body[pos];
        if (c == '{') {
            if (pos + 1 < body.size() && body[pos + 1] == '{') {
                pos += 2;
                continue;
            }
            const size_t close = body.find('}', pos + 1);
            if (close == std::string::npos) {
                throw TemplateError("unterminated placeholder at byte " + std::to_string(pos));
            }
            const std::string name = body.substr(pos + 1, close - pos - 1);
            if (!valid_slot_name(name)) {
                throw TemplateError("invalid slot name '" + name + "' at byte " + std::to_string(pos));
            }
            found.push_back(name);
            pos = close + 1;
        } else if (c == '}') {
            if (pos + 1 < body.size() && body[pos + 1] == '}') {
                pos += 2;
                continue;
            }
            throw TemplateError("stray '}' at byte " + std::to_string(pos));
        } else {
            ++pos;
        }
    }
    return found;
}

std::vector<std::string> scan_slots(const std::string& body) {
    std::vector<std::string> slots;
    std::set<std::string> seen;
    for (auto& name : scan_placeholders(body)) {
        if (seen.insert(name).second) slots.push_back(std::move(name));
    }
    return slots;
}

size_t count_slot(const std::string& body, std::string_view name) {
    size_t count = 0;
    for (const auto& found : scan_placeholders(body)) {
        if (found == name) ++count;
    }
    return count;
}

std::string substitute(const std::string& body,
                       const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out;
    out.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        const char c = body[pos];
        if (c == '{') {
            if (pos + 1 < body.size() && body[pos + 1] == '{') {
                out.push_back('{');
                pos += 2;
                continue;
            }
            const size_t close = body.find('}', pos + 1);
            const std::string name = body.substr(pos + 1, close - pos - 1);
            for (const auto& [slot, value] : values) {
                if (slot == name) {
                    out += value;
                    break;
                }
            }
            pos = close + 1;
        } else if (c == '}' && pos + 1 < body.size() && body[pos + 1] == '}') {
            out.push_back('}');
            pos += 2;
        } else {
            out.push_back(c);
            ++pos;
        }
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string body, DelimiterConvention dc,
                                     std::string language_hint) {
    PromptTemplate tpl;
    tpl.slots_ = scan_slots(body);
    tpl.body_ = std::move(body);
    tpl.dc_ = dc;
    tpl.language_hint_ = std::move(language_hint);
    return tpl;
}

PromptTemplate PromptTemplate::load_file(const std::string& path, DelimiterConvention dc) {
    return parse(read_text_file(path), dc);
}

bool PromptTemplate::has_slot(std::string_view name) const {
    return std::find(slots_.begin(), slots_.end(), name) != slots_.end();
}

std::string PromptTemplate::content_id() const { return fnv1a64_hex(body_); }

SelectiveTemplate SelectiveTemplate::parse(std::string body, DelimiterConvention dc,
                                           std::string language_hint) {
    SelectiveTemplate tpl;
    tpl.base_ = PromptTemplate::parse(std::move(body), dc, std::move(language_hint));
    const size_t n = count_slot(tpl.base_.body(), "candidates");
    if (n != 1) {
        throw TemplateError("selective template must contain {candidates} exactly once, found " +
                            std::to_string(n));
    }
    return tpl;
}

SelectiveTemplate SelectiveTemplate::load_file(const std::string& path, DelimiterConvention dc) {
    return parse(read_text_file(path), dc);
}

RenderResult render(const PromptTemplate& tpl, const Entity& e) {
    RenderResult result;
    std::vector<std::pair<std::string, std::string>> values;
    values.reserve(tpl.slots().size());
    for (const auto& slot : tpl.slots()) {
        const std::string_view v = e.clue(slot);
        if (v.empty()) result.missing_slots.push_back(slot);
        values.emplace_back(slot, std::string(v));
    }
    result.text = substitute(tpl.body(), values);
    return result;
}

RenderResult render_selective(const SelectiveTemplate& tpl, const Entity& e,
                              const std::vector<std::string>& candidates) {
    if (candidates.empty()) {
        throw DataError("render_selective: candidate list must be non-empty");
    }
    const std::string_view sep = delimiter_for(tpl.base().delimiter_convention());
    std::string joined;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (i) joined += sep;
        joined += candidates[i];
    }

    RenderResult result;
    std::vector<std::pair<std::string, std::string>> values;
    for (const auto& slot : tpl.base().slots()) {
        if (slot == "candidates") {
            values.emplace_back(slot, joined);
            continue;
        }
        const std::string_view v = e.clue(slot);
        if (v.empty()) result.missing_slots.push_back(slot);
        values.emplace_back(slot, std::string(v));
    }
    result.text = substitute(tpl.base().body(), values);
    return result;
}

void ParseRules::validate() const {
    if (delimiters.empty()) throw ConfigError("parse rules: delimiters must be non-empty");
    if (min_tag_chars < 1) throw ConfigError("parse rules: min_tag_chars must be >= 1");
    if (min_tag_chars > max_tag_chars) {
        throw ConfigError("parse rules: min_tag_chars must not exceed max_tag_chars");
    }
}

namespace {

// Drops a chat-style preamble: everything up to and including the last
// ':' or '：' that occurs within the first 80 scalars.
std::string_view strip_preamble(std::string_view raw) {
    const auto chars = decode_utf8(raw);
    size_t cut = 0;
    const size_t window = std::min<size_t>(chars.size(), 80);
    for (size_t i = 0; i < window; ++i) {
        if (chars[i].cp == U':' || chars[i].cp == U'：') {
            cut = chars[i].byte_offset + chars[i].byte_len;
        }
    }
    return raw.substr(cut);
}

std::string strip_tag(std::string_view piece, const ParseRules& rules) {
    auto chars = decode_utf8(piece);
    const auto in_set = [](const std::vector<char32_t>& set, char32_t cp) {
        return std::find(set.begin(), set.end(), cp) != set.end();
    };
    size_t b = 0;
    size_t e = chars.size();
    bool progress = true;
    while (progress) {
        progress = false;
        while (b < e && (is_space_char(chars[b].cp) || in_set(rules.strip_chars, chars[b].cp))) {
            ++b;
            progress = true;
        }
        while (e > b && (is_space_char(chars[e - 1].cp) || in_set(rules.strip_chars, chars[e - 1].cp))) {
            --e;
            progress = true;
        }
        while (e > b && in_set(rules.trailing_periods, chars[e - 1].cp)) {
            --e;
            progress = true;
        }
    }
    if (b >= e) return {};
    const size_t begin = chars[b].byte_offset;
    const size_t end = chars[e - 1].byte_offset + chars[e - 1].byte_len;
    return std::string(piece.substr(begin, end - begin));
}

}  // namespace

std::vector<std::string> parse_tag_list(std::string_view raw, const ParseRules& rules,
                                        std::string* diagnostic) {
    const std::string_view body = strip_preamble(raw);

    // Split on every delimiter occurrence in one pass.
    std::vector<std::string> pieces;
    std::string current;
    size_t pos = 0;
    while (pos < body.size()) {
        bool matched = false;
        for (const auto& d : rules.delimiters) {
            if (!d.empty() && body.compare(pos, d.size(), d) == 0) {
                pieces.push_back(std::move(current));
                current.clear();
                pos += d.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            current.push_back(body[pos]);
            ++pos;
        }
    }
    pieces.push_back(std::move(current));

    std::vector<std::string> tags;
    std::set<std::string> seen;
    for (const auto& piece : pieces) {
        std::string tag = strip_tag(piece, rules);
        if (tag.empty()) continue;
        if (rules.lowercase_fold) tag = ascii_lower(tag);
        const size_t len = utf8_length(tag);
        if (len < rules.min_tag_chars || len > rules.max_tag_chars) continue;
        if (seen.insert(tag).second) tags.push_back(std::move(tag));
    }
    if (tags.empty() && diagnostic && !is_blank(raw)) {
        *diagnostic = "no tags parsed from output (" + std::to_string(utf8_length(raw)) + " chars)";
    }
    return tags;
}

}  // namespace tagkit
