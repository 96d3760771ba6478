#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tagkit/corpus.hpp"

namespace tagkit {

enum class DelimiterConvention { comma, ideographic, mixed };

std::string_view delimiter_for(DelimiterConvention dc);
DelimiterConvention delimiter_convention_from_string(std::string_view name);  // throws ConfigError
std::string_view to_string(DelimiterConvention dc);

// Instruction template with {slot} placeholders. {{ and }} escape literal
// braces. Malformed placeholders fail at parse time, never at render time.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string body,
                                DelimiterConvention dc = DelimiterConvention::comma,
                                std::string language_hint = {});
    static PromptTemplate load_file(const std::string& path,
                                    DelimiterConvention dc = DelimiterConvention::comma);

    const std::string& body() const { return body_; }
    const std::vector<std::string>& slots() const { return slots_; }
    bool has_slot(std::string_view name) const;
    DelimiterConvention delimiter_convention() const { return dc_; }
    const std::string& language_hint() const { return language_hint_; }
    // Stable identity for build manifests: hash of the body text.
    std::string content_id() const;

private:
    std::string body_;
    std::vector<std::string> slots_;  // first-occurrence order, unique
    DelimiterConvention dc_ = DelimiterConvention::comma;
    std::string language_hint_;
};

// A template with a mandatory {candidates} slot, present exactly once.
class SelectiveTemplate {
public:
    static SelectiveTemplate parse(std::string body,
                                   DelimiterConvention dc = DelimiterConvention::comma,
                                   std::string language_hint = {});
    static SelectiveTemplate load_file(const std::string& path,
                                       DelimiterConvention dc = DelimiterConvention::comma);

    const PromptTemplate& base() const { return base_; }

private:
    PromptTemplate base_;
};

struct RenderResult {
    std::string text;
    std::vector<std::string> missing_slots;  // substituted as empty strings
};

RenderResult render(const PromptTemplate& tpl, const Entity& e);

// Joins candidates with the template's delimiter convention before
// substituting {candidates}. Empty candidate lists are an error.
RenderResult render_selective(const SelectiveTemplate& tpl, const Entity& e,
                              const std::vector<std::string>& candidates);

// How raw model output is turned back into a tag list.
struct ParseRules {
    std::vector<std::string> delimiters{",", "、", "，"};
    size_t min_tag_chars = 2;
    size_t max_tag_chars = 64;
    // Stripped from both ends alongside whitespace.
    std::vector<char32_t> strip_chars{U'"', U'\'', U'`', U'“', U'”', U'‘', U'’',
                                      U'「', U'」', U'『', U'』'};
    // Stripped from the tail only.
    std::vector<char32_t> trailing_periods{U'.', U'。'};
    bool lowercase_fold = false;

    void validate() const;  // throws ConfigError
};

// Splits untrusted model output into tags: a chat-style preamble ending in a
// colon within the first 80 scalars is dropped, then split on any delimiter,
// strip, length-filter, and de-duplicate keeping first occurrence. Never
// throws on odd input; unparseable text yields an empty list and a note in
// *diagnostic.
std::vector<std::string> parse_tag_list(std::string_view raw, const ParseRules& rules,
                                        std::string* diagnostic = nullptr);

}  // namespace tagkit
