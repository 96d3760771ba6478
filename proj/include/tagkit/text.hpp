#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tagkit {

// UTF-8 helpers used across the toolkit. All "character" counts are Unicode
// scalar values, never bytes. Invalid byte sequences decode as one scalar per
// byte (latin-1 fallback) so every input has a defined, stable decoding.

struct DecodedChar {
    char32_t cp;
    size_t byte_offset;
    size_t byte_len;
};

std::vector<DecodedChar> decode_utf8(std::string_view text);

size_t utf8_length(std::string_view text);

// Longest prefix with at most max_chars scalars. Never splits a scalar.
std::string_view utf8_prefix(std::string_view text, size_t max_chars);

void append_utf8(std::string& out, char32_t cp);

bool is_space_char(char32_t cp);

// Han ideographs plus kana. Used for token boundaries in ideographic text.
bool is_cjk_char(char32_t cp);

bool is_blank(std::string_view text);

// ASCII-only case fold; non-ASCII scalars pass through unchanged.
std::string ascii_lower(std::string_view text);

// Canonical composition (NFC) via ICU. Unconvertible input is returned as-is.
std::string nfc_normalize(std::string_view text);

uint64_t fnv1a64(std::string_view bytes);

std::string fnv1a64_hex(std::string_view bytes);

// Tokens are maximal runs of word characters (alphanumerics plus '-' and '_')
// or maximal runs of CJK scalars; everything else separates. A transition
// between the two classes is also a boundary.
std::vector<std::string> tokenize_words(std::string_view text);

std::string trim(std::string_view text);

}  // namespace tagkit
