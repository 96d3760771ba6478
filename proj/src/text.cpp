#include "tagkit/text.hpp"

#include <unicode/unorm2.h>
#include <unicode/ustring.h>

#include <array>
#include <cctype>

namespace tagkit {

namespace {

// Decodes one scalar starting at `pos`. Returns consumed byte count.
size_t decode_one(std::string_view s, size_t pos, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    size_t len = 0;
    char32_t min_cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
        min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
        min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
        min_cp = 0x10000;
    } else {
        cp = b0;  // stray continuation or invalid lead byte
        return 1;
    }
    if (pos + len > s.size()) {
        cp = b0;
        return 1;
    }
    char32_t acc = cp;
    for (size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            cp = b0;
            return 1;
        }
        acc = (acc << 6) | (b & 0x3F);
    }
    if (acc < min_cp || acc > 0x10FFFF || (acc >= 0xD800 && acc <= 0xDFFF)) {
        cp = b0;
        return 1;
    }
    cp = acc;
    return len;
}

bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return std::isalnum(static_cast<unsigned char>(cp)) != 0 || cp == U'-' || cp == U'_';
    }
    if (is_cjk_char(cp) || is_space_char(cp)) return false;
    // General punctuation, CJK punctuation, full-width forms.
    if (cp >= 0x2000 && cp <= 0x206F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    return true;  // accented letters and other scripts count as word chars
}

}  // namespace

std::vector<DecodedChar> decode_utf8(std::string_view text) {
    std::vector<DecodedChar> out;
    out.reserve(text.size());
    size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        const size_t len = decode_one(text, pos, cp);
        out.push_back({cp, pos, len});
        pos += len;
    }
    return out;
}

size_t utf8_length(std::string_view text) {
    size_t count = 0;
    size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        pos += decode_one(text, pos, cp);
        ++count;
    }
    return count;
}

std::string_view utf8_prefix(std::string_view text, size_t max_chars) {
    size_t count = 0;
    size_t pos = 0;
    while (pos < text.size() && count < max_chars) {
        char32_t cp = 0;
        pos += decode_one(text, pos, cp);
        ++count;
    }
    return text.substr(0, pos);
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space_char(char32_t cp) {
    switch (cp) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case U'\f':
        case U'\v':
        case 0x00A0:   // no-break space
        case 0x3000:   // ideographic space
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;  // en/em/thin spaces
    }
}

bool is_cjk_char(char32_t cp) {
    if (cp >= 0x4E00 && cp <= 0x9FFF) return true;   // unified ideographs
    if (cp >= 0x3400 && cp <= 0x4DBF) return true;   // extension A
    if (cp >= 0xF900 && cp <= 0xFAFF) return true;   // compatibility ideographs
    if (cp >= 0x3040 && cp <= 0x30FF) return true;   // hiragana + katakana
    return false;
}

bool is_blank(std::string_view text) {
    size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        pos += decode_one(text, pos, cp);
        if (!is_space_char(cp)) return false;
    }
    return true;
}

std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string nfc_normalize(std::string_view text) {
    if (text.empty()) return {};
    UErrorCode ec = U_ZERO_ERROR;
    const UNormalizer2* nfc = unorm2_getNFCInstance(&ec);
    if (U_FAILURE(ec) || nfc == nullptr) return std::string(text);

    std::vector<UChar> u16(text.size() + 1);
    int32_t u16_len = 0;
    ec = U_ZERO_ERROR;
    u_strFromUTF8(u16.data(), static_cast<int32_t>(u16.size()), &u16_len, text.data(),
                  static_cast<int32_t>(text.size()), &ec);
    if (U_FAILURE(ec)) return std::string(text);

    std::vector<UChar> norm(static_cast<size_t>(u16_len) * 3 + 16);
    ec = U_ZERO_ERROR;
    const int32_t norm_len = unorm2_normalize(nfc, u16.data(), u16_len, norm.data(),
                                              static_cast<int32_t>(norm.size()), &ec);
    if (U_FAILURE(ec)) return std::string(text);

    std::string out(static_cast<size_t>(norm_len) * 4 + 4, '\0');
    int32_t out_len = 0;
    ec = U_ZERO_ERROR;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &out_len, norm.data(), norm_len, &ec);
    if (U_FAILURE(ec)) return std::string(text);
    out.resize(static_cast<size_t>(out_len));
    return out;
}

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
    static const char* digits = "0123456789abcdef";
    uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    enum class Cls { none, word, cjk };
    Cls cls = Cls::none;

    auto flush = [&] {
        if (cls == Cls::word) {
            // hyphens and underscores only join inside a token
            size_t b = 0, e = current.size();
            while (b < e && (current[b] == '-' || current[b] == '_')) ++b;
            while (e > b && (current[e - 1] == '-' || current[e - 1] == '_')) --e;
            current = current.substr(b, e - b);
        }
        if (!current.empty()) tokens.push_back(current);
        current.clear();
        cls = Cls::none;
    };

    size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        const size_t len = decode_one(text, pos, cp);
        Cls next = Cls::none;
        if (is_cjk_char(cp)) {
            next = Cls::cjk;
        } else if (is_word_char(cp)) {
            next = Cls::word;
        }
        if (next == Cls::none || next != cls) flush();
        if (next != Cls::none) {
            current.append(text.substr(pos, len));
            cls = next;
        }
        pos += len;
    }
    flush();
    return tokens;
}

std::string trim(std::string_view text) {
    size_t b = 0;
    size_t e = text.size();
    auto chars = decode_utf8(text);
    size_t i = 0;
    while (i < chars.size() && is_space_char(chars[i].cp)) {
        b = chars[i].byte_offset + chars[i].byte_len;
        ++i;
    }
    size_t j = chars.size();
    while (j > i && is_space_char(chars[j - 1].cp)) {
        e = chars[j - 1].byte_offset;
        --j;
    }
    if (b >= e) return {};
    return std::string(text.substr(b, e - b));
}

}  // namespace tagkit
