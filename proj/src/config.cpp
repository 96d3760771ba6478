#include "tagkit/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tagkit/errors.hpp"

namespace tagkit {

namespace {

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' || c == '.';
}

size_t skip_ws(const std::string& s, size_t i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return i;
}

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw ConfigError("config " + where + ": " + msg);
}

std::string parse_quoted(const std::string& s, size_t& i, const std::string& where) {
    std::string out;
    ++i;  // opening quote
    while (i < s.size()) {
        const char c = s[i];
        if (c == '"') {
            ++i;
            return out;
        }
        if (c == '\\') {
            ++i;
            if (i >= s.size()) break;
            switch (s[i]) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(where, "unsupported escape '\\" + std::string(1, s[i]) + "'");
            }
            ++i;
            continue;
        }
        out += c;
        ++i;
    }
    fail(where, "unterminated string");
}

bool parse_int_token(const std::string& tok, int64_t& out) {
    int64_t v{};
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc() && p == tok.data() + tok.size()) {
        out = v;
        return true;
    }
    return false;
}

bool parse_double_token(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    const double d = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() + tok.size()) {
        out = d;
        return true;
    }
    return false;
}

// One value starting at i; i is left just past it.
ConfigValue parse_value(const std::string& s, size_t& i, const std::string& where) {
    i = skip_ws(s, i);
    if (i >= s.size()) fail(where, "missing value");
    if (s[i] == '"') return parse_quoted(s, i, where);
    if (s[i] == '[') {
        ++i;
        std::vector<std::string> items;
        for (;;) {
            i = skip_ws(s, i);
            if (i < s.size() && s[i] == ']') {
                ++i;
                return items;
            }
            if (i >= s.size() || s[i] != '"') fail(where, "arrays hold quoted strings");
            items.push_back(parse_quoted(s, i, where));
            i = skip_ws(s, i);
            if (i < s.size() && s[i] == ',') {
                ++i;
                continue;
            }
            if (i < s.size() && s[i] == ']') {
                ++i;
                return items;
            }
            fail(where, "expected ',' or ']' in array");
        }
    }
    const size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '#') ++i;
    const std::string tok = s.substr(start, i - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    int64_t iv{};
    if (parse_int_token(tok, iv)) return iv;
    double dv{};
    if (parse_double_token(tok, dv)) return dv;
    fail(where, "cannot parse value '" + tok + "' (strings need quotes)");
}

void require_line_end(const std::string& s, size_t i, const std::string& where) {
    i = skip_ws(s, i);
    if (i < s.size() && s[i] != '#') fail(where, "unexpected trailing text");
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile file;
    std::string section;
    size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = "line " + std::to_string(line_no);
        size_t i = skip_ws(line, 0);
        if (i >= line.size() || line[i] == '#') continue;
        if (line[i] == '[') {
            const size_t close = line.find(']', i);
            if (close == std::string::npos) fail(where, "unterminated section header");
            section = line.substr(i + 1, close - i - 1);
            if (section.empty()) fail(where, "empty section name");
            for (const char c : section) {
                if (!is_key_char(c)) fail(where, "bad section name '" + section + "'");
            }
            require_line_end(line, close + 1, where);
            continue;
        }
        const size_t key_start = i;
        while (i < line.size() && is_key_char(line[i])) ++i;
        const std::string key = line.substr(key_start, i - key_start);
        if (key.empty()) fail(where, "expected a key");
        i = skip_ws(line, i);
        if (i >= line.size() || line[i] != '=') fail(where, "expected '=' after '" + key + "'");
        ++i;
        ConfigValue value = parse_value(line, i, where);
        require_line_end(line, i, where);
        const std::string full = section.empty() ? key : section + "." + key;
        if (!file.entries_.emplace(full, std::move(value)).second) {
            fail(where, "duplicate key '" + full + "'");
        }
    }
    return file;
}

ConfigFile ConfigFile::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
    throw ConfigError("config key " + key + ": expected a string");
}

int64_t ConfigFile::get_int(const std::string& key, int64_t fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (const auto* v = std::get_if<int64_t>(&it->second)) return *v;
    throw ConfigError("config key " + key + ": expected an integer");
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* v = std::get_if<int64_t>(&it->second)) return static_cast<double>(*v);
    throw ConfigError("config key " + key + ": expected a number");
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (const auto* v = std::get_if<bool>(&it->second)) return *v;
    throw ConfigError("config key " + key + ": expected true or false");
}

std::vector<std::string> ConfigFile::get_strings(const std::string& key,
                                                 std::vector<std::string> fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) return *v;
    // A plain string (typical for --set overrides) splits on commas.
    if (const auto* v = std::get_if<std::string>(&it->second)) {
        std::vector<std::string> items;
        size_t start = 0;
        while (start <= v->size()) {
            size_t end = v->find(',', start);
            if (end == std::string::npos) end = v->size();
            std::string item = v->substr(start, end - start);
            const size_t a = item.find_first_not_of(" \t");
            const size_t b = item.find_last_not_of(" \t");
            if (a != std::string::npos) items.push_back(item.substr(a, b - a + 1));
            start = end + 1;
        }
        return items;
    }
    throw ConfigError("config key " + key + ": expected a string array");
}

void ConfigFile::set(const std::string& key, const std::string& raw_value) {
    if (key.empty()) throw ConfigError("override: empty key");
    for (const char c : key) {
        if (!is_key_char(c)) throw ConfigError("override: bad key '" + key + "'");
    }
    std::string raw = raw_value;
    const size_t a = raw.find_first_not_of(" \t");
    const size_t b = raw.find_last_not_of(" \t");
    raw = a == std::string::npos ? std::string{} : raw.substr(a, b - a + 1);

    ConfigValue value;
    if (!raw.empty() && (raw[0] == '"' || raw[0] == '[')) {
        size_t i = 0;
        value = parse_value(raw, i, "--set " + key);
        if (skip_ws(raw, i) != raw.size()) {
            throw ConfigError("config --set " + key + ": unexpected trailing text");
        }
    } else if (raw == "true") {
        value = true;
    } else if (raw == "false") {
        value = false;
    } else {
        int64_t iv{};
        double dv{};
        if (parse_int_token(raw, iv)) {
            value = iv;
        } else if (parse_double_token(raw, dv)) {
            value = dv;
        } else {
            value = raw;  // bare string
        }
    }
    entries_[key] = std::move(value);
}

const std::vector<ConfigKeyDoc>& config_key_docs() {
    static const std::vector<ConfigKeyDoc> docs{
        {"corpus.path", "string", "", "JSONL corpus file"},
        {"corpus.id_field", "string", "id", "source field holding the entity id"},
        {"corpus.hashtag_field", "string", "",
         "source field carrying #hashtags; empty disables ground truth"},
        {"corpus.clue_fields", "string list", "title, category, ocr, asr",
         "source fields used as clues; write source:clue to rename"},
        {"corpus.clue_budget", "int", "0", "max clue scalars per entity; 0 disables truncation"},
        {"templates.generative", "string", "", "generation instruction template file"},
        {"templates.selective", "string", "",
         "selective instruction template file; must contain {candidates}"},
        {"templates.delimiter", "string", "comma",
         "tag delimiter convention: comma, ideographic, or mixed"},
        {"llm.kind", "string", "mock", "chat backend: mock or http"},
        {"llm.base_url", "string", "", "chat endpoint base URL"},
        {"llm.model", "string", "", "chat model name"},
        {"llm.api_key_env", "string", "TAGKIT_API_KEY", "env var holding the chat API key"},
        {"llm.timeout_s", "float", "30.0", "per-request timeout in seconds, chat and embedding"},
        {"encoder.kind", "string", "hashing", "embedding backend: hashing or http"},
        {"encoder.dimension", "int", "256", "hashing encoder dimension, at least 16"},
        {"encoder.base_url", "string", "", "embedding endpoint base URL"},
        {"encoder.model", "string", "", "embedding model name"},
        {"encoder.api_key_env", "string", "TAGKIT_EMBED_API_KEY",
         "env var holding the embedding API key"},
        {"encoder.cache", "string", "", "embedding cache file; empty disables"},
        {"builder.min_freq", "int", "2", "drop tags listed by fewer entities than this"},
        {"builder.max_freq", "int", "0",
         "drop tags listed by more entities; 0 = 20% of corpus, -1 = unbounded"},
        {"builder.fusion_threshold", "float", "0.8", "cosine at or above which tags fuse"},
        {"tagger.accept_threshold", "float", "0.8", "min generative matching score"},
        {"tagger.candidate_k", "int", "50", "selective retrieval depth"},
        {"tagger.candidate_floor", "float", "0.3", "min retrieval cosine for a candidate"},
        {"tagger.max_tags_per_item", "int", "10", "cap on assigned tags per entity"},
        {"parse.min_tag_chars", "int", "2", "min tag length in scalars"},
        {"parse.max_tag_chars", "int", "64", "max tag length in scalars"},
        {"parse.lowercase_fold", "bool", "false", "ASCII-lowercase parsed tags"},
        {"metrics.threshold", "float", "0.8",
         "cosine at or above which a tag pair counts as redundant"},
        {"run.output_dir", "string", "out", "artifact directory"},
        {"run.deterministic", "bool", "false", "mock backends, fixed clock, no jitter"},
        {"run.parallelism", "int", "1", "worker count for batch stages"},
    };
    return docs;
}

namespace {

void check_known_keys(const ConfigFile& file) {
    const auto& docs = config_key_docs();
    for (const auto& [key, value] : file.entries()) {
        bool known = false;
        for (const auto& doc : docs) {
            if (doc.key == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("config key " + key + ": unknown key");
    }
}

int64_t require_range(const ConfigFile& f, const std::string& key, int64_t fallback, int64_t lo,
                      int64_t hi) {
    const int64_t v = f.get_int(key, fallback);
    if (v < lo || v > hi) {
        throw ConfigError("config key " + key + ": out of range [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    }
    return v;
}

double require_fraction(const ConfigFile& f, const std::string& key, double fallback) {
    const double v = f.get_double(key, fallback);
    if (!(v > 0.0) || v > 1.0) throw ConfigError("config key " + key + ": must be in (0, 1]");
    return v;
}

}  // namespace

RunConfig run_config_from(const ConfigFile& file) {
    check_known_keys(file);
    RunConfig cfg;

    cfg.corpus_path = file.get_string("corpus.path");
    cfg.schema.id_field = file.get_string("corpus.id_field", "id");
    cfg.schema.hashtag_field = file.get_string("corpus.hashtag_field", "");
    const auto clue_fields =
        file.get_strings("corpus.clue_fields", {"title", "category", "ocr", "asr"});
    for (const auto& entry : clue_fields) {
        const size_t colon = entry.find(':');
        if (colon == std::string::npos) {
            cfg.schema.field_to_clue.emplace_back(entry, entry);
        } else {
            cfg.schema.field_to_clue.emplace_back(entry.substr(0, colon),
                                                  entry.substr(colon + 1));
        }
    }
    cfg.schema.validate();
    cfg.clue_budget =
        static_cast<size_t>(require_range(file, "corpus.clue_budget", 0, 0, 1 << 20));

    cfg.generative_template = file.get_string("templates.generative");
    cfg.selective_template = file.get_string("templates.selective");
    cfg.delimiter =
        delimiter_convention_from_string(file.get_string("templates.delimiter", "comma"));

    const std::string llm_kind = file.get_string("llm.kind", "mock");
    if (llm_kind == "mock") {
        cfg.llm_kind = LlmKind::mock;
    } else if (llm_kind == "http") {
        cfg.llm_kind = LlmKind::http;
    } else {
        throw ConfigError("config key llm.kind: expected mock or http");
    }
    cfg.llm_http.base_url = file.get_string("llm.base_url");
    cfg.llm_http.model = file.get_string("llm.model");
    cfg.llm_http.api_key_env = file.get_string("llm.api_key_env", "TAGKIT_API_KEY");
    cfg.llm_http.timeout_s = file.get_double("llm.timeout_s", 30.0);
    if (cfg.llm_kind == LlmKind::http && cfg.llm_http.base_url.empty()) {
        throw ConfigError("config key llm.base_url: required when llm.kind is http");
    }

    const std::string enc_kind = file.get_string("encoder.kind", "hashing");
    if (enc_kind == "hashing") {
        cfg.encoder_kind = EncoderKind::hashing;
    } else if (enc_kind == "http") {
        cfg.encoder_kind = EncoderKind::http;
    } else {
        throw ConfigError("config key encoder.kind: expected hashing or http");
    }
    cfg.encoder_dim =
        static_cast<size_t>(require_range(file, "encoder.dimension", 256, 16, 1 << 16));
    cfg.encoder_http.base_url = file.get_string("encoder.base_url");
    cfg.encoder_http.model = file.get_string("encoder.model");
    cfg.encoder_http.api_key_env = file.get_string("encoder.api_key_env", "TAGKIT_EMBED_API_KEY");
    cfg.encoder_http.timeout_s = file.get_double("llm.timeout_s", 30.0);
    if (cfg.encoder_kind == EncoderKind::http && cfg.encoder_http.base_url.empty()) {
        throw ConfigError("config key encoder.base_url: required when encoder.kind is http");
    }
    cfg.cache_path = file.get_string("encoder.cache");

    cfg.builder.min_freq = require_range(file, "builder.min_freq", 2, 1, INT64_MAX);
    cfg.builder.max_freq = require_range(file, "builder.max_freq", 0, -1, INT64_MAX);
    cfg.builder.fusion_threshold = require_fraction(file, "builder.fusion_threshold", 0.8);

    cfg.tagger.accept_threshold = require_fraction(file, "tagger.accept_threshold", 0.8);
    cfg.tagger.candidate_k =
        static_cast<size_t>(require_range(file, "tagger.candidate_k", 50, 1, 1 << 20));
    cfg.tagger.candidate_floor = require_fraction(file, "tagger.candidate_floor", 0.3);
    cfg.tagger.max_tags_per_item =
        static_cast<size_t>(require_range(file, "tagger.max_tags_per_item", 10, 1, 1 << 20));

    ParseRules rules;
    rules.min_tag_chars =
        static_cast<size_t>(require_range(file, "parse.min_tag_chars", 2, 1, 1 << 10));
    rules.max_tag_chars =
        static_cast<size_t>(require_range(file, "parse.max_tag_chars", 64, 1, 1 << 10));
    rules.lowercase_fold = file.get_bool("parse.lowercase_fold", false);
    rules.validate();
    cfg.builder.parse_rules = rules;
    cfg.tagger.parse_rules = rules;

    cfg.metrics_threshold = require_fraction(file, "metrics.threshold", 0.8);

    cfg.output_dir = file.get_string("run.output_dir", "out");
    cfg.deterministic = file.get_bool("run.deterministic", false);
    cfg.parallelism = static_cast<int>(require_range(file, "run.parallelism", 1, 1, 256));
    cfg.builder.parallelism = cfg.parallelism;

    cfg.tagger.validate();
    return cfg;
}

}  // namespace tagkit
