#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tagkit/builder.hpp"
#include "tagkit/corpus.hpp"
#include "tagkit/http.hpp"
#include "tagkit/tagger.hpp"

namespace tagkit {

using ConfigValue = std::variant<std::string, int64_t, double, bool, std::vector<std::string>>;

// Minimal TOML-style reader: [section] headers, key = value lines, #
// comments. Values are "strings", integers, floats, true/false, or arrays of
// strings. Entries are keyed "section.key".
class ConfigFile {
public:
    static ConfigFile parse(const std::string& text);      // throws ConfigError
    static ConfigFile load_file(const std::string& path);  // throws IoError/ConfigError

    bool has(const std::string& key) const;
    // Typed getters return the fallback when absent and throw ConfigError on
    // a type mismatch.
    std::string get_string(const std::string& key, const std::string& fallback = {}) const;
    int64_t get_int(const std::string& key, int64_t fallback = 0) const;
    double get_double(const std::string& key, double fallback = 0.0) const;
    bool get_bool(const std::string& key, bool fallback = false) const;
    std::vector<std::string> get_strings(const std::string& key,
                                         std::vector<std::string> fallback = {}) const;

    // Override for "--set key=value". The value uses the file grammar, except
    // that an unquoted remainder that is not an int, float, bool, or array is
    // taken as a bare string.
    void set(const std::string& key, const std::string& raw_value);

    const std::map<std::string, ConfigValue>& entries() const { return entries_; }

private:
    std::map<std::string, ConfigValue> entries_;
};

enum class LlmKind { mock, http };
enum class EncoderKind { hashing, http };

// Everything a pipeline run needs, resolved from a config file plus
// overrides. Range checks happen here; file-existence checks happen in the
// subcommands that use each path.
struct RunConfig {
    std::string corpus_path;
    SchemaMap schema;
    size_t clue_budget = 0;  // scalars per entity; 0 disables truncation

    std::string generative_template;
    std::string selective_template;
    DelimiterConvention delimiter = DelimiterConvention::comma;

    LlmKind llm_kind = LlmKind::mock;
    RemoteBackendConfig llm_http;

    EncoderKind encoder_kind = EncoderKind::hashing;
    size_t encoder_dim = 256;
    RemoteBackendConfig encoder_http;
    std::string cache_path;  // embedding cache; empty disables

    BuilderConfig builder;
    TaggerConfig tagger;
    double metrics_threshold = 0.8;

    std::string output_dir = "out";
    bool deterministic = false;
    int parallelism = 1;
};

RunConfig run_config_from(const ConfigFile& file);  // throws ConfigError

struct ConfigKeyDoc {
    std::string key;
    std::string type;
    std::string fallback;
    std::string description;
};

// One row per recognized key; unknown keys are rejected by run_config_from.
const std::vector<ConfigKeyDoc>& config_key_docs();

}  // namespace tagkit
