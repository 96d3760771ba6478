#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tagkit/builder.hpp"
#include "tagkit/config.hpp"
#include "tagkit/corpus.hpp"
#include "tagkit/embed.hpp"
#include "tagkit/errors.hpp"
#include "tagkit/http.hpp"
#include "tagkit/llm.hpp"
#include "tagkit/metrics.hpp"
#include "tagkit/prompt.hpp"
#include "tagkit/synth.hpp"
#include "tagkit/tagger.hpp"
#include "tagkit/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tagkit;

namespace {

std::string set_option_help() {
    std::string help = "Override a config key (repeatable). Keys:";
    for (const auto& doc : config_key_docs()) {
        help += "\n  " + doc.key + " (" + doc.type + ", default " +
                (doc.fallback.empty() ? "\"\"" : doc.fallback) + "): " + doc.description;
    }
    return help;
}

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets,
                         bool deterministic_flag) {
    ConfigFile file = ConfigFile::load_file(config_path);
    for (const auto& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        file.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    RunConfig cfg = run_config_from(file);
    if (deterministic_flag) cfg.deterministic = true;
    return cfg;
}

void require_file(const std::string& path, const std::string& key) {
    if (path.empty()) {
        throw ConfigError("config validation: " + key + " is not set");
    }
    if (!fs::is_regular_file(path)) {
        throw ConfigError("config validation: " + key + " file '" + path + "' does not exist");
    }
}

struct Backends {
    std::unique_ptr<LlmBackend> llm;
    std::shared_ptr<Encoder> encoder;
};

Backends make_backends(const RunConfig& cfg) {
    Backends b;
    if (cfg.deterministic || cfg.llm_kind == LlmKind::mock) {
        b.llm = std::make_unique<MockLlm>();
    } else {
        b.llm = std::make_unique<HttpChatBackend>(cfg.llm_http);
    }
    if (cfg.deterministic || cfg.encoder_kind == EncoderKind::hashing) {
        b.encoder = std::make_shared<HashingEncoder>(cfg.encoder_dim);
    } else {
        std::shared_ptr<Encoder> remote = std::make_shared<HttpEncoder>(cfg.encoder_http);
        if (!cfg.cache_path.empty()) {
            auto cache = std::make_shared<EmbeddingCache>(cfg.cache_path);
            b.encoder = std::make_shared<CachingEncoder>(std::move(remote), std::move(cache));
        } else {
            b.encoder = std::move(remote);
        }
    }
    return b;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64_hex(buf.str());
}

std::string now_utc_iso8601(bool deterministic) {
    if (deterministic) return "1970-01-01T00:00:00Z";
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char out[32];
    std::strftime(out, sizeof(out), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return out;
}

std::vector<Entity> load_input_corpus(const RunConfig& cfg, const std::string& path,
                                      bool lenient) {
    LoadOptions opts;
    opts.strict = !lenient;
    LoadStats stats;
    auto corpus = load_corpus(path, cfg.schema, opts, &stats);
    for (const auto& w : stats.warnings) std::cerr << "warning: " << w << "\n";
    if (cfg.clue_budget > 0) {
        std::vector<std::string> priority;
        for (const auto& [field, clue] : cfg.schema.field_to_clue) priority.push_back(clue);
        for (auto& e : corpus) e = truncate_clues(e, cfg.clue_budget, priority).entity;
    }
    return corpus;
}

int cmd_validate(const std::string& config_path, const std::vector<std::string>& sets,
                 bool deterministic_flag) {
    const RunConfig cfg = resolve_config(config_path, sets, deterministic_flag);
    require_file(cfg.corpus_path, "corpus.path");
    if (!cfg.generative_template.empty()) {
        require_file(cfg.generative_template, "templates.generative");
        PromptTemplate::load_file(cfg.generative_template, cfg.delimiter);
    }
    if (!cfg.selective_template.empty()) {
        require_file(cfg.selective_template, "templates.selective");
        SelectiveTemplate::load_file(cfg.selective_template, cfg.delimiter);
    }
    const ConfigFile file = ConfigFile::load_file(config_path);
    std::cout << "configuration is valid\n\nrecognized keys:\n";
    for (const auto& doc : config_key_docs()) {
        std::cout << "  " << doc.key << " (" << doc.type << ", default "
                  << (doc.fallback.empty() ? "\"\"" : doc.fallback) << ")"
                  << (file.has(doc.key) ? "  [set]" : "") << "\n      " << doc.description << "\n";
    }
    return 0;
}

int cmd_synth(const std::string& out_path, size_t count, uint64_t seed, size_t topics,
              double zipf) {
    SynthConfig cfg;
    cfg.entity_count = count;
    cfg.seed = seed;
    cfg.topic_count = topics;
    cfg.zipf_skew = zipf;
    const auto corpus = synth_corpus(cfg);
    write_corpus_jsonl(corpus, out_path);
    std::cout << "synthesized " << corpus.size() << " entities -> " << out_path << "\n";
    return 0;
}

int cmd_build(const std::string& config_path, const std::vector<std::string>& sets,
              bool deterministic_flag, bool lenient) {
    const RunConfig cfg = resolve_config(config_path, sets, deterministic_flag);
    require_file(cfg.corpus_path, "corpus.path");
    require_file(cfg.generative_template, "templates.generative");

    const auto corpus = load_input_corpus(cfg, cfg.corpus_path, lenient);
    const auto tpl = PromptTemplate::load_file(cfg.generative_template, cfg.delimiter);
    Backends backends = make_backends(cfg);

    BuildManifest manifest;
    manifest.corpus_hash = file_hash(cfg.corpus_path);
    manifest.created_at = now_utc_iso8601(cfg.deterministic);

    const auto artifacts =
        build_artifacts(corpus, {tpl}, *backends.llm, *backends.encoder, cfg.builder, manifest);
    std::cerr << "stage generate: " << artifacts.raw.total_tags() << " candidate tags from "
              << artifacts.raw.entity_count << " entities ("
              << artifacts.raw.failed_completions << " failed completions)\n";
    std::cerr << "stage truncate: kept " << artifacts.truncated.total_tags() << " tags in ["
              << cfg.builder.min_freq << ", " << effective_max_freq(cfg.builder, corpus.size())
              << "]\n";
    std::cerr << "stage fuse: " << artifacts.system.records.size() << " records at threshold "
              << cfg.builder.fusion_threshold << "\n";

    fs::create_directories(cfg.output_dir);
    const std::string ts_path = cfg.output_dir + "/tag_system.json";
    save_counts(artifacts.raw, cfg.output_dir + "/counts_raw.json");
    save_counts(artifacts.truncated, cfg.output_dir + "/counts_truncated.json");
    save_tag_system(artifacts.system, ts_path);
    {
        const json m{{"corpus_hash", artifacts.system.manifest.corpus_hash},
                     {"template_ids", artifacts.system.manifest.template_ids},
                     {"llm_backend", artifacts.system.manifest.llm_backend},
                     {"encoder_name", artifacts.system.manifest.encoder_name},
                     {"created_at", artifacts.system.manifest.created_at}};
        std::ofstream out(cfg.output_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + cfg.output_dir + "/manifest.json");
        out << m.dump(2) << "\n";
    }
    std::cout << "built " << artifacts.system.records.size() << " tags -> " << ts_path << "\n";
    return 0;
}

json assigned_to_json(const AssignedTag& a) {
    json j{{"tag", a.tag}, {"score", a.score}};
    if (a.source == TagSource::selective) j["rank"] = a.rank;
    if (!a.matched_candidate.empty()) j["matched_candidate"] = a.matched_candidate;
    return j;
}

int cmd_tag(const std::string& config_path, const std::vector<std::string>& sets,
            bool deterministic_flag, bool lenient, const std::string& mode_name,
            std::string input_path, std::string ts_path, std::string out_path) {
    const RunConfig cfg = resolve_config(config_path, sets, deterministic_flag);
    const TagSource mode =
        mode_name == "selective" ? TagSource::selective : TagSource::generative;
    if (input_path.empty()) input_path = cfg.corpus_path;
    if (ts_path.empty()) ts_path = cfg.output_dir + "/tag_system.json";
    if (out_path.empty()) out_path = cfg.output_dir + "/assignments_" + mode_name + ".jsonl";
    require_file(input_path, "corpus.path");
    if (mode == TagSource::generative) {
        require_file(cfg.generative_template, "templates.generative");
    } else {
        require_file(cfg.selective_template, "templates.selective");
    }

    Backends backends = make_backends(cfg);
    std::string warning;
    const TagSystem ts = load_tag_system(ts_path, backends.encoder->name(), &warning);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

    const auto corpus = load_input_corpus(cfg, input_path, lenient);
    std::optional<PromptTemplate> gen_tpl;
    std::optional<SelectiveTemplate> sel_tpl;
    if (mode == TagSource::generative) {
        gen_tpl = PromptTemplate::load_file(cfg.generative_template, cfg.delimiter);
    } else {
        sel_tpl = SelectiveTemplate::load_file(cfg.selective_template, cfg.delimiter);
    }

    const auto outcomes =
        tag_batch(corpus, ts, mode, *backends.llm, *backends.encoder,
                  gen_tpl ? &*gen_tpl : nullptr, sel_tpl ? &*sel_tpl : nullptr, cfg.tagger,
                  cfg.parallelism);

    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path);
    size_t failures = 0;
    size_t assigned = 0;
    for (const auto& e : corpus) {
        const TagOutcome& o = outcomes.at(e.id);
        json line{{"id", e.id}, {"mode", mode_name}, {"tags", json::array()}};
        if (o.ok()) {
            for (const auto& a : o.result->tags) line["tags"].push_back(assigned_to_json(a));
            line["diagnostics"] = o.result->diagnostics;
            assigned += o.result->tags.size();
        } else {
            line["diagnostics"] = json::array();
            line["error"] = o.error;
            ++failures;
        }
        out << line.dump() << "\n";
    }
    if (!out) throw IoError("write failed for " + out_path);
    std::cout << "tagged " << corpus.size() << " entities (" << assigned << " assignments, "
              << failures << " failures) -> " << out_path << "\n";
    return 0;
}

ItemTags assignments_from_file(const std::string& path, const TagSystem& ts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    ItemTags items;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
            !j.contains("tags") || !j["tags"].is_array()) {
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": not an assignments record");
        }
        std::vector<std::string> tags;
        for (const auto& t : j["tags"]) {
            if (!t.is_object() || !t.contains("tag") || !t["tag"].is_string()) {
                throw DataError(path + " line " + std::to_string(line_no) +
                                ": malformed tag entry");
            }
            const std::string tag = t["tag"];
            if (ts.find(tag) == nullptr) {
                throw DataError(path + " line " + std::to_string(line_no) + ": tag '" + tag +
                                "' is not in the tag system");
            }
            tags.push_back(tag);
        }
        if (!items.emplace(j["id"].get<std::string>(), std::move(tags)).second) {
            throw DataError(path + " line " + std::to_string(line_no) + ": duplicate id");
        }
    }
    return items;
}

// Ground truth evaluated as if it were a tag system: distinct tags with
// per-entity frequencies, no stored embeddings.
TagSystem system_from_ground_truth(const std::vector<Entity>& corpus, ItemTags& items,
                                   const std::string& encoder_name) {
    std::map<std::string, std::set<std::string>> entities_per_tag;
    for (const auto& e : corpus) {
        items[e.id] = e.ground_truth_tags;
        for (const auto& t : e.ground_truth_tags) entities_per_tag[t].insert(e.id);
    }
    TagSystem ts;
    ts.encoder_name = encoder_name;
    for (const auto& [tag, ids] : entities_per_tag) {
        TagRecord r;
        r.tag = tag;
        r.frequency = static_cast<int64_t>(ids.size());
        ts.records.push_back(std::move(r));
    }
    std::sort(ts.records.begin(), ts.records.end(), [](const TagRecord& a, const TagRecord& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.tag < b.tag;
    });
    return ts;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& sets,
             bool deterministic_flag, bool lenient, std::string ts_path,
             const std::string& assignments_path, bool use_ground_truth) {
    const RunConfig cfg = resolve_config(config_path, sets, deterministic_flag);
    Backends backends = make_backends(cfg);

    TagSystem ts;
    ItemTags items;
    std::string provenance;
    if (use_ground_truth) {
        require_file(cfg.corpus_path, "corpus.path");
        if (cfg.schema.hashtag_field.empty()) {
            throw ConfigError("config validation: corpus.hashtag_field is required "
                              "for --use-ground-truth");
        }
        const auto corpus = load_input_corpus(cfg, cfg.corpus_path, lenient);
        ts = system_from_ground_truth(corpus, items, backends.encoder->name());
        provenance = "ground-truth:" + cfg.corpus_path;
    } else {
        if (ts_path.empty()) ts_path = cfg.output_dir + "/tag_system.json";
        std::string warning;
        ts = load_tag_system(ts_path, backends.encoder->name(), &warning);
        if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
        items = assignments_from_file(assignments_path, ts);
        provenance = "assignments:" + assignments_path;
    }

    MetricsReport report;
    report.threshold = cfg.metrics_threshold;
    report.provenance = provenance;
    report.tag_count = static_cast<int64_t>(ts.records.size());
    report.popularity = popularity_histogram(ts);
    report.tags_per_item = tags_per_item_histogram(items);
    report.intra_item_redundancy =
        intra_item_redundancy(items, *backends.encoder, cfg.metrics_threshold,
                              &report.diagnostics);
    report.uniformity =
        uniformity(ts, *backends.encoder, cfg.metrics_threshold, &report.diagnostics);

    fs::create_directories(cfg.output_dir);
    const std::string json_path = cfg.output_dir + "/report.json";
    emit_report(report, json_path, ReportFormat::json);
    emit_report(report, cfg.output_dir + "/report.csv", ReportFormat::csv_histograms);
    std::cout << "uniformity " << report.uniformity << ", intra-item redundancy "
              << report.intra_item_redundancy << ", " << report.tag_count << " tags -> "
              << json_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot tag system toolkit: build a tag system from a JSONL corpus with an "
                 "LLM, assign tags to new items, and score tag-system quality."};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    bool deterministic = false;
    bool lenient = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("-c,--config", config_path, "Run configuration file");
        if (needs_config) opt->required();
        sub->add_option("--set", sets, set_option_help());
        sub->add_flag("--deterministic", deterministic,
                      "Mock backends, fixed clock, byte-stable artifacts");
        sub->add_flag("--lenient", lenient, "Skip malformed corpus lines instead of aborting");
    };

    auto* validate = app.add_subcommand("validate", "Check a configuration and list its keys");
    add_common(validate, true);

    auto* build = app.add_subcommand("build", "Build a tag system from the configured corpus");
    add_common(build, true);

    auto* tag = app.add_subcommand("tag", "Assign tags to entities using a built tag system");
    add_common(tag, true);
    std::string mode = "generative";
    std::string input_path;
    std::string ts_path;
    std::string out_path;
    tag->add_option("--mode", mode, "Tagging paradigm")
        ->check(CLI::IsMember({"generative", "selective"}));
    tag->add_option("--input", input_path, "JSONL corpus to tag (default: corpus.path)");
    tag->add_option("--tag-system", ts_path,
                    "Tag system file (default: <output_dir>/tag_system.json)");
    tag->add_option("--out", out_path,
                    "Assignments file (default: <output_dir>/assignments_<mode>.jsonl)");

    auto* eval = app.add_subcommand("eval", "Compute quality metrics for a tag system");
    add_common(eval, true);
    std::string eval_ts_path;
    std::string assignments_path;
    bool use_ground_truth = false;
    eval->add_option("--tag-system", eval_ts_path,
                     "Tag system file (default: <output_dir>/tag_system.json)");
    auto* a_opt = eval->add_option("--assignments", assignments_path,
                                   "Assignments JSONL produced by the tag subcommand");
    auto* g_opt = eval->add_flag("--use-ground-truth", use_ground_truth,
                                 "Evaluate the corpus hashtag baseline instead of assignments");
    a_opt->excludes(g_opt);

    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
    std::string synth_out;
    size_t synth_count = 500;
    uint64_t synth_seed = 42;
    size_t synth_topics = 12;
    double synth_zipf = 1.1;
    synth->add_option("--out", synth_out, "Output JSONL path")->required();
    synth->add_option("--count", synth_count, "Number of entities");
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_option("--topics", synth_topics, "Topic count (1..16)");
    synth->add_option("--zipf", synth_zipf, "Zipf skew of word draws");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(config_path, sets, deterministic);
        if (build->parsed()) return cmd_build(config_path, sets, deterministic, lenient);
        if (tag->parsed()) {
            return cmd_tag(config_path, sets, deterministic, lenient, mode, input_path, ts_path,
                           out_path);
        }
        if (eval->parsed()) {
            if (!use_ground_truth && assignments_path.empty()) {
                throw ConfigError("eval needs --assignments or --use-ground-truth");
            }
            return cmd_eval(config_path, sets, deterministic, lenient, eval_ts_path,
                            assignments_path, use_ground_truth);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_out, synth_count, synth_seed, synth_topics, synth_zipf);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TemplateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
