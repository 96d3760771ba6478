#include "tagkit/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "tagkit/errors.hpp"

namespace tagkit {

namespace {

struct Topic {
    const char* label;
    std::array<const char*, 10> words;
};

constexpr std::array<Topic, 16> kTopics{{
    {"travel",
     {"beach", "sunset", "hiking", "island", "roadtrip", "camping", "backpack", "passport",
      "resort", "cruise"}},
    {"cooking",
     {"recipe", "noodles", "dessert", "baking", "grill", "sauce", "breakfast", "seafood", "vegan",
      "spicy"}},
    {"fitness",
     {"workout", "yoga", "running", "stretching", "marathon", "pilates", "dumbbell", "cardio",
      "squats", "posture"}},
    {"fashion",
     {"outfit", "sneakers", "vintage", "streetwear", "denim", "accessories", "makeup", "skincare",
      "hairstyle", "jewelry"}},
    {"gaming",
     {"esports", "speedrun", "console", "strategy", "multiplayer", "arcade", "roleplay", "shooter",
      "puzzle", "simulator"}},
    {"music",
     {"concert", "guitar", "piano", "remix", "acoustic", "vocal", "drums", "festival", "orchestra",
      "melody"}},
    {"pets",
     {"puppy", "kitten", "aquarium", "parrot", "hamster", "grooming", "rescue", "leash",
      "terrarium", "feeding"}},
    {"diy",
     {"woodwork", "plumbing", "painting", "renovation", "toolbox", "upcycle", "crafting",
      "soldering", "gardening", "insulation"}},
    {"finance",
     {"budget", "investing", "savings", "stocks", "dividends", "mortgage", "frugal", "retirement",
      "crypto", "taxes"}},
    {"science",
     {"astronomy", "chemistry", "physics", "biology", "geology", "robotics", "telescope",
      "microbe", "quantum", "fossil"}},
    {"sports",
     {"football", "basketball", "tennis", "cycling", "swimming", "climbing", "skating",
      "volleyball", "badminton", "surfing"}},
    {"movies",
     {"trailer", "director", "actor", "cinema", "animation", "documentary", "thriller", "comedy",
      "soundtrack", "premiere"}},
    {"education",
     {"tutorial", "lecture", "grammar", "vocabulary", "homework", "revision", "flashcards",
      "campus", "scholarship", "thesis"}},
    {"health",
     {"nutrition", "sleep", "hydration", "meditation", "immunity", "vitamins", "therapy",
      "wellness", "detox", "mindful"}},
    {"cars",
     {"engine", "turbo", "sedan", "detailing", "roadster", "mechanic", "horsepower", "garage",
      "restoration", "drift"}},
    {"photography",
     {"portrait", "landscape", "exposure", "aperture", "tripod", "editing", "filter",
      "composition", "lighting", "candid"}},
}};

// mt19937_64 output is fully specified; derived draws below avoid the
// implementation-defined std:: distributions.
class Sampler {
public:
    explicit Sampler(uint64_t seed) : rng_(seed) {}

    uint64_t bounded(uint64_t n) { return rng_() % n; }

    double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 rng_;
};

// Rank r (0-based) drawn with weight 1 / (r+1)^skew.
class ZipfRanks {
public:
    ZipfRanks(size_t n, double skew) {
        cumulative_.reserve(n);
        double total = 0.0;
        for (size_t r = 0; r < n; ++r) {
            total += 1.0 / std::pow(static_cast<double>(r + 1), skew);
            cumulative_.push_back(total);
        }
    }

    size_t draw(Sampler& s) const {
        const double u = s.uniform01() * cumulative_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        return static_cast<size_t>(std::min<ptrdiff_t>(it - cumulative_.begin(),
                                                       static_cast<ptrdiff_t>(cumulative_.size()) - 1));
    }

private:
    std::vector<double> cumulative_;
};

std::string capitalized(std::string word) {
    if (!word.empty() && word[0] >= 'a' && word[0] <= 'z') {
        word[0] = static_cast<char>(word[0] - 'a' + 'A');
    }
    return word;
}

std::string join_words(const std::vector<std::string>& words, const char* sep) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += sep;
        out += words[i];
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (entity_count < 1) throw ConfigError("synth: entity_count must be >= 1");
    if (topic_count < 1 || topic_count > kTopics.size()) {
        throw ConfigError("synth: topic_count must be in 1..16");
    }
    if (!(zipf_skew > 0.0)) throw ConfigError("synth: zipf_skew must be > 0");
}

std::vector<Entity> synth_corpus(const SynthConfig& cfg) {
    cfg.validate();
    Sampler s(cfg.seed);
    const ZipfRanks ranks(10, cfg.zipf_skew);

    std::vector<Entity> out;
    out.reserve(cfg.entity_count);
    for (size_t i = 0; i < cfg.entity_count; ++i) {
        const Topic& topic = kTopics[s.bounded(cfg.topic_count)];
        auto pick = [&] { return std::string(topic.words[ranks.draw(s)]); };

        std::vector<std::string> title_words;
        const size_t title_len = 2 + s.bounded(3);
        for (size_t w = 0; w < title_len; ++w) title_words.push_back(pick());
        // Occasional capitalized variants feed the fusion stage with
        // case-twin surface forms.
        if (s.uniform01() < 0.15) title_words[0] = capitalized(title_words[0]);

        std::vector<std::string> ocr_words;
        const size_t ocr_len = 1 + s.bounded(3);
        for (size_t w = 0; w < ocr_len; ++w) ocr_words.push_back(pick());

        std::vector<std::string> asr_words;
        if (s.uniform01() >= 0.10) {
            const size_t asr_len = 1 + s.bounded(3);
            for (size_t w = 0; w < asr_len; ++w) asr_words.push_back(pick());
        }

        std::set<std::string> hashtag_set;
        const size_t tag_len = 1 + s.bounded(3);
        for (size_t w = 0; w < tag_len; ++w) hashtag_set.insert(pick());

        Entity e;
        char id[16];
        std::snprintf(id, sizeof(id), "e%05zu", i);
        e.id = id;
        e.clues.push_back({"title", join_words(title_words, " ")});
        e.clues.push_back({"category", topic.label});
        e.clues.push_back({"ocr", join_words(ocr_words, " ")});
        e.clues.push_back({"asr", join_words(asr_words, " ")});
        e.ground_truth_tags.assign(hashtag_set.begin(), hashtag_set.end());
        out.push_back(std::move(e));
    }
    return out;
}

SchemaMap synth_schema() {
    SchemaMap m;
    m.field_to_clue = {{"title", "title"}, {"category", "category"}, {"ocr", "ocr"}, {"asr", "asr"}};
    m.id_field = "id";
    m.hashtag_field = "hashtags";
    return m;
}

void write_corpus_jsonl(const std::vector<Entity>& entities, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& e : entities) {
        nlohmann::json line{{"id", e.id}};
        for (const auto& c : e.clues) {
            if (!c.value.empty()) line[c.name] = c.value;
        }
        std::string hashtags;
        for (const auto& t : e.ground_truth_tags) {
            if (!hashtags.empty()) hashtags += ' ';
            hashtags += '#';
            hashtags += t;
        }
        line["hashtags"] = hashtags;
        out << line.dump() << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace tagkit
