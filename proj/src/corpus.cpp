#include "sandbox/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sandbox/metrics.hpp"
#include "sandbox/rng.hpp"
#include "sandbox/utf8.hpp"

namespace sandbox::corpus {

namespace {

using nlohmann::json;

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open pool file: " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        lines.push_back(line);
    }
    if (lines.empty()) {
        throw ConfigError("pool file has no entries: " + path.string());
    }
    return lines;
}

// A template holds exactly one "{CATEGORY}" placeholder.
struct TemplateParts {
    std::string category;
    std::string prefix;
    std::string suffix;
};

TemplateParts split_template(const std::string& tmpl) {
    auto open = tmpl.find('{');
    auto close = tmpl.find('}');
    if (open == std::string::npos || close == std::string::npos || close < open ||
        tmpl.find('{', open + 1) != std::string::npos) {
        throw ConfigError("template must contain exactly one {CATEGORY} placeholder: " + tmpl);
    }
    return {tmpl.substr(open + 1, close - open - 1), tmpl.substr(0, open),
            tmpl.substr(close + 1)};
}

std::string two_digits(std::uint64_t v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02llu", static_cast<unsigned long long>(v));
    return buf;
}

const char* kMonthNames[] = {"January", "February", "March",     "April",   "May",      "June",
                             "July",    "August",   "September", "October", "November", "December"};
const char* kMonthAbbrev[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string make_date(rng::SplitMix64& rng) {
    std::uint64_t year = 1970 + rng.bounded(60);
    std::uint64_t month = 1 + rng.bounded(12);
    std::uint64_t day = 1 + rng.bounded(28);
    switch (rng.bounded(6)) {
        case 0:
            return two_digits(month) + "/" + two_digits(day) + "/" + std::to_string(year);
        case 1:
            return std::to_string(month) + "/" + std::to_string(day) + "/" +
                   two_digits(year % 100);
        case 2:
            return std::to_string(year) + "-" + two_digits(month) + "-" + two_digits(day);
        case 3:
            return two_digits(month) + "-" + two_digits(day) + "-" + std::to_string(year);
        case 4:
            return std::string(kMonthNames[month - 1]) + " " + std::to_string(day) + ", " +
                   std::to_string(year);
        default:
            return std::to_string(day) + " " + kMonthAbbrev[month - 1] + " " +
                   std::to_string(year);
    }
}

std::string make_person(rng::SplitMix64& rng, const SurrogatePools& pools) {
    return rng.pick(pools.given_names) + " " + rng.pick(pools.family_names);
}

std::string make_id(rng::SplitMix64& rng) {
    if (rng.bounded(2) == 0) {
        std::string digits;
        std::uint64_t len = 5 + rng.bounded(4);
        for (std::uint64_t i = 0; i < len; ++i) {
            digits += static_cast<char>('0' + rng.bounded(10));
        }
        return digits;
    }
    std::string code;
    std::uint64_t letters = 1 + rng.bounded(3);
    for (std::uint64_t i = 0; i < letters; ++i) {
        code += static_cast<char>('A' + rng.bounded(26));
    }
    if (rng.bounded(2) == 0) {
        code += '-';
    }
    std::uint64_t digits = 4 + rng.bounded(4);
    for (std::uint64_t i = 0; i < digits; ++i) {
        code += static_cast<char>('0' + rng.bounded(10));
    }
    return code;
}

std::string three_digits(rng::SplitMix64& rng) {
    return std::to_string(2 + rng.bounded(8)) + std::to_string(rng.bounded(10)) +
           std::to_string(rng.bounded(10));
}

std::string four_digits(rng::SplitMix64& rng) {
    std::string s;
    for (int i = 0; i < 4; ++i) {
        s += static_cast<char>('0' + rng.bounded(10));
    }
    return s;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string make_contact(rng::SplitMix64& rng, const SurrogatePools& pools) {
    switch (rng.bounded(4)) {
        case 0:
            return three_digits(rng) + "-" + three_digits(rng) + "-" + four_digits(rng);
        case 1:
            return three_digits(rng) + "." + three_digits(rng) + "." + four_digits(rng);
        case 2:
            return "(" + three_digits(rng) + ") " + three_digits(rng) + "-" + four_digits(rng);
        default:
            return lower(rng.pick(pools.given_names)) + "." + lower(rng.pick(pools.family_names)) +
                   "@" + rng.pick(pools.email_domains);
    }
}

const char* kStreetTypes[] = {"Street", "Avenue", "Road", "Boulevard",
                              "Lane",   "Drive",  "Court", "Way"};

std::string make_location(rng::SplitMix64& rng, const SurrogatePools& pools) {
    if (rng.bounded(3) == 0) {
        return std::to_string(1 + rng.bounded(999)) + " " + rng.pick(pools.street_names) + " " +
               kStreetTypes[rng.bounded(8)];
    }
    return rng.pick(pools.locations);
}

std::string make_surrogate(const std::string& category, rng::SplitMix64& rng,
                           const SurrogatePools& pools) {
    if (category == "DATE") return make_date(rng);
    if (category == "PERSON_NAME") return make_person(rng, pools);
    if (category == "ID") return make_id(rng);
    if (category == "CONTACT") return make_contact(rng, pools);
    if (category == "LOCATION") return make_location(rng, pools);
    throw ConfigError("no surrogate generator for category: " + category);
}

}  // namespace

SurrogatePools load_pools(const std::filesystem::path& data_dir) {
    SurrogatePools pools;
    pools.given_names = read_lines(data_dir / "lexicons" / "given_names.txt");
    pools.family_names = read_lines(data_dir / "lexicons" / "family_names.txt");
    pools.locations = read_lines(data_dir / "lexicons" / "locations.txt");
    pools.street_names = read_lines(data_dir / "corpus" / "street_names.txt");
    pools.email_domains = read_lines(data_dir / "corpus" / "domains.txt");
    pools.fillers = read_lines(data_dir / "corpus" / "fillers.txt");
    for (const auto& line : read_lines(data_dir / "corpus" / "templates.txt")) {
        auto parts = split_template(line);
        pools.templates[parts.category].push_back(line);
    }
    return pools;
}

CorpusConfig config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config root must be an object");
    }
    CorpusConfig config;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            throw ConfigError("seed must be a non-negative integer");
        }
        config.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("noteCount")) {
        if (!j["noteCount"].is_number_unsigned() || j["noteCount"].get<std::uint64_t>() == 0) {
            throw ConfigError("noteCount must be a positive integer");
        }
        config.note_count = j["noteCount"].get<std::uint64_t>();
    }
    if (j.contains("id")) {
        if (!j["id"].is_string()) {
            throw ConfigError("id must be a string");
        }
        config.id = j["id"].get<std::string>();
    }
    if (j.contains("noteTypes")) {
        if (!j["noteTypes"].is_array() || j["noteTypes"].empty()) {
            throw ConfigError("noteTypes must be a non-empty array of strings");
        }
        config.note_types.clear();
        for (const auto& t : j["noteTypes"]) {
            if (!t.is_string()) {
                throw ConfigError("noteTypes must be a non-empty array of strings");
            }
            config.note_types.push_back(t.get<std::string>());
        }
    }
    if (j.contains("categoryDensity")) {
        if (!j["categoryDensity"].is_object()) {
            throw ConfigError("categoryDensity must be an object");
        }
        for (const auto& [key, value] : j["categoryDensity"].items()) {
            if (!value.is_number() || value.get<double>() < 0.0) {
                throw ConfigError("density for " + key + " must be a number >= 0");
            }
            config.category_density[key] = value.get<double>();
        }
    }
    return config;
}

schema::DatasetBundle generate_corpus(const CorpusConfig& config, const SurrogatePools& pools,
                                      const schema::TaskRegistry& registry) {
    if (config.note_count == 0) {
        throw ConfigError("noteCount must be a positive integer");
    }
    if (config.note_types.empty()) {
        throw ConfigError("noteTypes must be a non-empty array of strings");
    }

    // Categories come from the density map, kept in registry order; an empty
    // map means every registered task at density 1.0.
    std::map<std::string, double> density = config.category_density;
    if (density.empty()) {
        for (const auto& task : registry.all()) {
            density[task.name()] = 1.0;
        }
    }
    std::vector<std::string> categories;
    for (const auto& task : registry.all()) {
        if (density.count(task.name())) {
            categories.push_back(task.name());
        }
    }
    if (categories.size() != density.size()) {
        for (const auto& [name, d] : density) {
            if (!registry.find(name)) {
                throw ConfigError("categoryDensity names unknown category: " + name);
            }
        }
    }
    for (const auto& category : categories) {
        if (density[category] > 0.0 &&
            (!pools.templates.count(category) || pools.templates.at(category).empty())) {
            throw ConfigError("no templates available for category: " + category);
        }
    }

    schema::DatasetBundle bundle;
    bundle.manifest.id = config.id.empty() ? "synthetic-" + std::to_string(config.seed) : config.id;
    bundle.manifest.categories = categories;
    bundle.manifest.note_count = config.note_count;
    for (const auto& category : categories) {
        bundle.gold[category] = {};
    }

    rng::SplitMix64 rng(config.seed);
    for (std::uint64_t i = 1; i <= config.note_count; ++i) {
        // Ids carry the bundle id so notes from different bundles stay
        // distinct when several sites feed one evaluation.
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), "-note-%06llu", static_cast<unsigned long long>(i));
        const std::string ident = bundle.manifest.id + suffix;
        std::snprintf(suffix, sizeof(suffix), "-patient-%06llu",
                      static_cast<unsigned long long>((i + 1) / 2));
        const std::string patient = bundle.manifest.id + suffix;

        // Planned annotation sentences for this note, one per drawn surrogate.
        std::vector<std::string> plan;
        for (const auto& category : categories) {
            double d = density.at(category);
            auto k = static_cast<std::uint64_t>(std::floor(d));
            if (rng.u01() < d - std::floor(d)) {
                ++k;
            }
            for (std::uint64_t n = 0; n < k; ++n) {
                plan.push_back(category);
            }
        }

        std::string text = rng.pick(pools.fillers);
        std::uint32_t cp_len = static_cast<std::uint32_t>(utf8::length(text));
        for (const auto& category : plan) {
            if (rng.bounded(100) < 35) {
                const auto& filler = rng.pick(pools.fillers);
                text += " " + filler;
                cp_len += 1 + static_cast<std::uint32_t>(utf8::length(filler));
            }
            auto parts = split_template(rng.pick(pools.templates.at(category)));
            std::string value = make_surrogate(category, rng, pools);
            text += " " + parts.prefix + value + parts.suffix;
            std::uint32_t start =
                cp_len + 1 + static_cast<std::uint32_t>(utf8::length(parts.prefix));
            std::uint32_t value_len = static_cast<std::uint32_t>(utf8::length(value));
            cp_len += 1 + static_cast<std::uint32_t>(utf8::length(parts.prefix)) + value_len +
                      static_cast<std::uint32_t>(utf8::length(parts.suffix));

            schema::TextAnnotation ann;
            ann.note_id = ident;
            ann.start = start;
            ann.length = value_len;
            ann.text = value;
            ann.category = category;
            bundle.gold[category].push_back(std::move(ann));
        }

        schema::ClinicalNote note;
        note.identifier = ident;
        note.patient_id = patient;
        note.text = std::move(text);
        note.type = config.note_types[rng.bounded(config.note_types.size())];
        bundle.notes.push_back(std::move(note));
    }
    return bundle;
}

PerturbMode perturb_mode_from_string(const std::string& s) {
    if (s == "drop") return PerturbMode::Drop;
    if (s == "shift") return PerturbMode::Shift;
    if (s == "split") return PerturbMode::Split;
    if (s == "duplicate") return PerturbMode::Duplicate;
    if (s == "retype") return PerturbMode::Retype;
    throw ConfigError("unknown perturbation mode: " + s);
}

std::string to_string(PerturbMode mode) {
    switch (mode) {
        case PerturbMode::Drop: return "drop";
        case PerturbMode::Shift: return "shift";
        case PerturbMode::Split: return "split";
        case PerturbMode::Duplicate: return "duplicate";
        case PerturbMode::Retype: return "retype";
    }
    return "unknown";
}

std::vector<schema::TextAnnotation> perturb_predictions(
    const std::vector<schema::TextAnnotation>& gold, PerturbMode mode, double rate,
    std::uint64_t seed, const schema::TaskRegistry& registry) {
    if (rate < 0.0 || rate > 1.0) {
        throw std::invalid_argument("perturbation rate must be in [0, 1]");
    }
    rng::SplitMix64 rng(seed);
    auto count = static_cast<std::uint64_t>(std::floor(rate * static_cast<double>(gold.size())));

    // Split only applies to multi-token annotations, so draw victims from the
    // eligible subset for that mode.
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (mode != PerturbMode::Split || metrics::tokenize_annotation(gold[i]).size() > 1) {
            eligible.push_back(i);
        }
    }
    if (count > eligible.size()) {
        count = eligible.size();
    }
    auto picks = rng.sample_indices(eligible.size(), count);
    std::set<std::size_t> victims;
    for (auto p : picks) {
        victims.insert(eligible[p]);
    }

    std::vector<schema::TextAnnotation> out;
    out.reserve(gold.size() + (mode == PerturbMode::Duplicate ? count : 0));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto& ann = gold[i];
        if (!victims.count(i)) {
            out.push_back(ann);
            continue;
        }
        switch (mode) {
            case PerturbMode::Drop:
                break;
            case PerturbMode::Shift: {
                auto moved = ann;
                moved.start += 1;
                moved.text.clear();
                out.push_back(std::move(moved));
                break;
            }
            case PerturbMode::Split: {
                auto tokens = metrics::tokenize_annotation(ann);
                auto head = ann;
                head.start = tokens.front().start;
                head.length = tokens.front().length;
                head.text = utf8::substr(ann.text, tokens.front().start - ann.start,
                                         tokens.front().length);
                out.push_back(std::move(head));
                break;
            }
            case PerturbMode::Duplicate:
                out.push_back(ann);
                out.push_back(ann);
                break;
            case PerturbMode::Retype: {
                auto moved = ann;
                const auto& all = registry.all();
                for (std::size_t t = 0; t < all.size(); ++t) {
                    if (all[t].name() == ann.category) {
                        moved.category = all[(t + 1) % all.size()].name();
                        break;
                    }
                }
                out.push_back(std::move(moved));
                break;
            }
        }
    }
    return out;
}

std::vector<CategoryTally> tally_bundle(const schema::DatasetBundle& bundle) {
    std::vector<CategoryTally> tallies;
    for (const auto& category : bundle.manifest.categories) {
        CategoryTally tally;
        tally.category = category;
        auto it = bundle.gold.find(category);
        if (it != bundle.gold.end()) {
            tally.annotations = it->second.size();
            std::set<std::string> notes;
            for (const auto& ann : it->second) {
                notes.insert(ann.note_id);
            }
            tally.notes_with = notes.size();
        }
        tallies.push_back(std::move(tally));
    }
    return tallies;
}

}  // namespace sandbox::corpus
