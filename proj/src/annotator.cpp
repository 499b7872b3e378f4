#include "sandbox/annotator.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "sandbox/utf8.hpp"

namespace sandbox::tool {

namespace {

using nlohmann::json;
using schema::ClinicalNote;
using schema::TextAnnotation;

constexpr double kRegexConfidence = 95.5;
constexpr double kLexiconConfidence = 90.0;
constexpr double kContextYearConfidence = 85.0;

// A rule hit in byte coordinates; converted to code points after selection.
struct Candidate {
    std::size_t byte_start = 0;
    std::size_t byte_len = 0;
    double confidence = 0.0;
    int priority = 0;
    std::map<std::string, std::string> attributes;
};

void collect_regex(const std::string& text, const std::regex& re, int group, double confidence,
                   int priority, const std::map<std::string, std::string>& attributes,
                   std::vector<Candidate>& out) {
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        if ((*it).length(group) <= 0) {
            continue;
        }
        Candidate c;
        c.byte_start = static_cast<std::size_t>((*it).position(group));
        c.byte_len = static_cast<std::size_t>((*it).length(group));
        c.confidence = confidence;
        c.priority = priority;
        c.attributes = attributes;
        out.push_back(std::move(c));
    }
}

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

void collect_phrase(const std::string& text, const std::string& phrase, double confidence,
                    int priority, std::vector<Candidate>& out) {
    std::size_t pos = 0;
    while ((pos = text.find(phrase, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(text[pos - 1]));
        std::size_t end = pos + phrase.size();
        bool right_ok =
            end == text.size() || !is_word_byte(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) {
            out.push_back({pos, phrase.size(), confidence, priority, {}});
        }
        pos += 1;
    }
}

// Leftmost-longest selection: earlier start wins, longer span breaks start
// ties, rule priority breaks exact-span ties. Overlapping later candidates
// are dropped.
std::vector<Candidate> select_non_overlapping(std::vector<Candidate> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.byte_start != b.byte_start) return a.byte_start < b.byte_start;
        if (a.byte_len != b.byte_len) return a.byte_len > b.byte_len;
        return a.priority < b.priority;
    });
    std::vector<Candidate> kept;
    std::size_t next_free = 0;
    for (auto& c : candidates) {
        if (kept.empty() || c.byte_start >= next_free) {
            next_free = c.byte_start + c.byte_len;
            kept.push_back(std::move(c));
        }
    }
    return kept;
}

std::vector<TextAnnotation> to_annotations(const ClinicalNote& note,
                                           const std::string& category,
                                           std::vector<Candidate> candidates) {
    auto selected = select_non_overlapping(std::move(candidates));
    auto index = utf8::index(note.text);
    std::vector<TextAnnotation> annotations;
    annotations.reserve(selected.size());
    for (const auto& c : selected) {
        TextAnnotation ann;
        ann.note_id = note.identifier;
        ann.start = static_cast<std::uint32_t>(index.cp_of_byte(c.byte_start));
        ann.length =
            static_cast<std::uint32_t>(index.cp_of_byte(c.byte_start + c.byte_len)) - ann.start;
        ann.text = note.text.substr(c.byte_start, c.byte_len);
        ann.category = category;
        ann.confidence = c.confidence;
        ann.attributes = c.attributes;
        annotations.push_back(std::move(ann));
    }
    return annotations;
}

const std::regex& re(const char* pattern) {
    static std::map<std::string, std::regex> cache;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto [it, inserted] = cache.try_emplace(pattern);
    if (inserted) {
        it->second = std::regex(pattern);
    }
    return it->second;
}

std::vector<Candidate> date_candidates(const std::string& text) {
    std::vector<Candidate> out;
    collect_regex(text, re(R"(\b\d{2}/\d{2}/\d{4}\b)"), 0, kRegexConfidence, 0,
                  {{"dateFormat", "MM/DD/YYYY"}}, out);
    collect_regex(text, re(R"(\b\d{1,2}/\d{1,2}/\d{2,4}\b)"), 0, kRegexConfidence, 1,
                  {{"dateFormat", "M/D/YY"}}, out);
    collect_regex(text, re(R"(\b\d{4}-\d{2}-\d{2}\b)"), 0, kRegexConfidence, 2,
                  {{"dateFormat", "YYYY-MM-DD"}}, out);
    collect_regex(text, re(R"(\b\d{1,2}-\d{1,2}-\d{4}\b)"), 0, kRegexConfidence, 3,
                  {{"dateFormat", "MM-DD-YYYY"}}, out);
    collect_regex(
        text,
        re(R"(\b(?:January|February|March|April|May|June|July|August|September|October|November|December) \d{1,2}, \d{4}\b)"),
        0, kRegexConfidence, 4, {{"dateFormat", "MONTH D, YYYY"}}, out);
    collect_regex(
        text,
        re(R"(\b\d{1,2} (?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) \d{4}\b)"), 0,
        kRegexConfidence, 5, {{"dateFormat", "D MON YYYY"}}, out);
    collect_regex(
        text,
        re(R"(\b(?:[Ss]ince|[Ii]n|[Ff]rom|[Uu]ntil|[Bb]y|[Dd]uring) ((?:19|20)\d{2})\b)"), 1,
        kContextYearConfidence, 6, {{"dateFormat", "YYYY"}}, out);
    return out;
}

std::vector<Candidate> person_candidates(const std::string& text, const Lexicons& lexicons) {
    std::vector<Candidate> out;
    collect_regex(text, re(R"((?:Mr|Mrs|Ms|Dr)\. ([A-Z][A-Za-z]*(?: [A-Z][A-Za-z]*)*))"), 1,
                  kRegexConfidence, 0, {}, out);

    std::set<std::string> names(lexicons.given_names.begin(), lexicons.given_names.end());
    names.insert(lexicons.family_names.begin(), lexicons.family_names.end());
    const auto& runs = re(R"([A-Z][a-z]+(?: [A-Z][a-z]+)*)");
    auto begin = std::sregex_iterator(text.begin(), text.end(), runs);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        std::string run = (*it).str();
        bool hit = false;
        std::size_t word_start = 0;
        while (word_start <= run.size() && !hit) {
            auto space = run.find(' ', word_start);
            auto word = run.substr(word_start, space == std::string::npos ? std::string::npos
                                                                          : space - word_start);
            hit = names.count(word) > 0;
            if (space == std::string::npos) {
                break;
            }
            word_start = space + 1;
        }
        if (hit) {
            out.push_back({static_cast<std::size_t>((*it).position(0)),
                           static_cast<std::size_t>((*it).length(0)), kLexiconConfidence, 1, {}});
        }
    }
    return out;
}

std::vector<Candidate> id_candidates(const std::string& text) {
    std::vector<Candidate> out;
    collect_regex(text, re(R"(\b[A-Z]{1,3}-?\d{4,}\b)"), 0, kRegexConfidence, 0, {}, out);
    collect_regex(text, re(R"(\b\d{5,}\b)"), 0, kRegexConfidence, 1, {}, out);
    return out;
}

std::vector<Candidate> contact_candidates(const std::string& text) {
    std::vector<Candidate> out;
    collect_regex(text, re(R"(\(\d{3}\) ?\d{3}[-. ]\d{4}\b)"), 0, kRegexConfidence, 0, {}, out);
    collect_regex(text, re(R"(\b\d{3}[-. ]\d{3}[-. ]\d{4}\b)"), 0, kRegexConfidence, 1, {}, out);
    collect_regex(text, re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})"), 0,
                  kRegexConfidence, 2, {}, out);
    return out;
}

std::vector<Candidate> location_candidates(const std::string& text, const Lexicons& lexicons) {
    std::vector<Candidate> out;
    collect_regex(
        text,
        re(R"(\b\d{1,4} (?:[A-Z][a-z]+ )+(?:Street|Avenue|Road|Boulevard|Lane|Drive|Court|Way)\b)"),
        0, kRegexConfidence, 0, {}, out);
    for (const auto& place : lexicons.locations) {
        collect_phrase(text, place, kLexiconConfidence, 1, out);
    }
    return out;
}

std::vector<std::string> read_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open lexicon file: " + path.string());
    }
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        entries.push_back(line);
    }
    return entries;
}

}  // namespace

json metadata_to_json(const ToolMetadata& meta) {
    return json{{"name", meta.name},
                {"version", meta.version},
                {"description", meta.description},
                {"author", meta.author},
                {"apiVersion", meta.api_version}};
}

ToolMetadata metadata_from_json(const json& j) {
    if (!j.is_object()) {
        throw schema::WireError("tool metadata must be an object");
    }
    ToolMetadata meta;
    for (auto [field, target] : std::initializer_list<std::pair<const char*, std::string*>>{
             {"name", &meta.name},
             {"version", &meta.version},
             {"description", &meta.description},
             {"author", &meta.author},
             {"apiVersion", &meta.api_version}}) {
        if (!j.contains(field) || !j[field].is_string()) {
            throw schema::WireError(std::string("tool metadata missing string field: ") + field);
        }
        *target = j[field].get<std::string>();
    }
    return meta;
}

Lexicons load_lexicons(const std::filesystem::path& data_dir) {
    Lexicons lexicons;
    lexicons.given_names = read_lexicon(data_dir / "lexicons" / "given_names.txt");
    lexicons.family_names = read_lexicon(data_dir / "lexicons" / "family_names.txt");
    lexicons.locations = read_lexicon(data_dir / "lexicons" / "locations.txt");
    return lexicons;
}

ReferenceAnnotator::ReferenceAnnotator(Lexicons lexicons) : lexicons_(std::move(lexicons)) {}

std::vector<TextAnnotation> ReferenceAnnotator::annotate(const ClinicalNote& note,
                                                         const schema::TaskType& task) const {
    std::vector<Candidate> candidates;
    if (task.name() == "DATE") {
        candidates = date_candidates(note.text);
    } else if (task.name() == "PERSON_NAME") {
        candidates = person_candidates(note.text, lexicons_);
    } else if (task.name() == "ID") {
        candidates = id_candidates(note.text);
    } else if (task.name() == "CONTACT") {
        candidates = contact_candidates(note.text);
    } else if (task.name() == "LOCATION") {
        candidates = location_candidates(note.text, lexicons_);
    }
    return to_annotations(note, task.name(), std::move(candidates));
}

ToolMetadata ReferenceAnnotator::metadata() const {
    return {"reference-annotator", "1.0.0",
            "Rule-based clinical PHI annotator for dates, names, ids, contacts, and locations",
            "sandbox", "v1"};
}

GoldEchoAnnotator::GoldEchoAnnotator(const schema::DatasetBundle& bundle,
                                     const schema::TaskRegistry& registry)
    : GoldEchoAnnotator(bundle, registry, Options{}) {}

GoldEchoAnnotator::GoldEchoAnnotator(const schema::DatasetBundle& bundle,
                                     const schema::TaskRegistry& registry, Options options)
    : options_(options) {
    for (const auto& [category, annotations] : bundle.gold) {
        auto list = annotations;
        if (options_.perturb) {
            list = corpus::perturb_predictions(list, *options_.perturb, options_.perturb_rate,
                                               options_.perturb_seed, registry);
        }
        for (auto& ann : list) {
            served_[ann.category][ann.note_id].push_back(ann);
        }
    }
}

std::vector<TextAnnotation> GoldEchoAnnotator::annotate(const ClinicalNote& note,
                                                        const schema::TaskType& task) const {
    if (options_.delay_per_note.count() > 0) {
        std::this_thread::sleep_for(options_.delay_per_note);
    }
    auto by_category = served_.find(task.name());
    if (by_category == served_.end()) {
        return {};
    }
    auto by_note = by_category->second.find(note.identifier);
    if (by_note == by_category->second.end()) {
        return {};
    }
    return by_note->second;
}

ToolMetadata GoldEchoAnnotator::metadata() const {
    return {"gold-echo", "1.0.0", "Test annotator that replays bundled gold annotations",
            "sandbox", "v1"};
}

}  // namespace sandbox::tool
