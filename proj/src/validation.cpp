#include "sandbox/validation.hpp"

#include <cctype>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "sandbox/utf8.hpp"

namespace sandbox::schema {

namespace {

bool has_whitespace(const std::string& s) {
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) return true;
    }
    return false;
}

}  // namespace

std::string ValidationResult::joined() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < violations_.size(); ++i) {
        if (i) out << "; ";
        out << violations_[i];
    }
    return out.str();
}

ValidationResult validate_note(const ClinicalNote& note) {
    ValidationResult result;
    if (note.identifier.empty()) result.add("identifier must be non-empty");
    if (has_whitespace(note.identifier)) result.add("identifier must not contain whitespace");
    if (note.patient_id.empty()) result.add("patientId must be non-empty");
    if (has_whitespace(note.patient_id)) result.add("patientId must not contain whitespace");
    if (note.text.empty()) result.add("text must be non-empty");
    return result;
}

ValidationResult validate_annotation_shape(const TextAnnotation& ann) {
    ValidationResult result;
    if (ann.length < 1) result.add("length must be >= 1");
    if (ann.confidence && (*ann.confidence < 0.0 || *ann.confidence > 100.0)) {
        result.add("confidence out of range [0,100]: " + std::to_string(*ann.confidence));
    }
    return result;
}

ValidationResult validate_annotation(const TextAnnotation& ann, const ClinicalNote& note) {
    ValidationResult result;
    if (ann.note_id != note.identifier) {
        result.add("wrong note: annotation references '" + ann.note_id + "', got note '" +
                   note.identifier + "'");
    }
    result.merge(validate_annotation_shape(ann));
    const std::size_t note_len = utf8::length(note.text);
    const std::uint64_t end = static_cast<std::uint64_t>(ann.start) + ann.length;
    if (end > note_len) {
        result.add("span out of bounds: start+length " + std::to_string(end) +
                   " exceeds note length " + std::to_string(note_len));
    } else if (ann.length >= 1) {
        const std::string actual = utf8::substr(note.text, ann.start, ann.length);
        if (actual != ann.text) {
            result.add("text mismatch: annotation text '" + ann.text + "' != note substring '" +
                       actual + "'");
        }
    }
    return result;
}

ValidationResult validate_bundle(const DatasetBundle& bundle, const TaskRegistry& registry) {
    ValidationResult result;

    if (bundle.manifest.note_count != bundle.notes.size()) {
        result.add("manifest noteCount " + std::to_string(bundle.manifest.note_count) +
                   " != number of notes " + std::to_string(bundle.notes.size()));
    }

    std::set<std::string> manifest_categories(bundle.manifest.categories.begin(),
                                              bundle.manifest.categories.end());
    for (const auto& cat : bundle.manifest.categories) {
        if (!registry.contains(cat)) result.add("unknown category in manifest: " + cat);
    }
    for (const auto& [cat, anns] : bundle.gold) {
        (void)anns;
        if (!manifest_categories.count(cat)) {
            result.add("gold category not listed in manifest: " + cat);
        }
    }

    std::unordered_map<std::string, const ClinicalNote*> notes_by_id;
    for (const auto& note : bundle.notes) {
        auto nv = validate_note(note);
        if (!nv.ok()) result.add("note '" + note.identifier + "': " + nv.joined());
        if (!notes_by_id.emplace(note.identifier, &note).second) {
            result.add("duplicate note identifier: " + note.identifier);
        }
    }

    for (const auto& [cat, anns] : bundle.gold) {
        std::set<std::tuple<std::string, std::uint32_t, std::uint32_t>> seen;
        for (const auto& ann : anns) {
            auto it = notes_by_id.find(ann.note_id);
            if (it == notes_by_id.end()) {
                result.add(cat + ": dangling noteId '" + ann.note_id + "'");
                auto sv = validate_annotation_shape(ann);
                if (!sv.ok()) result.add(cat + " in note '" + ann.note_id + "': " + sv.joined());
            } else {
                auto av = validate_annotation(ann, *it->second);
                if (!av.ok()) result.add(cat + " in note '" + ann.note_id + "': " + av.joined());
            }
            if (!seen.insert({ann.note_id, ann.start, ann.length}).second) {
                result.add(cat + ": duplicate gold annotation (" + ann.note_id + ", " +
                           std::to_string(ann.start) + ", " + std::to_string(ann.length) + ")");
            }
        }
    }
    return result;
}

}  // namespace sandbox::schema
