#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sandbox::schema {

struct ClinicalNote {
    std::string identifier;
    std::string patient_id;
    std::string text;        // UTF-8; all offsets into it are code points
    std::string type;        // note-type code, e.g. "loinc:LP29684-5"

    bool operator==(const ClinicalNote&) const = default;
};

// A typed text span. `category` is a canonical task name ("DATE", ...);
// it travels out of band on the wire (gold file key, annotation store,
// endpoint), never inside the JSON object.
struct TextAnnotation {
    std::string note_id;
    std::uint32_t start = 0;   // code points
    std::uint32_t length = 0;  // code points
    std::string text;
    std::string category;
    std::optional<double> confidence;            // [0,100] when present
    std::map<std::string, std::string> attributes;  // e.g. dateFormat

    bool operator==(const TextAnnotation&) const = default;
};

struct Dataset {
    std::string id;
    std::vector<std::string> fhir_store_ids;
    std::vector<std::string> annotation_store_ids;

    bool operator==(const Dataset&) const = default;
};

struct AnnotationStoreRef {
    std::string dataset_id;
    std::string annotation_store_id;

    bool operator==(const AnnotationStoreRef&) const = default;
};

struct NoteStoreRef {
    std::string dataset_id;
    std::string fhir_store_id;

    bool operator==(const NoteStoreRef&) const = default;
};

struct BundleManifest {
    std::string id;
    std::uint64_t note_count = 0;
    std::vector<std::string> categories;  // canonical task names

    bool operator==(const BundleManifest&) const = default;
};

struct DatasetBundle {
    BundleManifest manifest;
    std::vector<ClinicalNote> notes;
    // category name -> gold annotations, in file order
    std::map<std::string, std::vector<TextAnnotation>> gold;

    bool operator==(const DatasetBundle&) const = default;
};

// Raised when a JSON document does not match the wire format. `where`
// carries file/position context when available.
class WireError : public std::runtime_error {
  public:
    explicit WireError(const std::string& what) : std::runtime_error(what) {}
};

// --- JSON codec -----------------------------------------------------------
// Canonical form everywhere: UTF-8, object keys sorted, no insignificant
// whitespace (nlohmann's default object ordering + dump()).

std::string canonical_dump(const nlohmann::json& j);

nlohmann::json note_to_json(const ClinicalNote& note);
ClinicalNote note_from_json(const nlohmann::json& j);

// Annotation wire objects carry noteId/start/length/text, optional
// confidence, and attributes flattened as extra string fields; the category
// comes from context.
nlohmann::json annotation_to_json(const TextAnnotation& ann);
nlohmann::json annotation_to_json_without_note_id(const TextAnnotation& ann);
TextAnnotation annotation_from_json(const nlohmann::json& j, const std::string& category);
// For tool responses: noteId may be absent; it is filled from `note_id`.
TextAnnotation annotation_from_response_json(const nlohmann::json& j, const std::string& category,
                                             const std::string& note_id);

nlohmann::json dataset_to_json(const Dataset& d);

}  // namespace sandbox::schema
