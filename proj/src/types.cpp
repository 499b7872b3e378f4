#include "sandbox/types.hpp"

#include <nlohmann/json.hpp>

namespace sandbox::schema {

using nlohmann::json;

std::string canonical_dump(const json& j) { return j.dump(); }

json note_to_json(const ClinicalNote& note) {
    return json{{"identifier", note.identifier},
                {"patientId", note.patient_id},
                {"text", note.text},
                {"type", note.type}};
}

namespace {

const json& require(const json& j, const char* key, json::value_t type, const char* type_name) {
    auto it = j.find(key);
    if (it == j.end()) throw WireError(std::string("missing field '") + key + "'");
    if (it->type() != type &&
        !(type == json::value_t::number_unsigned && it->is_number_integer())) {
        throw WireError(std::string("field '") + key + "' must be " + type_name);
    }
    return *it;
}

std::uint32_t require_offset(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw WireError(std::string("missing field '") + key + "'");
    if (!it->is_number_integer() || (it->is_number_integer() && it->get<std::int64_t>() < 0)) {
        throw WireError(std::string("field '") + key + "' must be a non-negative integer");
    }
    const auto v = it->get<std::int64_t>();
    if (v > 0xFFFFFFFFLL) throw WireError(std::string("field '") + key + "' out of range");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

ClinicalNote note_from_json(const json& j) {
    if (!j.is_object()) throw WireError("note must be a JSON object");
    ClinicalNote note;
    note.identifier = require(j, "identifier", json::value_t::string, "a string").get<std::string>();
    note.patient_id = require(j, "patientId", json::value_t::string, "a string").get<std::string>();
    note.text = require(j, "text", json::value_t::string, "a string").get<std::string>();
    note.type = require(j, "type", json::value_t::string, "a string").get<std::string>();
    return note;
}

json annotation_to_json(const TextAnnotation& ann) {
    json j = annotation_to_json_without_note_id(ann);
    j["noteId"] = ann.note_id;
    return j;
}

json annotation_to_json_without_note_id(const TextAnnotation& ann) {
    json j{{"start", ann.start}, {"length", ann.length}, {"text", ann.text}};
    if (ann.confidence) j["confidence"] = *ann.confidence;
    for (const auto& [k, v] : ann.attributes) j[k] = v;
    return j;
}

namespace {

TextAnnotation annotation_from_json_impl(const json& j, const std::string& category,
                                         const std::string* implied_note_id) {
    if (!j.is_object()) throw WireError("annotation must be a JSON object");
    TextAnnotation ann;
    ann.category = category;
    ann.start = require_offset(j, "start");
    ann.length = require_offset(j, "length");
    ann.text = require(j, "text", json::value_t::string, "a string").get<std::string>();

    auto note_it = j.find("noteId");
    if (note_it != j.end()) {
        if (!note_it->is_string()) throw WireError("field 'noteId' must be a string");
        ann.note_id = note_it->get<std::string>();
        if (implied_note_id && ann.note_id != *implied_note_id) {
            throw WireError("annotation noteId '" + ann.note_id + "' does not match request note '" +
                            *implied_note_id + "'");
        }
    } else if (implied_note_id) {
        ann.note_id = *implied_note_id;
    } else {
        throw WireError("missing field 'noteId'");
    }

    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "noteId" || key == "start" || key == "length" || key == "text") continue;
        if (key == "confidence") {
            if (!it->is_number()) throw WireError("field 'confidence' must be a number");
            ann.confidence = it->get<double>();
            continue;
        }
        if (!it->is_string()) {
            throw WireError("attribute '" + key + "' must be a string");
        }
        ann.attributes[key] = it->get<std::string>();
    }
    return ann;
}

}  // namespace

TextAnnotation annotation_from_json(const json& j, const std::string& category) {
    return annotation_from_json_impl(j, category, nullptr);
}

TextAnnotation annotation_from_response_json(const json& j, const std::string& category,
                                             const std::string& note_id) {
    return annotation_from_json_impl(j, category, &note_id);
}

json dataset_to_json(const Dataset& d) {
    return json{{"id", d.id},
                {"fhirStoreIds", d.fhir_store_ids},
                {"annotationStoreIds", d.annotation_store_ids}};
}

}  // namespace sandbox::schema
