#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::node {

class StoreError : public std::runtime_error {
  public:
    enum class Kind { NotFound, Conflict, Invalid };

    StoreError(Kind kind, const std::string& detail) : std::runtime_error(detail), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

struct StoredAnnotation {
    std::string annotation_id;
    schema::TextAnnotation body;

    bool operator==(const StoredAnnotation&) const = default;
};

struct PageQuery {
    std::uint64_t offset = 0;
    std::uint64_t limit = 100;  // valid range 1..1000
};

template <typename T>
struct Page {
    std::vector<T> items;
    std::uint64_t offset = 0;
    std::uint64_t limit = 0;
    std::uint64_t total_count = 0;
};

struct AnnotationStoreInfo {
    std::string id;
    std::string category;
    std::uint64_t annotation_count = 0;
};

// Document store for one data node. All state lives in memory guarded by a
// shared mutex; every mutation is appended to a per-resource-kind JSONL log
// under the data directory and replayed on construction, so a restarted node
// serves identical content. A torn trailing line (crash mid-append) is
// ignored during replay.
class NodeStore {
  public:
    NodeStore(std::filesystem::path data_dir, const schema::TaskRegistry& registry);

    // datasets
    void create_dataset(const std::string& id);
    schema::Dataset get_dataset(const std::string& id) const;
    Page<std::string> list_dataset_ids(PageQuery query) const;
    void delete_dataset(const std::string& id);

    // annotation stores (each store holds annotations of one category)
    void create_annotation_store(const schema::AnnotationStoreRef& ref,
                                 const std::string& category);
    AnnotationStoreInfo get_annotation_store(const schema::AnnotationStoreRef& ref) const;
    Page<AnnotationStoreInfo> list_annotation_stores(const std::string& dataset_id,
                                                     PageQuery query) const;
    void delete_annotation_store(const schema::AnnotationStoreRef& ref);

    // annotations
    StoredAnnotation store_annotation(const schema::AnnotationStoreRef& ref,
                                      schema::TextAnnotation ann);
    StoredAnnotation get_annotation(const schema::AnnotationStoreRef& ref,
                                    const std::string& annotation_id) const;
    Page<StoredAnnotation> list_annotations(const schema::AnnotationStoreRef& ref,
                                            PageQuery query) const;
    void delete_annotation(const schema::AnnotationStoreRef& ref,
                           const std::string& annotation_id);

    // fhir stores (notes + patients)
    void create_fhir_store(const schema::NoteStoreRef& ref);
    Page<std::string> list_fhir_store_ids(const std::string& dataset_id, PageQuery query) const;
    void delete_fhir_store(const schema::NoteStoreRef& ref);

    void create_patient(const schema::NoteStoreRef& ref, const std::string& identifier);
    Page<std::string> list_patient_ids(const schema::NoteStoreRef& ref, PageQuery query) const;

    void create_note(const schema::NoteStoreRef& ref, const schema::ClinicalNote& note);
    schema::ClinicalNote get_note(const schema::NoteStoreRef& ref,
                                  const std::string& note_id) const;
    Page<schema::ClinicalNote> list_notes(const schema::NoteStoreRef& ref, PageQuery query) const;

  private:
    struct AnnotationStoreData {
        std::string category;
        std::map<std::string, schema::TextAnnotation> annotations;  // by annotationId
        std::uint64_t next_id = 1;
    };
    struct FhirStoreData {
        std::set<std::string> patients;
        std::map<std::string, schema::ClinicalNote> notes;  // by identifier
    };
    struct DatasetData {
        std::map<std::string, AnnotationStoreData> annotation_stores;
        std::map<std::string, FhirStoreData> fhir_stores;
    };

    void replay();
    void append(const std::string& kind, nlohmann::json line);
    void apply(const std::string& kind, const nlohmann::json& line);

    const DatasetData& dataset_or_throw(const std::string& id) const;
    DatasetData& dataset_or_throw(const std::string& id);
    const AnnotationStoreData& store_or_throw(const schema::AnnotationStoreRef& ref) const;
    AnnotationStoreData& store_or_throw(const schema::AnnotationStoreRef& ref);
    const FhirStoreData& fhir_or_throw(const schema::NoteStoreRef& ref) const;
    FhirStoreData& fhir_or_throw(const schema::NoteStoreRef& ref);
    bool note_resident(const std::string& dataset_id, const std::string& note_id,
                       const schema::ClinicalNote** out) const;

    std::filesystem::path data_dir_;
    const schema::TaskRegistry& registry_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, DatasetData> datasets_;
    std::uint64_t next_seq_ = 1;
    std::map<std::string, std::ofstream> logs_;
};

// Validates and clamps a pagination query: limit outside 1..1000 or a bad
// numeric string raises Invalid.
PageQuery parse_page_query(const std::string& offset, const std::string& limit);

}  // namespace sandbox::node
