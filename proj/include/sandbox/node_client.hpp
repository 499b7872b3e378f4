#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sandbox/node_store.hpp"
#include "sandbox/types.hpp"

namespace sandbox::node {

// status 0 means the node could not be reached at all.
class NodeError : public std::runtime_error {
  public:
    NodeError(int status, const std::string& detail) : std::runtime_error(detail),
                                                       status_(status) {}
    int status() const { return status_; }

  private:
    int status_;
};

struct ServiceInfo {
    std::string name;
    std::string version;
    std::string api_base_path;
};

class NodeClient {
  public:
    explicit NodeClient(const std::string& endpoint);  // "host:port"
    ~NodeClient();

    NodeClient(const NodeClient&) = delete;
    NodeClient& operator=(const NodeClient&) = delete;

    void set_read_timeout(std::chrono::milliseconds timeout);

    ServiceInfo service_info();

    void create_dataset(const std::string& id);
    schema::Dataset get_dataset(const std::string& id);
    std::vector<std::string> list_dataset_ids();
    void delete_dataset(const std::string& id);

    void create_annotation_store(const schema::AnnotationStoreRef& ref,
                                 const std::string& category);
    AnnotationStoreInfo get_annotation_store(const schema::AnnotationStoreRef& ref);
    std::vector<AnnotationStoreInfo> list_annotation_stores(const std::string& dataset_id);
    void delete_annotation_store(const schema::AnnotationStoreRef& ref);

    StoredAnnotation store_annotation(const schema::AnnotationStoreRef& ref,
                                      const schema::TextAnnotation& ann);
    StoredAnnotation get_annotation(const schema::AnnotationStoreRef& ref,
                                    const std::string& annotation_id);
    Page<StoredAnnotation> list_annotations(const schema::AnnotationStoreRef& ref,
                                            std::uint64_t offset, std::uint64_t limit);
    // Pages until exhaustion; annotation category comes from the store.
    std::vector<StoredAnnotation> list_all_annotations(const schema::AnnotationStoreRef& ref);
    void delete_annotation(const schema::AnnotationStoreRef& ref,
                           const std::string& annotation_id);

    void create_fhir_store(const schema::NoteStoreRef& ref);
    std::vector<std::string> list_fhir_store_ids(const std::string& dataset_id);

    void create_patient(const schema::NoteStoreRef& ref, const std::string& identifier);
    std::vector<std::string> list_patient_ids(const schema::NoteStoreRef& ref);

    void create_note(const schema::NoteStoreRef& ref, const schema::ClinicalNote& note);
    schema::ClinicalNote get_note(const schema::NoteStoreRef& ref, const std::string& note_id);
    Page<schema::ClinicalNote> list_notes(const schema::NoteStoreRef& ref, std::uint64_t offset,
                                          std::uint64_t limit);
    std::vector<schema::ClinicalNote> list_all_notes(const schema::NoteStoreRef& ref);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sandbox::node
