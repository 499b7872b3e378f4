#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "sandbox/node_client.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::transfer {

// Bundle layout inside a data node: one dataset named after the bundle, one
// fhir store "notes" holding patients and notes, and one annotation store
// "gold-<task>" per category.
inline std::string gold_store_id(const schema::TaskType& task) {
    return "gold-" + task.file_stem();
}

struct IngestResult {
    std::string dataset_id;
    std::string fhir_store_id;
    std::map<std::string, std::string> gold_store_ids;  // category -> store id
    std::uint64_t note_count = 0;
    std::uint64_t annotation_count = 0;
};

IngestResult ingest_bundle(node::NodeClient& client, const schema::DatasetBundle& bundle,
                           const schema::TaskRegistry& registry);

// Rebuilds a bundle from a hosted dataset; with the layout above this is the
// exact inverse of ingest_bundle.
schema::DatasetBundle export_bundle(node::NodeClient& client, const std::string& dataset_id,
                                    const schema::TaskRegistry& registry);

}  // namespace sandbox::transfer
