#include "sandbox/transfer.hpp"

#include <set>

namespace sandbox::transfer {

IngestResult ingest_bundle(node::NodeClient& client, const schema::DatasetBundle& bundle,
                           const schema::TaskRegistry& registry) {
    IngestResult result;
    result.dataset_id = bundle.manifest.id;
    result.fhir_store_id = "notes";

    client.create_dataset(bundle.manifest.id);
    schema::NoteStoreRef notes_ref{bundle.manifest.id, result.fhir_store_id};
    client.create_fhir_store(notes_ref);

    std::set<std::string> patients;
    for (const auto& note : bundle.notes) {
        if (patients.insert(note.patient_id).second) {
            client.create_patient(notes_ref, note.patient_id);
        }
        client.create_note(notes_ref, note);
        ++result.note_count;
    }

    for (const auto& category : bundle.manifest.categories) {
        const auto task = registry.find(category);
        if (!task) {
            throw std::invalid_argument("bundle lists unregistered category: " + category);
        }
        schema::AnnotationStoreRef ref{bundle.manifest.id, gold_store_id(*task)};
        client.create_annotation_store(ref, category);
        result.gold_store_ids[category] = ref.annotation_store_id;
        auto it = bundle.gold.find(category);
        if (it == bundle.gold.end()) {
            continue;
        }
        for (const auto& ann : it->second) {
            client.store_annotation(ref, ann);
            ++result.annotation_count;
        }
    }
    return result;
}

schema::DatasetBundle export_bundle(node::NodeClient& client, const std::string& dataset_id,
                                    const schema::TaskRegistry& registry) {
    schema::DatasetBundle bundle;
    bundle.manifest.id = dataset_id;

    auto dataset = client.get_dataset(dataset_id);
    for (const auto& fhir_store : dataset.fhir_store_ids) {
        for (auto& note : client.list_all_notes({dataset_id, fhir_store})) {
            bundle.notes.push_back(std::move(note));
        }
    }
    bundle.manifest.note_count = bundle.notes.size();

    // Categories surface in registry order so re-exported manifests match
    // generator output.
    std::map<std::string, std::string> store_by_category;
    for (const auto& store_id : dataset.annotation_store_ids) {
        auto info = client.get_annotation_store({dataset_id, store_id});
        store_by_category[info.category] = store_id;
    }
    for (const auto& task : registry.all()) {
        auto it = store_by_category.find(task.name());
        if (it == store_by_category.end()) {
            continue;
        }
        bundle.manifest.categories.push_back(task.name());
        auto& gold = bundle.gold[task.name()];
        for (auto& stored : client.list_all_annotations({dataset_id, it->second})) {
            gold.push_back(std::move(stored.body));
        }
    }
    return bundle;
}

}  // namespace sandbox::transfer
