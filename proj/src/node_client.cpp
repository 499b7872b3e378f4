#include "sandbox/node_client.hpp"

#include "http_common.hpp"

namespace sandbox::node {

namespace {

using nlohmann::json;

std::string annotations_path(const schema::AnnotationStoreRef& ref) {
    return "/api/v1/datasets/" + ref.dataset_id + "/annotationStores/" +
           ref.annotation_store_id + "/annotations";
}

std::string notes_path(const schema::NoteStoreRef& ref) {
    return "/api/v1/datasets/" + ref.dataset_id + "/fhirStores/" + ref.fhir_store_id +
           "/fhir/Note";
}

std::string page_suffix(std::uint64_t offset, std::uint64_t limit) {
    return "?offset=" + std::to_string(offset) + "&limit=" + std::to_string(limit);
}

}  // namespace

struct NodeClient::Impl {
    httplib::Client client;

    explicit Impl(const std::pair<std::string, int>& hp) : client(hp.first, hp.second) {
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        client.set_keep_alive(false);
    }

    json request(const char* method, const std::string& path, const json* body) {
        httplib::Result res = [&] {
            std::string payload = body ? schema::canonical_dump(*body) : std::string();
            switch (*method) {
                case 'G': return client.Get(path);
                case 'P': return client.Post(path, payload, "application/json");
                default: return client.Delete(path);
            }
        }();
        if (!res) {
            throw NodeError(0, "node unreachable: " + httplib::to_string(res.error()));
        }
        if (res->status >= 400) {
            std::string detail = res->body;
            json problem = json::parse(res->body, nullptr, false);
            if (problem.is_object() && problem.contains("detail") &&
                problem["detail"].is_string()) {
                detail = problem["detail"].get<std::string>();
            }
            throw NodeError(res->status, detail);
        }
        if (res->body.empty()) {
            return json();
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            throw NodeError(res->status, "node returned invalid JSON for " + path);
        }
        return parsed;
    }

    json get(const std::string& path) { return request("GET", path, nullptr); }
    json post(const std::string& path, const json& body) { return request("POST", path, &body); }
    void del(const std::string& path) { request("DELETE", path, nullptr); }
};

NodeClient::NodeClient(const std::string& endpoint)
    : impl_(std::make_unique<Impl>(http::split_endpoint(endpoint))) {}

NodeClient::~NodeClient() = default;

void NodeClient::set_read_timeout(std::chrono::milliseconds timeout) {
    if (timeout.count() <= 0) {
        timeout = std::chrono::milliseconds(1);
    }
    impl_->client.set_read_timeout(timeout);
}

ServiceInfo NodeClient::service_info() {
    auto j = impl_->get("/api/v1/service");
    return {j.at("name").get<std::string>(), j.at("version").get<std::string>(),
            j.at("apiBasePath").get<std::string>()};
}

void NodeClient::create_dataset(const std::string& id) {
    impl_->post("/api/v1/datasets", json{{"id", id}});
}

schema::Dataset NodeClient::get_dataset(const std::string& id) {
    auto j = impl_->get("/api/v1/datasets/" + id);
    schema::Dataset ds;
    ds.id = j.at("id").get<std::string>();
    ds.fhir_store_ids = j.at("fhirStoreIds").get<std::vector<std::string>>();
    ds.annotation_store_ids = j.at("annotationStoreIds").get<std::vector<std::string>>();
    return ds;
}

std::vector<std::string> NodeClient::list_dataset_ids() {
    std::vector<std::string> ids;
    std::uint64_t offset = 0;
    while (true) {
        auto j = impl_->get("/api/v1/datasets" + page_suffix(offset, 100));
        for (const auto& item : j.at("items")) {
            ids.push_back(item.at("id").get<std::string>());
        }
        offset += j.at("items").size();
        if (offset >= j.at("totalCount").get<std::uint64_t>() || j.at("items").empty()) {
            break;
        }
    }
    return ids;
}

void NodeClient::delete_dataset(const std::string& id) {
    impl_->del("/api/v1/datasets/" + id);
}

void NodeClient::create_annotation_store(const schema::AnnotationStoreRef& ref,
                                         const std::string& category) {
    impl_->post("/api/v1/datasets/" + ref.dataset_id + "/annotationStores",
                json{{"id", ref.annotation_store_id}, {"category", category}});
}

AnnotationStoreInfo NodeClient::get_annotation_store(const schema::AnnotationStoreRef& ref) {
    auto j = impl_->get("/api/v1/datasets/" + ref.dataset_id + "/annotationStores/" +
                        ref.annotation_store_id);
    return {j.at("id").get<std::string>(), j.at("category").get<std::string>(),
            j.at("annotationCount").get<std::uint64_t>()};
}

std::vector<AnnotationStoreInfo> NodeClient::list_annotation_stores(
    const std::string& dataset_id) {
    std::vector<AnnotationStoreInfo> stores;
    std::uint64_t offset = 0;
    while (true) {
        auto j = impl_->get("/api/v1/datasets/" + dataset_id + "/annotationStores" +
                            page_suffix(offset, 100));
        for (const auto& item : j.at("items")) {
            stores.push_back({item.at("id").get<std::string>(),
                              item.at("category").get<std::string>(),
                              item.at("annotationCount").get<std::uint64_t>()});
        }
        offset += j.at("items").size();
        if (offset >= j.at("totalCount").get<std::uint64_t>() || j.at("items").empty()) {
            break;
        }
    }
    return stores;
}

void NodeClient::delete_annotation_store(const schema::AnnotationStoreRef& ref) {
    impl_->del("/api/v1/datasets/" + ref.dataset_id + "/annotationStores/" +
               ref.annotation_store_id);
}

namespace {

StoredAnnotation stored_from_json(const json& j, const std::string& category) {
    StoredAnnotation stored;
    stored.annotation_id = j.at("annotationId").get<std::string>();
    json body = j;
    body.erase("annotationId");
    stored.body = schema::annotation_from_json(body, category);
    return stored;
}

}  // namespace

StoredAnnotation NodeClient::store_annotation(const schema::AnnotationStoreRef& ref,
                                              const schema::TextAnnotation& ann) {
    auto j = impl_->post(annotations_path(ref), schema::annotation_to_json(ann));
    return stored_from_json(j, ann.category);
}

StoredAnnotation NodeClient::get_annotation(const schema::AnnotationStoreRef& ref,
                                            const std::string& annotation_id) {
    auto category = get_annotation_store(ref).category;
    auto j = impl_->get(annotations_path(ref) + "/" + annotation_id);
    return stored_from_json(j, category);
}

Page<StoredAnnotation> NodeClient::list_annotations(const schema::AnnotationStoreRef& ref,
                                                    std::uint64_t offset, std::uint64_t limit) {
    auto category = get_annotation_store(ref).category;
    auto j = impl_->get(annotations_path(ref) + page_suffix(offset, limit));
    Page<StoredAnnotation> page;
    page.offset = j.at("offset").get<std::uint64_t>();
    page.limit = j.at("limit").get<std::uint64_t>();
    page.total_count = j.at("totalCount").get<std::uint64_t>();
    for (const auto& item : j.at("items")) {
        page.items.push_back(stored_from_json(item, category));
    }
    return page;
}

std::vector<StoredAnnotation> NodeClient::list_all_annotations(
    const schema::AnnotationStoreRef& ref) {
    auto category = get_annotation_store(ref).category;
    std::vector<StoredAnnotation> all;
    std::uint64_t offset = 0;
    while (true) {
        auto j = impl_->get(annotations_path(ref) + page_suffix(offset, 1000));
        for (const auto& item : j.at("items")) {
            all.push_back(stored_from_json(item, category));
        }
        offset += j.at("items").size();
        if (offset >= j.at("totalCount").get<std::uint64_t>() || j.at("items").empty()) {
            break;
        }
    }
    return all;
}

void NodeClient::delete_annotation(const schema::AnnotationStoreRef& ref,
                                   const std::string& annotation_id) {
    impl_->del(annotations_path(ref) + "/" + annotation_id);
}

void NodeClient::create_fhir_store(const schema::NoteStoreRef& ref) {
    impl_->post("/api/v1/datasets/" + ref.dataset_id + "/fhirStores",
                json{{"id", ref.fhir_store_id}});
}

std::vector<std::string> NodeClient::list_fhir_store_ids(const std::string& dataset_id) {
    std::vector<std::string> ids;
    std::uint64_t offset = 0;
    while (true) {
        auto j =
            impl_->get("/api/v1/datasets/" + dataset_id + "/fhirStores" + page_suffix(offset, 100));
        for (const auto& item : j.at("items")) {
            ids.push_back(item.at("id").get<std::string>());
        }
        offset += j.at("items").size();
        if (offset >= j.at("totalCount").get<std::uint64_t>() || j.at("items").empty()) {
            break;
        }
    }
    return ids;
}

void NodeClient::create_patient(const schema::NoteStoreRef& ref, const std::string& identifier) {
    impl_->post("/api/v1/datasets/" + ref.dataset_id + "/fhirStores/" + ref.fhir_store_id +
                    "/fhir/Patient",
                json{{"identifier", identifier}});
}

std::vector<std::string> NodeClient::list_patient_ids(const schema::NoteStoreRef& ref) {
    std::vector<std::string> ids;
    std::uint64_t offset = 0;
    while (true) {
        auto j = impl_->get("/api/v1/datasets/" + ref.dataset_id + "/fhirStores/" +
                            ref.fhir_store_id + "/fhir/Patient" + page_suffix(offset, 100));
        for (const auto& item : j.at("items")) {
            ids.push_back(item.at("identifier").get<std::string>());
        }
        offset += j.at("items").size();
        if (offset >= j.at("totalCount").get<std::uint64_t>() || j.at("items").empty()) {
            break;
        }
    }
    return ids;
}

void NodeClient::create_note(const schema::NoteStoreRef& ref, const schema::ClinicalNote& note) {
    impl_->post(notes_path(ref), schema::note_to_json(note));
}

schema::ClinicalNote NodeClient::get_note(const schema::NoteStoreRef& ref,
                                          const std::string& note_id) {
    return schema::note_from_json(impl_->get(notes_path(ref) + "/" + note_id));
}

Page<schema::ClinicalNote> NodeClient::list_notes(const schema::NoteStoreRef& ref,
                                                  std::uint64_t offset, std::uint64_t limit) {
    auto j = impl_->get(notes_path(ref) + page_suffix(offset, limit));
    Page<schema::ClinicalNote> page;
    page.offset = j.at("offset").get<std::uint64_t>();
    page.limit = j.at("limit").get<std::uint64_t>();
    page.total_count = j.at("totalCount").get<std::uint64_t>();
    for (const auto& item : j.at("items")) {
        page.items.push_back(schema::note_from_json(item));
    }
    return page;
}

std::vector<schema::ClinicalNote> NodeClient::list_all_notes(const schema::NoteStoreRef& ref) {
    std::vector<schema::ClinicalNote> notes;
    std::uint64_t offset = 0;
    while (true) {
        auto page = list_notes(ref, offset, 100);
        for (auto& note : page.items) {
            notes.push_back(std::move(note));
        }
        offset += page.items.size();
        if (offset >= page.total_count || page.items.empty()) {
            break;
        }
    }
    return notes;
}

}  // namespace sandbox::node
