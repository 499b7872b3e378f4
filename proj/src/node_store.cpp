#include "sandbox/node_store.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "sandbox/validation.hpp"

namespace sandbox::node {

namespace {

using nlohmann::json;

const char* kKinds[] = {"datasets", "annotation_stores", "annotations",
                        "fhir_stores", "patients", "notes"};

std::uint64_t parse_uint(const std::string& s, const char* what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw StoreError(StoreError::Kind::Invalid,
                         std::string(what) + " must be a non-negative integer");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw StoreError(StoreError::Kind::Invalid, std::string(what) + " out of range");
    }
}

template <typename Map, typename Fn>
auto paginate_map(const Map& map, PageQuery query, Fn&& project) {
    using Item = decltype(project(*map.begin()));
    Page<Item> page;
    page.offset = query.offset;
    page.limit = query.limit;
    page.total_count = map.size();
    std::uint64_t index = 0;
    for (const auto& entry : map) {
        if (index >= query.offset) {
            if (page.items.size() >= query.limit) {
                break;
            }
            page.items.push_back(project(entry));
        }
        ++index;
    }
    return page;
}

std::string format_annotation_id(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ann-%06llu", static_cast<unsigned long long>(n));
    return buf;
}

std::uint64_t annotation_id_number(const std::string& id) {
    auto dash = id.rfind('-');
    if (dash == std::string::npos) {
        return 0;
    }
    auto digits = id.substr(dash + 1);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        return 0;
    }
    return std::stoull(digits);
}

void require_clean_id(const std::string& id, const char* what) {
    if (id.empty()) {
        throw StoreError(StoreError::Kind::Invalid, std::string(what) + " must be non-empty");
    }
    for (unsigned char c : id) {
        if (std::isspace(c) || c == '/') {
            throw StoreError(StoreError::Kind::Invalid,
                             std::string(what) + " must not contain whitespace or '/'");
        }
    }
}

}  // namespace

PageQuery parse_page_query(const std::string& offset, const std::string& limit) {
    PageQuery query;
    if (!offset.empty()) {
        query.offset = parse_uint(offset, "offset");
    }
    if (!limit.empty()) {
        query.limit = parse_uint(limit, "limit");
    }
    if (query.limit < 1 || query.limit > 1000) {
        throw StoreError(StoreError::Kind::Invalid, "limit must be between 1 and 1000");
    }
    return query;
}

NodeStore::NodeStore(std::filesystem::path data_dir, const schema::TaskRegistry& registry)
    : data_dir_(std::move(data_dir)), registry_(registry) {
    std::filesystem::create_directories(data_dir_);
    replay();
    for (const char* kind : kKinds) {
        logs_[kind].open(data_dir_ / (std::string(kind) + ".jsonl"), std::ios::app);
        if (!logs_[kind]) {
            throw std::runtime_error("cannot open log file for " + std::string(kind));
        }
    }
}

void NodeStore::replay() {
    // Gather every logged operation, then apply in global sequence order so
    // cross-kind effects (cascading deletes) replay exactly as they ran. Only
    // the final line of a log may be torn by a crash; it is dropped.
    std::vector<std::pair<std::uint64_t, std::pair<std::string, json>>> ops;
    for (const char* kind : kKinds) {
        auto path = data_dir_ / (std::string(kind) + ".jsonl");
        std::ifstream in(path);
        if (!in) {
            continue;
        }
        std::string line;
        bool saw_bad = false;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            if (saw_bad) {
                throw std::runtime_error("corrupt log line in " + path.string());
            }
            json parsed = json::parse(line, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("seq") ||
                !parsed["seq"].is_number_unsigned()) {
                saw_bad = true;
                continue;
            }
            const auto seq = parsed["seq"].get<std::uint64_t>();
            ops.emplace_back(seq, std::make_pair(std::string(kind), std::move(parsed)));
        }
    }
    std::stable_sort(ops.begin(), ops.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [seq, op] : ops) {
        apply(op.first, op.second);
        next_seq_ = std::max(next_seq_, seq + 1);
    }
}

void NodeStore::append(const std::string& kind, json line) {
    line["seq"] = next_seq_++;
    auto& out = logs_[kind];
    out << line.dump() << '\n';
    out.flush();
}

// Single mutation path shared by live operations and replay. Lines are
// trusted here; validation happens before logging.
void NodeStore::apply(const std::string& kind, const json& line) {
    const std::string op = line.at("op").get<std::string>();
    const bool create = op == "create";
    if (kind == "datasets") {
        const auto id = line.at("id").get<std::string>();
        if (create) {
            datasets_[id];
        } else {
            datasets_.erase(id);
        }
    } else if (kind == "annotation_stores") {
        auto& ds = datasets_.at(line.at("datasetId").get<std::string>());
        const auto id = line.at("id").get<std::string>();
        if (create) {
            ds.annotation_stores[id].category = line.at("category").get<std::string>();
        } else {
            ds.annotation_stores.erase(id);
        }
    } else if (kind == "annotations") {
        auto& ds = datasets_.at(line.at("datasetId").get<std::string>());
        auto& store = ds.annotation_stores.at(line.at("storeId").get<std::string>());
        const auto id = line.at("annotationId").get<std::string>();
        if (create) {
            store.annotations[id] = schema::annotation_from_json(line.at("body"), store.category);
            store.next_id = std::max(store.next_id, annotation_id_number(id) + 1);
        } else {
            store.annotations.erase(id);
        }
    } else if (kind == "fhir_stores") {
        auto& ds = datasets_.at(line.at("datasetId").get<std::string>());
        const auto id = line.at("id").get<std::string>();
        if (create) {
            ds.fhir_stores[id];
        } else {
            ds.fhir_stores.erase(id);
        }
    } else if (kind == "patients") {
        auto& ds = datasets_.at(line.at("datasetId").get<std::string>());
        auto& fs = ds.fhir_stores.at(line.at("storeId").get<std::string>());
        if (create) {
            fs.patients.insert(line.at("id").get<std::string>());
        } else {
            fs.patients.erase(line.at("id").get<std::string>());
        }
    } else if (kind == "notes") {
        auto& ds = datasets_.at(line.at("datasetId").get<std::string>());
        auto& fs = ds.fhir_stores.at(line.at("storeId").get<std::string>());
        if (create) {
            auto note = schema::note_from_json(line.at("doc"));
            fs.notes[note.identifier] = std::move(note);
        } else {
            fs.notes.erase(line.at("id").get<std::string>());
        }
    }
}

const NodeStore::DatasetData& NodeStore::dataset_or_throw(const std::string& id) const {
    auto it = datasets_.find(id);
    if (it == datasets_.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown dataset: " + id);
    }
    return it->second;
}

NodeStore::DatasetData& NodeStore::dataset_or_throw(const std::string& id) {
    auto it = datasets_.find(id);
    if (it == datasets_.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown dataset: " + id);
    }
    return it->second;
}

const NodeStore::AnnotationStoreData& NodeStore::store_or_throw(
    const schema::AnnotationStoreRef& ref) const {
    const auto& ds = dataset_or_throw(ref.dataset_id);
    auto it = ds.annotation_stores.find(ref.annotation_store_id);
    if (it == ds.annotation_stores.end()) {
        throw StoreError(StoreError::Kind::NotFound,
                         "unknown annotation store: " + ref.annotation_store_id);
    }
    return it->second;
}

NodeStore::AnnotationStoreData& NodeStore::store_or_throw(const schema::AnnotationStoreRef& ref) {
    auto& ds = dataset_or_throw(ref.dataset_id);
    auto it = ds.annotation_stores.find(ref.annotation_store_id);
    if (it == ds.annotation_stores.end()) {
        throw StoreError(StoreError::Kind::NotFound,
                         "unknown annotation store: " + ref.annotation_store_id);
    }
    return it->second;
}

const NodeStore::FhirStoreData& NodeStore::fhir_or_throw(const schema::NoteStoreRef& ref) const {
    const auto& ds = dataset_or_throw(ref.dataset_id);
    auto it = ds.fhir_stores.find(ref.fhir_store_id);
    if (it == ds.fhir_stores.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown fhir store: " + ref.fhir_store_id);
    }
    return it->second;
}

NodeStore::FhirStoreData& NodeStore::fhir_or_throw(const schema::NoteStoreRef& ref) {
    auto& ds = dataset_or_throw(ref.dataset_id);
    auto it = ds.fhir_stores.find(ref.fhir_store_id);
    if (it == ds.fhir_stores.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown fhir store: " + ref.fhir_store_id);
    }
    return it->second;
}

bool NodeStore::note_resident(const std::string& dataset_id, const std::string& note_id,
                              const schema::ClinicalNote** out) const {
    auto ds = datasets_.find(dataset_id);
    if (ds == datasets_.end()) {
        return false;
    }
    for (const auto& [fs_id, fs] : ds->second.fhir_stores) {
        auto it = fs.notes.find(note_id);
        if (it != fs.notes.end()) {
            if (out) {
                *out = &it->second;
            }
            return true;
        }
    }
    return false;
}

void NodeStore::create_dataset(const std::string& id) {
    require_clean_id(id, "dataset id");
    std::unique_lock lock(mutex_);
    if (datasets_.count(id)) {
        throw StoreError(StoreError::Kind::Conflict, "dataset already exists: " + id);
    }
    json line{{"op", "create"}, {"id", id}};
    apply("datasets", line);
    append("datasets", std::move(line));
}

schema::Dataset NodeStore::get_dataset(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto& ds = dataset_or_throw(id);
    schema::Dataset out;
    out.id = id;
    for (const auto& [fs_id, fs] : ds.fhir_stores) {
        out.fhir_store_ids.push_back(fs_id);
    }
    for (const auto& [as_id, as] : ds.annotation_stores) {
        out.annotation_store_ids.push_back(as_id);
    }
    return out;
}

Page<std::string> NodeStore::list_dataset_ids(PageQuery query) const {
    std::shared_lock lock(mutex_);
    return paginate_map(datasets_, query, [](const auto& entry) { return entry.first; });
}

void NodeStore::delete_dataset(const std::string& id) {
    std::unique_lock lock(mutex_);
    dataset_or_throw(id);
    json line{{"op", "delete"}, {"id", id}};
    apply("datasets", line);
    append("datasets", std::move(line));
}

void NodeStore::create_annotation_store(const schema::AnnotationStoreRef& ref,
                                        const std::string& category) {
    require_clean_id(ref.annotation_store_id, "annotation store id");
    if (!registry_.find(category)) {
        throw StoreError(StoreError::Kind::Invalid, "unknown category: " + category);
    }
    std::unique_lock lock(mutex_);
    auto& ds = dataset_or_throw(ref.dataset_id);
    if (ds.annotation_stores.count(ref.annotation_store_id)) {
        throw StoreError(StoreError::Kind::Conflict,
                         "annotation store already exists: " + ref.annotation_store_id);
    }
    json line{{"op", "create"},
              {"datasetId", ref.dataset_id},
              {"id", ref.annotation_store_id},
              {"category", category}};
    apply("annotation_stores", line);
    append("annotation_stores", std::move(line));
}

AnnotationStoreInfo NodeStore::get_annotation_store(const schema::AnnotationStoreRef& ref) const {
    std::shared_lock lock(mutex_);
    const auto& store = store_or_throw(ref);
    return {ref.annotation_store_id, store.category, store.annotations.size()};
}

Page<AnnotationStoreInfo> NodeStore::list_annotation_stores(const std::string& dataset_id,
                                                            PageQuery query) const {
    std::shared_lock lock(mutex_);
    const auto& ds = dataset_or_throw(dataset_id);
    return paginate_map(ds.annotation_stores, query, [](const auto& entry) {
        return AnnotationStoreInfo{entry.first, entry.second.category,
                                   entry.second.annotations.size()};
    });
}

void NodeStore::delete_annotation_store(const schema::AnnotationStoreRef& ref) {
    std::unique_lock lock(mutex_);
    store_or_throw(ref);
    json line{{"op", "delete"}, {"datasetId", ref.dataset_id}, {"id", ref.annotation_store_id}};
    apply("annotation_stores", line);
    append("annotation_stores", std::move(line));
}

StoredAnnotation NodeStore::store_annotation(const schema::AnnotationStoreRef& ref,
                                             schema::TextAnnotation ann) {
    std::unique_lock lock(mutex_);
    auto& store = store_or_throw(ref);
    ann.category = store.category;

    // Full validation when the note lives in this dataset, bounds-only
    // validation otherwise.
    const schema::ClinicalNote* note = nullptr;
    schema::ValidationResult result;
    if (note_resident(ref.dataset_id, ann.note_id, &note)) {
        result = schema::validate_annotation(ann, *note);
    } else {
        result = schema::validate_annotation_shape(ann);
    }
    if (!result.ok()) {
        throw StoreError(StoreError::Kind::Invalid, result.joined());
    }

    StoredAnnotation stored;
    stored.annotation_id = format_annotation_id(store.next_id);
    stored.body = std::move(ann);
    json line{{"op", "create"},
              {"datasetId", ref.dataset_id},
              {"storeId", ref.annotation_store_id},
              {"annotationId", stored.annotation_id},
              {"body", schema::annotation_to_json(stored.body)}};
    apply("annotations", line);
    append("annotations", std::move(line));
    return stored;
}

StoredAnnotation NodeStore::get_annotation(const schema::AnnotationStoreRef& ref,
                                           const std::string& annotation_id) const {
    std::shared_lock lock(mutex_);
    const auto& store = store_or_throw(ref);
    auto it = store.annotations.find(annotation_id);
    if (it == store.annotations.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown annotation: " + annotation_id);
    }
    return {annotation_id, it->second};
}

Page<StoredAnnotation> NodeStore::list_annotations(const schema::AnnotationStoreRef& ref,
                                                   PageQuery query) const {
    std::shared_lock lock(mutex_);
    const auto& store = store_or_throw(ref);
    return paginate_map(store.annotations, query, [](const auto& entry) {
        return StoredAnnotation{entry.first, entry.second};
    });
}

void NodeStore::delete_annotation(const schema::AnnotationStoreRef& ref,
                                  const std::string& annotation_id) {
    std::unique_lock lock(mutex_);
    auto& store = store_or_throw(ref);
    if (!store.annotations.count(annotation_id)) {
        throw StoreError(StoreError::Kind::NotFound, "unknown annotation: " + annotation_id);
    }
    json line{{"op", "delete"},
              {"datasetId", ref.dataset_id},
              {"storeId", ref.annotation_store_id},
              {"annotationId", annotation_id}};
    apply("annotations", line);
    append("annotations", std::move(line));
}

void NodeStore::create_fhir_store(const schema::NoteStoreRef& ref) {
    require_clean_id(ref.fhir_store_id, "fhir store id");
    std::unique_lock lock(mutex_);
    auto& ds = dataset_or_throw(ref.dataset_id);
    if (ds.fhir_stores.count(ref.fhir_store_id)) {
        throw StoreError(StoreError::Kind::Conflict,
                         "fhir store already exists: " + ref.fhir_store_id);
    }
    json line{{"op", "create"}, {"datasetId", ref.dataset_id}, {"id", ref.fhir_store_id}};
    apply("fhir_stores", line);
    append("fhir_stores", std::move(line));
}

Page<std::string> NodeStore::list_fhir_store_ids(const std::string& dataset_id,
                                                 PageQuery query) const {
    std::shared_lock lock(mutex_);
    const auto& ds = dataset_or_throw(dataset_id);
    return paginate_map(ds.fhir_stores, query, [](const auto& entry) { return entry.first; });
}

void NodeStore::delete_fhir_store(const schema::NoteStoreRef& ref) {
    std::unique_lock lock(mutex_);
    fhir_or_throw(ref);
    json line{{"op", "delete"}, {"datasetId", ref.dataset_id}, {"id", ref.fhir_store_id}};
    apply("fhir_stores", line);
    append("fhir_stores", std::move(line));
}

void NodeStore::create_patient(const schema::NoteStoreRef& ref, const std::string& identifier) {
    require_clean_id(identifier, "patient identifier");
    std::unique_lock lock(mutex_);
    auto& fs = fhir_or_throw(ref);
    if (fs.patients.count(identifier)) {
        throw StoreError(StoreError::Kind::Conflict, "patient already exists: " + identifier);
    }
    json line{{"op", "create"},
              {"datasetId", ref.dataset_id},
              {"storeId", ref.fhir_store_id},
              {"id", identifier}};
    apply("patients", line);
    append("patients", std::move(line));
}

Page<std::string> NodeStore::list_patient_ids(const schema::NoteStoreRef& ref,
                                              PageQuery query) const {
    std::shared_lock lock(mutex_);
    const auto& fs = fhir_or_throw(ref);
    // std::set has the same iteration shape as a map of keys
    Page<std::string> page;
    page.offset = query.offset;
    page.limit = query.limit;
    page.total_count = fs.patients.size();
    std::uint64_t index = 0;
    for (const auto& id : fs.patients) {
        if (index >= query.offset) {
            if (page.items.size() >= query.limit) {
                break;
            }
            page.items.push_back(id);
        }
        ++index;
    }
    return page;
}

void NodeStore::create_note(const schema::NoteStoreRef& ref, const schema::ClinicalNote& note) {
    auto valid = schema::validate_note(note);
    if (!valid.ok()) {
        throw StoreError(StoreError::Kind::Invalid, valid.joined());
    }
    std::unique_lock lock(mutex_);
    auto& fs = fhir_or_throw(ref);
    if (fs.notes.count(note.identifier)) {
        throw StoreError(StoreError::Kind::Conflict,
                         "note already exists: " + note.identifier);
    }
    if (!fs.patients.count(note.patient_id)) {
        throw StoreError(StoreError::Kind::Invalid,
                         "note references unknown patient: " + note.patient_id);
    }
    json line{{"op", "create"},
              {"datasetId", ref.dataset_id},
              {"storeId", ref.fhir_store_id},
              {"doc", schema::note_to_json(note)}};
    apply("notes", line);
    append("notes", std::move(line));
}

schema::ClinicalNote NodeStore::get_note(const schema::NoteStoreRef& ref,
                                         const std::string& note_id) const {
    std::shared_lock lock(mutex_);
    const auto& fs = fhir_or_throw(ref);
    auto it = fs.notes.find(note_id);
    if (it == fs.notes.end()) {
        throw StoreError(StoreError::Kind::NotFound, "unknown note: " + note_id);
    }
    return it->second;
}

Page<schema::ClinicalNote> NodeStore::list_notes(const schema::NoteStoreRef& ref,
                                                 PageQuery query) const {
    std::shared_lock lock(mutex_);
    const auto& fs = fhir_or_throw(ref);
    return paginate_map(fs.notes, query, [](const auto& entry) { return entry.second; });
}

}  // namespace sandbox::node
