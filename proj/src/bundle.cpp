#include "sandbox/bundle.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sandbox/validation.hpp"

namespace sandbox::schema {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BundleError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw BundleError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what());
    }
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BundleError("cannot write " + path.string());
    out << content;
    if (!out) throw BundleError("write failed: " + path.string());
}

TaskType resolve_category(const TaskRegistry& registry, const std::string& name,
                          const std::string& context) {
    auto task = registry.find(name);
    if (!task) throw BundleError(context + ": unknown category '" + name + "'");
    return *task;
}

}  // namespace

std::map<std::string, std::string> bundle_files(const DatasetBundle& bundle,
                                                const TaskRegistry& registry) {
    std::map<std::string, std::string> files;

    json manifest{{"id", bundle.manifest.id},
                  {"noteCount", bundle.manifest.note_count},
                  {"categories", bundle.manifest.categories}};
    files["manifest.json"] = canonical_dump(manifest);

    json notes = json::array();
    for (const auto& note : bundle.notes) notes.push_back(note_to_json(note));
    files["notes.json"] = canonical_dump(notes);

    for (const auto& cat_name : bundle.manifest.categories) {
        const TaskType task = resolve_category(registry, cat_name, "manifest");
        json anns = json::array();
        auto it = bundle.gold.find(cat_name);
        if (it != bundle.gold.end()) {
            for (const auto& ann : it->second) anns.push_back(annotation_to_json(ann));
        }
        files["gold/" + task.file_stem() + ".json"] =
            canonical_dump(json{{task.gold_list_key(), anns}});
    }
    return files;
}

void write_bundle(const DatasetBundle& bundle, const fs::path& dir, const TaskRegistry& registry) {
    auto vr = validate_bundle(bundle, registry);
    if (!vr.ok()) throw BundleError("bundle invalid: " + vr.joined());

    fs::create_directories(dir / "gold");
    for (const auto& [rel, content] : bundle_files(bundle, registry)) {
        write_file(dir / rel, content);
    }
}

DatasetBundle read_bundle(const fs::path& dir, const TaskRegistry& registry) {
    if (!fs::is_directory(dir)) throw BundleError("not a bundle directory: " + dir.string());

    DatasetBundle bundle;

    const json manifest = parse_file(dir / "manifest.json");
    if (!manifest.is_object()) throw BundleError("manifest.json: must be an object");
    try {
        bundle.manifest.id = manifest.at("id").get<std::string>();
        bundle.manifest.note_count = manifest.at("noteCount").get<std::uint64_t>();
        bundle.manifest.categories = manifest.at("categories").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw BundleError("manifest.json: " + std::string(e.what()));
    }

    const json notes = parse_file(dir / "notes.json");
    if (!notes.is_array()) throw BundleError("notes.json: must be an array");
    for (const auto& jn : notes) {
        try {
            bundle.notes.push_back(note_from_json(jn));
        } catch (const WireError& e) {
            throw BundleError("notes.json: " + std::string(e.what()));
        }
    }

    for (const auto& cat_name : bundle.manifest.categories) {
        const TaskType task = resolve_category(registry, cat_name, dir.string() + "/manifest.json");
        const fs::path path = dir / "gold" / (task.file_stem() + ".json");
        const json doc = parse_file(path);
        const std::string key = task.gold_list_key();
        if (!doc.is_object() || doc.size() != 1 || !doc.contains(key) || !doc[key].is_array()) {
            throw BundleError(path.string() + ": expected an object with single key '" + key + "'");
        }
        auto& list = bundle.gold[cat_name];
        for (const auto& ja : doc[key]) {
            try {
                list.push_back(annotation_from_json(ja, cat_name));
            } catch (const WireError& e) {
                throw BundleError(path.string() + ": " + std::string(e.what()));
            }
        }
    }

    auto vr = validate_bundle(bundle, registry);
    if (!vr.ok()) throw BundleError("bundle invalid: " + vr.joined());
    return bundle;
}

}  // namespace sandbox::schema
