#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "sandbox/types.hpp"

namespace fixtures {

// Self-deleting unique directory under the system temp root.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        auto pattern =
            (std::filesystem::temp_directory_path() / ("sandbox-" + tag + "-XXXXXX")).string();
        path_ = ::mkdtemp(pattern.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& sub) const { return path_ / sub; }

  private:
    std::filesystem::path path_;
};

inline sandbox::schema::ClinicalNote make_note(const std::string& id, const std::string& text,
                                               const std::string& patient = "p1") {
    return {id, patient, text, "loinc:LP29684-5"};
}

inline sandbox::schema::TextAnnotation make_ann(const std::string& note_id, std::uint32_t start,
                                                std::uint32_t length, const std::string& text,
                                                const std::string& category) {
    sandbox::schema::TextAnnotation ann;
    ann.note_id = note_id;
    ann.start = start;
    ann.length = length;
    ann.text = text;
    ann.category = category;
    return ann;
}

}  // namespace fixtures
