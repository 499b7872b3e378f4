#pragma once

#include <filesystem>

#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::schema {

// On-disk interchange layout:
//   <dir>/manifest.json          {"categories":[...],"id":"...","noteCount":N}
//   <dir>/notes.json             [ note, ... ]
//   <dir>/gold/<category>.json   {"Text<Pascal>Annotations":[ annotation, ... ]}
// All files canonical JSON (sorted keys, no whitespace, UTF-8).

class BundleError : public std::runtime_error {
  public:
    explicit BundleError(const std::string& what) : std::runtime_error(what) {}
};

// Reads and validates; throws BundleError on parse or validation failure
// (parse errors carry file and byte position).
DatasetBundle read_bundle(const std::filesystem::path& dir, const TaskRegistry& registry);

// Validates, then writes canonically. The directory is created if missing.
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir,
                  const TaskRegistry& registry);

// Canonical file contents, keyed by relative path ("manifest.json",
// "notes.json", "gold/date.json", ...). Used for byte-level comparisons.
std::map<std::string, std::string> bundle_files(const DatasetBundle& bundle,
                                                const TaskRegistry& registry);

}  // namespace sandbox::schema
