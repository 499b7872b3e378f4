#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::corpus {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Text pools backing the generator. Scaffolding (templates, fillers) must be
// free of PHI-shaped strings: no digits, no '@', no capitalized words that
// appear in the name/location pools.
struct SurrogatePools {
    std::vector<std::string> given_names;
    std::vector<std::string> family_names;
    std::vector<std::string> locations;
    std::vector<std::string> street_names;
    std::vector<std::string> email_domains;
    // category name -> sentence templates, each containing exactly one
    // "{CATEGORY}" placeholder
    std::map<std::string, std::vector<std::string>> templates;
    std::vector<std::string> fillers;
};

// Loads pools from a data directory with lexicons/*.txt and corpus/*.txt
// (one entry per line, '#' comments).
SurrogatePools load_pools(const std::filesystem::path& data_dir);

struct CorpusConfig {
    std::uint64_t seed = 0;
    std::uint64_t note_count = 1;
    std::string id;  // bundle/dataset id; defaults to "synthetic-<seed>"
    std::vector<std::string> note_types = {"loinc:LP29684-5"};
    // expected annotations per note; keys must be registered tasks
    std::map<std::string, double> category_density;
};

CorpusConfig config_from_json_file(const std::filesystem::path& path);

// Deterministic: identical config + pools -> byte-identical bundle.
// Randomness comes from SplitMix64 seeded with config.seed (see rng.hpp).
schema::DatasetBundle generate_corpus(const CorpusConfig& config, const SurrogatePools& pools,
                                      const schema::TaskRegistry& registry);

enum class PerturbMode { Drop, Shift, Split, Duplicate, Retype };

PerturbMode perturb_mode_from_string(const std::string& s);
std::string to_string(PerturbMode mode);

// Derives a prediction list with analytically known metric effects:
//   Drop      removes floor(rate*n) annotations
//   Shift     moves floor(rate*n) starts by +1
//   Split     replaces floor(rate*n) multi-token annotations by their first token
//   Duplicate appends exact copies of floor(rate*n) annotations
//   Retype    moves floor(rate*n) annotations to the next category
std::vector<schema::TextAnnotation> perturb_predictions(
    const std::vector<schema::TextAnnotation>& gold, PerturbMode mode, double rate,
    std::uint64_t seed, const schema::TaskRegistry& registry);

// Per-category annotation/note counts for the generate command's summary.
struct CategoryTally {
    std::string category;
    std::uint64_t annotations = 0;
    std::uint64_t notes_with = 0;
};

std::vector<CategoryTally> tally_bundle(const schema::DatasetBundle& bundle);

}  // namespace sandbox::corpus
