#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandbox/corpus.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::tool {

struct ToolMetadata {
    std::string name;
    std::string version;
    std::string description;
    std::string author;
    std::string api_version;
};

nlohmann::json metadata_to_json(const ToolMetadata& meta);
ToolMetadata metadata_from_json(const nlohmann::json& j);

// A clinical-text annotation tool. Implementations must be stateless with
// respect to annotate(): thread-safe, and identical output for identical
// input regardless of call order.
class Annotator {
  public:
    virtual ~Annotator() = default;
    virtual std::vector<schema::TextAnnotation> annotate(const schema::ClinicalNote& note,
                                                         const schema::TaskType& task) const = 0;
    virtual ToolMetadata metadata() const = 0;
};

struct Lexicons {
    std::vector<std::string> given_names;
    std::vector<std::string> family_names;
    std::vector<std::string> locations;
};

Lexicons load_lexicons(const std::filesystem::path& data_dir);

// Deterministic rule-based annotator. Rule classes carry fixed confidences:
// 95.5 for regex patterns, 90.0 for lexicon matches, 85.0 for context years.
// Within one task the longest non-overlapping match wins; earlier rules break
// ties at equal span.
class ReferenceAnnotator : public Annotator {
  public:
    explicit ReferenceAnnotator(Lexicons lexicons);

    std::vector<schema::TextAnnotation> annotate(const schema::ClinicalNote& note,
                                                 const schema::TaskType& task) const override;
    ToolMetadata metadata() const override;

  private:
    Lexicons lexicons_;
};

// Test fixture tool: serves a bundle's gold annotations verbatim, optionally
// perturbed at construction time or slowed down per request.
class GoldEchoAnnotator : public Annotator {
  public:
    struct Options {
        std::optional<corpus::PerturbMode> perturb;
        double perturb_rate = 0.0;
        std::uint64_t perturb_seed = 0;
        std::chrono::milliseconds delay_per_note{0};
    };

    GoldEchoAnnotator(const schema::DatasetBundle& bundle, const schema::TaskRegistry& registry);
    GoldEchoAnnotator(const schema::DatasetBundle& bundle, const schema::TaskRegistry& registry,
                      Options options);

    std::vector<schema::TextAnnotation> annotate(const schema::ClinicalNote& note,
                                                 const schema::TaskType& task) const override;
    ToolMetadata metadata() const override;

  private:
    // category -> note id -> annotations, fixed at construction
    std::map<std::string, std::map<std::string, std::vector<schema::TextAnnotation>>> served_;
    Options options_;
};

}  // namespace sandbox::tool
