#pragma once

#include <string>
#include <vector>

#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::schema {

class ValidationResult {
  public:
    bool ok() const { return violations_.empty(); }
    const std::vector<std::string>& violations() const { return violations_; }

    void add(std::string violation) { violations_.push_back(std::move(violation)); }
    void merge(const ValidationResult& other) {
        violations_.insert(violations_.end(), other.violations_.begin(), other.violations_.end());
    }
    std::string joined() const;

  private:
    std::vector<std::string> violations_;
};

ValidationResult validate_note(const ClinicalNote& note);

// Checks every annotation invariant against the note and reports all
// violations, not just the first. A noteId mismatch is its own violation.
ValidationResult validate_annotation(const TextAnnotation& ann, const ClinicalNote& note);

// Structural checks that need no note text: length >= 1, confidence range.
// Used by the data node when the referenced note is not resident.
ValidationResult validate_annotation_shape(const TextAnnotation& ann);

ValidationResult validate_bundle(const DatasetBundle& bundle, const TaskRegistry& registry);

}  // namespace sandbox::schema
