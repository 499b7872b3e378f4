#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::metrics {

struct TokenSpan {
    std::string note_id;
    std::uint32_t start = 0;   // absolute, code points
    std::uint32_t length = 0;  // code points

    auto operator<=>(const TokenSpan&) const = default;
};

struct MatchCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    bool operator==(const MatchCounts&) const = default;
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool no_data = false;  // gold and predictions both empty

    bool operator==(const Metrics&) const = default;
};

struct LevelReport {
    Metrics metrics;
    MatchCounts counts;

    bool operator==(const LevelReport&) const = default;
};

struct CategoryReport {
    std::string category;
    LevelReport instance;
    LevelReport token;

    bool operator==(const CategoryReport&) const = default;
};

// Instance-level FP/FN span lists; only ever exposed for the public test
// site's diagnostics.
struct InstanceDiff {
    std::vector<schema::TextAnnotation> false_positives;
    std::vector<schema::TextAnnotation> false_negatives;
};

// Maximal runs of alphanumeric code points in ann.text, at absolute
// code-point offsets. A code point counts as alphanumeric when it is an
// ASCII letter/digit or any non-ASCII code point.
std::vector<TokenSpan> tokenize_annotation(const schema::TextAnnotation& ann);

// Exact (noteId, start, length) matching: each gold matches at most one
// prediction; surplus predictions (duplicates, partial overlaps) are FPs.
// Gold must be free of exact duplicates; all inputs one category.
MatchCounts match_instances(std::span<const schema::TextAnnotation> gold,
                            std::span<const schema::TextAnnotation> pred);

InstanceDiff instance_diff(std::span<const schema::TextAnnotation> gold,
                           std::span<const schema::TextAnnotation> pred);

// Both sides expanded to deduplicated token-position sets, then set
// arithmetic.
MatchCounts match_tokens(std::span<const schema::TextAnnotation> gold,
                         std::span<const schema::TextAnnotation> pred);

// precision = tp/(tp+fp), recall = tp/(tp+fn), 0 on zero denominators;
// f1 = 2PR/(P+R) or 0. tp=fp=fn=0 is flagged no_data.
Metrics compute_prf(const MatchCounts& counts);

// Micro-averaged over the whole corpus at both levels. Inputs must already
// be filtered to `task` (mixed categories are a contract violation) and the
// gold list must be duplicate-free.
CategoryReport evaluate_category(std::span<const schema::TextAnnotation> gold,
                                 std::span<const schema::TextAnnotation> pred,
                                 const schema::TaskType& task);

nlohmann::json report_to_json(const CategoryReport& report);
CategoryReport report_from_json(const nlohmann::json& j);

// Two-decimal P/R/F1 rows for terminal output.
std::string format_report_table(const std::vector<CategoryReport>& reports);

}  // namespace sandbox::metrics
