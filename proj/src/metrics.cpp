#include "sandbox/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sandbox/utf8.hpp"

namespace sandbox::metrics {

using schema::TextAnnotation;

namespace {

bool is_token_char(char32_t cp) {
    if (cp < 128) {
        return (cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z');
    }
    return true;
}

void require_single_category(std::span<const TextAnnotation> anns, const std::string* expected) {
    const std::string* category = expected;
    for (const auto& ann : anns) {
        if (!category) {
            category = &ann.category;
        } else if (ann.category != *category) {
            throw std::invalid_argument("mixed categories in matcher input: '" + ann.category +
                                        "' vs '" + *category + "'");
        }
    }
}

struct SpanKey {
    std::string note_id;
    std::uint32_t start;
    std::uint32_t length;

    bool operator==(const SpanKey&) const = default;
    auto operator<=>(const SpanKey&) const = default;
};

SpanKey key_of(const TextAnnotation& ann) { return {ann.note_id, ann.start, ann.length}; }

std::set<TokenSpan> token_set(std::span<const TextAnnotation> anns) {
    std::set<TokenSpan> tokens;
    for (const auto& ann : anns) {
        for (auto& tok : tokenize_annotation(ann)) tokens.insert(std::move(tok));
    }
    return tokens;
}

}  // namespace

std::vector<TokenSpan> tokenize_annotation(const TextAnnotation& ann) {
    std::vector<TokenSpan> tokens;
    const auto cps = utf8::decode(ann.text);
    std::size_t i = 0;
    while (i < cps.size()) {
        if (!is_token_char(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < cps.size() && is_token_char(cps[j])) ++j;
        tokens.push_back({ann.note_id, ann.start + static_cast<std::uint32_t>(i),
                          static_cast<std::uint32_t>(j - i)});
        i = j;
    }
    return tokens;
}

MatchCounts match_instances(std::span<const TextAnnotation> gold,
                            std::span<const TextAnnotation> pred) {
    require_single_category(gold, nullptr);
    require_single_category(pred, gold.empty() ? nullptr : &gold.front().category);

    std::map<SpanKey, bool> gold_matched;  // key -> already claimed by a prediction
    for (const auto& g : gold) {
        if (!gold_matched.emplace(key_of(g), false).second) {
            throw std::invalid_argument("exact duplicate in gold input");
        }
    }

    MatchCounts counts;
    for (const auto& p : pred) {
        auto it = gold_matched.find(key_of(p));
        if (it != gold_matched.end() && !it->second) {
            it->second = true;
            ++counts.tp;
        } else {
            ++counts.fp;
        }
    }
    counts.fn = gold.size() - counts.tp;
    return counts;
}

InstanceDiff instance_diff(std::span<const TextAnnotation> gold,
                           std::span<const TextAnnotation> pred) {
    std::map<SpanKey, bool> gold_matched;
    for (const auto& g : gold) gold_matched.emplace(key_of(g), false);

    InstanceDiff diff;
    for (const auto& p : pred) {
        auto it = gold_matched.find(key_of(p));
        if (it != gold_matched.end() && !it->second) {
            it->second = true;
        } else {
            diff.false_positives.push_back(p);
        }
    }
    for (const auto& g : gold) {
        if (!gold_matched.at(key_of(g))) diff.false_negatives.push_back(g);
    }
    return diff;
}

MatchCounts match_tokens(std::span<const TextAnnotation> gold,
                         std::span<const TextAnnotation> pred) {
    require_single_category(gold, nullptr);
    require_single_category(pred, gold.empty() ? nullptr : &gold.front().category);

    const auto gold_tokens = token_set(gold);
    const auto pred_tokens = token_set(pred);

    MatchCounts counts;
    for (const auto& t : pred_tokens) {
        if (gold_tokens.count(t)) {
            ++counts.tp;
        } else {
            ++counts.fp;
        }
    }
    counts.fn = gold_tokens.size() - counts.tp;
    return counts;
}

Metrics compute_prf(const MatchCounts& counts) {
    Metrics m;
    const std::uint64_t pred_total = counts.tp + counts.fp;
    const std::uint64_t gold_total = counts.tp + counts.fn;
    m.precision = pred_total == 0 ? 0.0 : static_cast<double>(counts.tp) / pred_total;
    m.recall = gold_total == 0 ? 0.0 : static_cast<double>(counts.tp) / gold_total;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                          : 0.0;
    m.no_data = pred_total == 0 && gold_total == 0;
    return m;
}

CategoryReport evaluate_category(std::span<const TextAnnotation> gold,
                                 std::span<const TextAnnotation> pred,
                                 const schema::TaskType& task) {
    for (const auto& g : gold) {
        if (g.category != task.name()) {
            throw std::invalid_argument("gold annotation of category '" + g.category +
                                        "' passed to evaluation of '" + task.name() + "'");
        }
    }
    for (const auto& p : pred) {
        if (p.category != task.name()) {
            throw std::invalid_argument("prediction of category '" + p.category +
                                        "' passed to evaluation of '" + task.name() + "'");
        }
    }

    CategoryReport report;
    report.category = task.name();
    report.instance.counts = match_instances(gold, pred);
    report.instance.metrics = compute_prf(report.instance.counts);
    report.token.counts = match_tokens(gold, pred);
    report.token.metrics = compute_prf(report.token.counts);
    return report;
}

namespace {

nlohmann::json level_to_json(const LevelReport& level) {
    nlohmann::json j{{"precision", level.metrics.precision},
                     {"recall", level.metrics.recall},
                     {"f1", level.metrics.f1},
                     {"tp", level.counts.tp},
                     {"fp", level.counts.fp},
                     {"fn", level.counts.fn}};
    if (level.metrics.no_data) j["noData"] = true;
    return j;
}

LevelReport level_from_json(const nlohmann::json& j) {
    LevelReport level;
    level.metrics.precision = j.at("precision").get<double>();
    level.metrics.recall = j.at("recall").get<double>();
    level.metrics.f1 = j.at("f1").get<double>();
    level.metrics.no_data = j.value("noData", false);
    level.counts.tp = j.at("tp").get<std::uint64_t>();
    level.counts.fp = j.at("fp").get<std::uint64_t>();
    level.counts.fn = j.at("fn").get<std::uint64_t>();
    return level;
}

}  // namespace

nlohmann::json report_to_json(const CategoryReport& report) {
    return nlohmann::json{{"category", report.category},
                          {"instance", level_to_json(report.instance)},
                          {"token", level_to_json(report.token)}};
}

CategoryReport report_from_json(const nlohmann::json& j) {
    CategoryReport report;
    report.category = j.at("category").get<std::string>();
    report.instance = level_from_json(j.at("instance"));
    report.token = level_from_json(j.at("token"));
    return report;
}

std::string format_report_table(const std::vector<CategoryReport>& reports) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s %-9s %6s %6s %6s %8s %8s %8s\n", "category", "level",
                  "P", "R", "F1", "tp", "fp", "fn");
    out << buf;
    for (const auto& r : reports) {
        const auto row = [&](const char* level, const LevelReport& lr) {
            std::snprintf(buf, sizeof(buf), "%-14s %-9s %6.2f %6.2f %6.2f %8llu %8llu %8llu%s\n",
                          r.category.c_str(), level, lr.metrics.precision, lr.metrics.recall,
                          lr.metrics.f1, static_cast<unsigned long long>(lr.counts.tp),
                          static_cast<unsigned long long>(lr.counts.fp),
                          static_cast<unsigned long long>(lr.counts.fn),
                          lr.metrics.no_data ? "  (no data)" : "");
            out << buf;
        };
        row("instance", r.instance);
        row("token", r.token);
    }
    return out.str();
}

}  // namespace sandbox::metrics
