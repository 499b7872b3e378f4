#include "sandbox/eval_run.hpp"

#include <algorithm>

#include "sandbox/validation.hpp"

namespace sandbox::evalrun {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds remaining(Clock::time_point deadline) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
}

}  // namespace

StageOutcome run_stage(node::NodeClient& node, tool::ToolClient& tool_client,
                       const schema::TaskType& task, const StageParams& params) {
    StageOutcome outcome;
    const auto deadline = Clock::now() + params.wall_clock;

    auto violation = [&outcome](const std::string& detail) {
        ++outcome.protocol_violation_count;
        if (outcome.protocol_violations.size() < kMaxReportedViolations) {
            outcome.protocol_violations.push_back(detail);
        }
    };

    std::vector<schema::TextAnnotation> gold;
    std::vector<schema::TextAnnotation> predictions;
    try {
        auto store = node.get_annotation_store(params.gold_ref);
        if (store.category != task.name()) {
            outcome.failure = "gold store '" + params.gold_ref.annotation_store_id +
                              "' holds category " + store.category + ", not " + task.name();
            return outcome;
        }
        for (auto& stored : node.list_all_annotations(params.gold_ref)) {
            gold.push_back(std::move(stored.body));
        }

        std::uint64_t offset = 0;
        while (true) {
            auto page = node.list_notes(params.note_store, offset, 100);
            for (const auto& note : page.items) {
                if (remaining(deadline).count() <= 0) {
                    outcome.failure = "budget exceeded";
                    return outcome;
                }
                tool_client.set_read_timeout(
                    std::min(params.per_note_timeout, remaining(deadline)));
                try {
                    auto annotations = tool_client.annotate(note, task);
                    for (auto& ann : annotations) {
                        auto valid = schema::validate_annotation(ann, note);
                        if (!valid.ok()) {
                            violation("note " + note.identifier + ": " + valid.joined());
                            continue;
                        }
                        predictions.push_back(std::move(ann));
                    }
                } catch (const tool::ToolError& e) {
                    switch (e.kind()) {
                        case tool::ToolError::Kind::Timeout:
                            outcome.failure = "budget exceeded";
                            return outcome;
                        case tool::ToolError::Kind::Network:
                            outcome.failure = "tool unavailable";
                            return outcome;
                        case tool::ToolError::Kind::Protocol:
                            violation("note " + note.identifier + ": " + e.what());
                            break;
                    }
                }
                ++outcome.notes_evaluated;
            }
            offset += page.items.size();
            if (offset >= page.total_count || page.items.empty()) {
                break;
            }
        }
    } catch (const node::NodeError& e) {
        outcome.failure =
            e.status() == 0 ? "site unavailable" : std::string("data node error: ") + e.what();
        return outcome;
    }

    if (outcome.protocol_violation_count > 0) {
        outcome.failure = "tool protocol error";
        return outcome;
    }

    try {
        outcome.report = metrics::evaluate_category(gold, predictions, task);
        outcome.diff = metrics::instance_diff(gold, predictions);
    } catch (const std::invalid_argument& e) {
        outcome.failure = std::string("invalid gold data: ") + e.what();
        return outcome;
    }
    outcome.ok = true;
    return outcome;
}

}  // namespace sandbox::evalrun
