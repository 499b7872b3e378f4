#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "sandbox/metrics.hpp"
#include "sandbox/node_client.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/tool_client.hpp"

namespace sandbox::evalrun {

struct StageParams {
    schema::NoteStoreRef note_store;
    schema::AnnotationStoreRef gold_ref;
    std::chrono::milliseconds wall_clock{60000};
    std::chrono::milliseconds per_note_timeout{30000};
};

struct StageOutcome {
    bool ok = false;
    std::string failure;  // "budget exceeded", "site unavailable", ...
    metrics::CategoryReport report;
    std::uint64_t protocol_violation_count = 0;
    // first violations in note order, capped; the only place span positions
    // appear, so callers decide whether they may leave the site
    std::vector<std::string> protocol_violations;
    metrics::InstanceDiff diff;
    std::uint64_t notes_evaluated = 0;
};

inline constexpr std::size_t kMaxReportedViolations = 5;

// Pages every note from the site's store, annotates each through the tool
// with a per-note deadline, checks the stage wall clock between notes, then
// scores predictions against the site's gold store. Any protocol violation
// fails the stage; scoring only happens on a clean run.
StageOutcome run_stage(node::NodeClient& node, tool::ToolClient& tool_client,
                       const schema::TaskType& task, const StageParams& params);

}  // namespace sandbox::evalrun
