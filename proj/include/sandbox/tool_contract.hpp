#pragma once

#include <string>
#include <vector>

#include "sandbox/tasks.hpp"
#include "sandbox/tool_client.hpp"

namespace sandbox::tool {

struct ContractReport {
    bool ok = false;
    std::vector<std::string> failures;
};

// Verifies the tool API contract against a live endpoint:
//   - GET / redirects to the tool metadata resource
//   - GET /api serves human-readable API docs
//   - GET /api/v1/tool returns well-formed metadata
//   - three fixed probe notes annotated twice each return byte-identical,
//     valid responses (reproducibility)
// The caller launches the tool first; when that launcher sets the offline
// environment, a passing probe also demonstrates the tool answers without
// remote connectivity.
ContractReport tool_contract_check(ToolClient& client, const schema::TaskType& task);

}  // namespace sandbox::tool
