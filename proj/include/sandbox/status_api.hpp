#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sandbox/orchestrator.hpp"

namespace sandbox::orch {

// Read-only HTTP view over an orchestrator: submission status, diagnostics,
// and the leaderboard. Span-level diagnostics are only served for the TEST
// site; federated spans are refused with 403.
class StatusApi {
  public:
    explicit StatusApi(const Orchestrator& orchestrator);
    ~StatusApi();

    StatusApi(const StatusApi&) = delete;
    StatusApi& operator=(const StatusApi&) = delete;

    int start(const std::string& host, int port);
    void stop();
    int port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sandbox::orch
