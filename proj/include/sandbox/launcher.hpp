#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sandbox::launch {

// A launchable tool: either a local command to spawn or an already-running
// HTTP endpoint.
struct ToolRef {
    enum class Kind { Subprocess, Endpoint };
    Kind kind = Kind::Subprocess;
    std::vector<std::string> command;  // argv, Subprocess only
    std::string endpoint;              // "host:port", Endpoint only

    bool operator==(const ToolRef&) const = default;
};

nlohmann::json tool_ref_to_json(const ToolRef& ref);
ToolRef tool_ref_from_json(const nlohmann::json& j);

class LaunchError : public std::runtime_error {
  public:
    explicit LaunchError(const std::string& what) : std::runtime_error(what) {}
};

class LaunchedTool {
  public:
    virtual ~LaunchedTool() = default;
    virtual const std::string& endpoint() const = 0;
    virtual void shutdown() = 0;  // idempotent
    virtual std::string log_text() const = 0;
};

// Resource caps recorded per launch. The subprocess adapter enforces startup
// and teardown deadlines; memory/cpu figures are configuration handed to the
// adapter (portable rlimit-style enforcement is out of scope) and the total
// wall-clock budget is enforced by the caller.
struct LaunchLimits {
    std::chrono::milliseconds startup_timeout{15000};
    std::chrono::milliseconds shutdown_grace{3000};
    std::uint64_t memory_bytes = 7ULL * 1024 * 1024 * 1024;
    int cpu_count = 4;
};

class Launcher {
  public:
    virtual ~Launcher() = default;

    // Starts (or wraps) the tool and waits until it is addressable. Captured
    // output goes to log_file; adapters that spawn nothing leave it empty.
    virtual std::unique_ptr<LaunchedTool> launch(const ToolRef& ref,
                                                 const std::filesystem::path& log_file) = 0;
};

// Spawns a local process bound to the loopback interface. Environment
// contract passed to the child:
//   SANDBOX_LISTEN=127.0.0.1:0   bind this address, ephemeral port
//   SANDBOX_PORT_FILE=<path>     write the bound port here once listening
//   SANDBOX_OFFLINE=1            must not contact any remote server
// stdout and stderr are redirected to log_file.
class SubprocessLauncher : public Launcher {
  public:
    explicit SubprocessLauncher(LaunchLimits limits = {});
    std::unique_ptr<LaunchedTool> launch(const ToolRef& ref,
                                         const std::filesystem::path& log_file) override;

  private:
    LaunchLimits limits_;
};

// Wraps a tool that is already running; shutdown and logs are no-ops.
class EndpointLauncher : public Launcher {
  public:
    std::unique_ptr<LaunchedTool> launch(const ToolRef& ref,
                                         const std::filesystem::path& log_file) override;
};

// Dispatches on ToolRef::Kind to the two adapters above.
class StandardLauncher : public Launcher {
  public:
    explicit StandardLauncher(LaunchLimits limits = {});
    std::unique_ptr<LaunchedTool> launch(const ToolRef& ref,
                                         const std::filesystem::path& log_file) override;

  private:
    SubprocessLauncher subprocess_;
    EndpointLauncher endpoint_;
};

}  // namespace sandbox::launch
