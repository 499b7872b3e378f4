#include "sandbox/launcher.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

extern char** environ;

namespace sandbox::launch {

namespace {

using nlohmann::json;

class SubprocessTool : public LaunchedTool {
  public:
    SubprocessTool(pid_t pid, std::string endpoint, std::filesystem::path log_file,
                   std::chrono::milliseconds shutdown_grace)
        : pid_(pid),
          endpoint_(std::move(endpoint)),
          log_file_(std::move(log_file)),
          shutdown_grace_(shutdown_grace) {}

    ~SubprocessTool() override { shutdown(); }

    const std::string& endpoint() const override { return endpoint_; }

    void shutdown() override {
        if (pid_ <= 0) {
            return;
        }
        kill(-pid_, SIGTERM);
        auto deadline = std::chrono::steady_clock::now() + shutdown_grace_;
        int status = 0;
        while (std::chrono::steady_clock::now() < deadline) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        kill(-pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }

    std::string log_text() const override {
        std::ifstream in(log_file_, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    }

  private:
    pid_t pid_;
    std::string endpoint_;
    std::filesystem::path log_file_;
    std::chrono::milliseconds shutdown_grace_;
};

class EndpointTool : public LaunchedTool {
  public:
    explicit EndpointTool(std::string endpoint) : endpoint_(std::move(endpoint)) {}
    const std::string& endpoint() const override { return endpoint_; }
    void shutdown() override {}
    std::string log_text() const override { return {}; }

  private:
    std::string endpoint_;
};

bool process_alive(pid_t pid) {
    int status = 0;
    return waitpid(pid, &status, WNOHANG) == 0;
}

}  // namespace

json tool_ref_to_json(const ToolRef& ref) {
    if (ref.kind == ToolRef::Kind::Subprocess) {
        return json{{"kind", "subprocess"}, {"command", ref.command}};
    }
    return json{{"kind", "endpoint"}, {"endpoint", ref.endpoint}};
}

ToolRef tool_ref_from_json(const json& j) {
    ToolRef ref;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "subprocess") {
        ref.kind = ToolRef::Kind::Subprocess;
        ref.command = j.at("command").get<std::vector<std::string>>();
        if (ref.command.empty()) {
            throw LaunchError("subprocess tool reference needs a non-empty command");
        }
    } else if (kind == "endpoint") {
        ref.kind = ToolRef::Kind::Endpoint;
        ref.endpoint = j.at("endpoint").get<std::string>();
        if (ref.endpoint.empty()) {
            throw LaunchError("endpoint tool reference needs an endpoint");
        }
    } else {
        throw LaunchError("unknown tool reference kind: " + kind);
    }
    return ref;
}

SubprocessLauncher::SubprocessLauncher(LaunchLimits limits) : limits_(limits) {}

std::unique_ptr<LaunchedTool> SubprocessLauncher::launch(const ToolRef& ref,
                                                         const std::filesystem::path& log_file) {
    if (ref.kind != ToolRef::Kind::Subprocess || ref.command.empty()) {
        throw LaunchError("subprocess launcher needs a command tool reference");
    }
    std::filesystem::create_directories(log_file.parent_path());
    auto port_file = log_file;
    port_file += ".port";
    std::error_code ec;
    std::filesystem::remove(port_file, ec);

    // argv/envp are prepared before fork; the child only calls async-signal-
    // safe functions between fork and execve.
    std::vector<std::string> env_strings;
    for (char** e = environ; *e; ++e) {
        std::string_view entry(*e);
        if (entry.rfind("SANDBOX_LISTEN=", 0) == 0 || entry.rfind("SANDBOX_PORT_FILE=", 0) == 0 ||
            entry.rfind("SANDBOX_OFFLINE=", 0) == 0) {
            continue;
        }
        env_strings.emplace_back(entry);
    }
    env_strings.push_back("SANDBOX_LISTEN=127.0.0.1:0");
    env_strings.push_back("SANDBOX_PORT_FILE=" + port_file.string());
    env_strings.push_back("SANDBOX_OFFLINE=1");

    std::vector<char*> argv;
    for (const auto& arg : ref.command) {
        argv.push_back(const_cast<char*>(arg.c_str()));
    }
    argv.push_back(nullptr);
    std::vector<char*> envp;
    for (const auto& entry : env_strings) {
        envp.push_back(const_cast<char*>(entry.c_str()));
    }
    envp.push_back(nullptr);

    int log_fd = ::open(log_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (log_fd < 0) {
        throw LaunchError("cannot open tool log file: " + log_file.string());
    }

    pid_t pid = fork();
    if (pid < 0) {
        ::close(log_fd);
        throw LaunchError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(log_fd, STDOUT_FILENO);
        dup2(log_fd, STDERR_FILENO);
        ::close(log_fd);
        execvpe(argv[0], argv.data(), envp.data());
        // exec failed; report on the redirected stderr and bail
        const char* msg = "tool exec failed\n";
        ssize_t ignored = write(STDERR_FILENO, msg, std::strlen(msg));
        (void)ignored;
        _exit(127);
    }
    ::close(log_fd);

    // Handshake: the tool writes its bound port to SANDBOX_PORT_FILE once it
    // is listening.
    auto deadline = std::chrono::steady_clock::now() + limits_.startup_timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        std::ifstream in(port_file);
        int port = 0;
        if (in >> port && port > 0) {
            return std::make_unique<SubprocessTool>(pid, "127.0.0.1:" + std::to_string(port),
                                                    log_file, limits_.shutdown_grace);
        }
        if (!process_alive(pid)) {
            std::ifstream log(log_file);
            std::ostringstream text;
            text << log.rdbuf();
            throw LaunchError("tool exited before becoming ready: " + text.str());
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    kill(-pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    throw LaunchError("tool did not become ready within startup timeout");
}

std::unique_ptr<LaunchedTool> EndpointLauncher::launch(const ToolRef& ref,
                                                       const std::filesystem::path&) {
    if (ref.kind != ToolRef::Kind::Endpoint || ref.endpoint.empty()) {
        throw LaunchError("endpoint launcher needs an endpoint tool reference");
    }
    return std::make_unique<EndpointTool>(ref.endpoint);
}

StandardLauncher::StandardLauncher(LaunchLimits limits) : subprocess_(limits) {}

std::unique_ptr<LaunchedTool> StandardLauncher::launch(const ToolRef& ref,
                                                       const std::filesystem::path& log_file) {
    if (ref.kind == ToolRef::Kind::Subprocess) {
        return subprocess_.launch(ref, log_file);
    }
    return endpoint_.launch(ref, log_file);
}

}  // namespace sandbox::launch
