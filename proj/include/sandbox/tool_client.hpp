#pragma once

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sandbox/annotator.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"

namespace sandbox::tool {

class ToolError : public std::runtime_error {
  public:
    // Timeout covers per-request read deadlines (the tool took too long);
    // Network covers unreachable/closed connections; Protocol covers any
    // response that violates the annotation API contract.
    enum class Kind { Network, Timeout, Protocol };

    ToolError(Kind kind, const std::string& detail) : std::runtime_error(detail), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

class ToolClient {
  public:
    explicit ToolClient(const std::string& endpoint);  // "host:port"
    ~ToolClient();

    ToolClient(const ToolClient&) = delete;
    ToolClient& operator=(const ToolClient&) = delete;

    // Applies to subsequent requests; not thread-safe against in-flight calls.
    void set_read_timeout(std::chrono::milliseconds timeout);

    ToolMetadata fetch_metadata();
    std::vector<schema::TextAnnotation> annotate(const schema::ClinicalNote& note,
                                                 const schema::TaskType& task);

    // Raw access for the contract check.
    struct RawResponse {
        int status = 0;
        std::string body;
        std::string location;  // Location header when present
    };
    RawResponse get(const std::string& path);
    RawResponse post_json(const std::string& path, const std::string& body);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sandbox::tool
