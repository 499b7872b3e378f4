#pragma once

#include <memory>
#include <string>

#include "sandbox/annotator.hpp"
#include "sandbox/tasks.hpp"

namespace sandbox::tool {

// HTTP front end for an Annotator. One process serves every registered task:
// POST /api/v1/text<Task>Annotations with {"note": {...}} returns
// {"text<Task>Annotations": [...]}; GET /api/v1/tool returns metadata;
// GET / redirects to the metadata resource; GET /api serves the API docs.
class ToolServer {
  public:
    ToolServer(std::shared_ptr<const Annotator> annotator, const schema::TaskRegistry& registry);
    ~ToolServer();

    ToolServer(const ToolServer&) = delete;
    ToolServer& operator=(const ToolServer&) = delete;

    // Binds (port 0 picks an ephemeral port) and serves on a background
    // thread; returns the bound port.
    int start(const std::string& host, int port);
    void stop();
    int port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sandbox::tool
