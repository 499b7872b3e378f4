#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sandbox/node_store.hpp"

namespace sandbox::node {

// HTTP front end for a NodeStore, base path /api/v1. Errors use the uniform
// {status, title, detail} body.
class NodeService {
  public:
    explicit NodeService(NodeStore& store);
    ~NodeService();

    NodeService(const NodeService&) = delete;
    NodeService& operator=(const NodeService&) = delete;

    int start(const std::string& host, int port);  // port 0 = ephemeral
    void stop();
    int port() const;

    // Total requests served; lets tests assert a site was never contacted.
    std::uint64_t request_count() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sandbox::node
