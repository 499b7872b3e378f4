#include "sandbox/status_api.hpp"

#include <thread>

#include "http_common.hpp"

namespace sandbox::orch {

namespace {

using nlohmann::json;

int status_for(OrchestratorError::Kind kind) {
    switch (kind) {
        case OrchestratorError::Kind::NotFound: return 404;
        case OrchestratorError::Kind::Invalid: return 400;
        case OrchestratorError::Kind::Policy: return 403;
    }
    return 500;
}

const char* title_for(int status) {
    switch (status) {
        case 400: return "Bad Request";
        case 403: return "Forbidden";
        case 404: return "Not Found";
        default: return "Internal Server Error";
    }
}

void guard(httplib::Response& res, const std::function<void()>& body) {
    try {
        body();
    } catch (const OrchestratorError& e) {
        const int status = status_for(e.kind());
        http::send_problem(res, status, title_for(status), e.what());
    } catch (const std::exception& e) {
        http::send_problem(res, 500, "Internal Server Error", e.what());
    }
}

}  // namespace

struct StatusApi::Impl {
    explicit Impl(const Orchestrator& orchestrator) : orchestrator(orchestrator) {}

    const Orchestrator& orchestrator;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;
};

StatusApi::StatusApi(const Orchestrator& orchestrator)
    : impl_(std::make_unique<Impl>(orchestrator)) {
    auto& server = impl_->server;
    const Orchestrator& orch = impl_->orchestrator;

    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_redirect("/api/v1/service");
    });

    server.Get("/api/v1/service", [](const httplib::Request&, httplib::Response& res) {
        http::send_json(res, 200,
                              json{{"name", "sandbox-orchestrator"},
                                   {"version", "1.0.0"},
                                   {"apiBasePath", "/api/v1"}});
    });

    server.Get("/api/v1/submissions", [&orch](const httplib::Request&, httplib::Response& res) {
        guard(res, [&] {
            json items = json::array();
            for (const auto& sub : orch.list_submissions()) {
                items.push_back(submission_to_json(sub));
            }
            http::send_json(res, 200, json{{"items", items}});
        });
    });

    server.Get(R"(/api/v1/submissions/([^/]+))",
               [&orch](const httplib::Request& req, httplib::Response& res) {
                   guard(res, [&] {
                       http::send_json(
                           res, 200, submission_to_json(orch.get_submission(req.matches[1])));
                   });
               });

    server.Get(R"(/api/v1/submissions/([^/]+)/diagnostics)",
               [&orch](const httplib::Request& req, httplib::Response& res) {
                   guard(res, [&] {
                       const bool include_spans =
                           http::query_param(req, "includeSpans") == "true";
                       http::send_json(res, 200,
                                             orch.diagnostics(req.matches[1], include_spans));
                   });
               });

    server.Get(R"(/api/v1/submissions/([^/]+)/sites/([^/]+)/spans)",
               [&orch](const httplib::Request& req, httplib::Response& res) {
                   guard(res, [&] {
                       http::send_json(res, 200,
                                             orch.site_spans(req.matches[1], req.matches[2]));
                   });
               });

    server.Get("/api/v1/leaderboard", [&orch](const httplib::Request& req,
                                              httplib::Response& res) {
        guard(res, [&] {
            const std::string queue = http::query_param(req, "queue");
            std::uint64_t offset = 0;
            std::uint64_t limit = 100;
            const std::string offset_str = http::query_param(req, "offset");
            const std::string limit_str = http::query_param(req, "limit");
            try {
                if (!offset_str.empty()) offset = std::stoull(offset_str);
                if (!limit_str.empty()) limit = std::stoull(limit_str);
            } catch (const std::exception&) {
                throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                        "offset and limit must be non-negative integers");
            }
            if (limit < 1 || limit > 1000) {
                throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                        "limit must be between 1 and 1000");
            }
            LeaderboardPage page = orch.leaderboard(queue, offset, limit);
            json items = json::array();
            for (const auto& record : page.items) {
                items.push_back(leaderboard_record_to_json(record));
            }
            http::send_json(res, 200,
                                  json{{"items", items},
                                       {"offset", page.offset},
                                       {"limit", page.limit},
                                       {"totalCount", page.total_count}});
        });
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty() && res.status >= 400) {
            http::send_problem(res, res.status, title_for(res.status),
                                     "no resource matches the request");
        }
    });
}

StatusApi::~StatusApi() { stop(); }

int StatusApi::start(const std::string& host, int port) {
    auto& impl = *impl_;
    if (port == 0) {
        impl.bound_port = impl.server.bind_to_any_port(host);
        if (impl.bound_port < 0) {
            throw std::runtime_error("cannot bind status api on " + host);
        }
    } else {
        if (!impl.server.bind_to_port(host, port)) {
            throw std::runtime_error("cannot bind status api on " + host + ":" +
                                     std::to_string(port));
        }
        impl.bound_port = port;
    }
    impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
    return impl.bound_port;
}

void StatusApi::stop() {
    auto& impl = *impl_;
    if (impl.thread.joinable()) {
        impl.server.stop();
        impl.thread.join();
    }
}

int StatusApi::port() const { return impl_->bound_port; }

}  // namespace sandbox::orch
