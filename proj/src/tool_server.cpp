#include "sandbox/tool_server.hpp"

#include <atomic>
#include <sstream>
#include <thread>

#include "http_common.hpp"
#include "sandbox/validation.hpp"

namespace sandbox::tool {

namespace {

using nlohmann::json;

std::string api_docs(const schema::TaskRegistry& registry) {
    std::ostringstream out;
    out << "<!DOCTYPE html><html><head><title>Annotation Tool API</title></head><body>"
        << "<h1>Annotation Tool API</h1>"
        << "<p>JSON over HTTP, base path <code>/api/v1</code>.</p><ul>"
        << "<li><code>GET /api/v1/tool</code>: tool metadata</li>";
    for (const auto& task : registry.all()) {
        out << "<li><code>POST /api/v1/" << task.response_key()
            << "</code>: body <code>{\"note\": {identifier, patientId, text, type}}</code>, "
            << "returns <code>{\"" << task.response_key() << "\": [...]}</code></li>";
    }
    out << "</ul><p>Spans are code-point offsets into the note text.</p></body></html>";
    return out.str();
}

}  // namespace

struct ToolServer::Impl {
    std::shared_ptr<const Annotator> annotator;
    const schema::TaskRegistry& registry;
    httplib::Server server;
    std::thread thread;
    std::atomic<int> bound_port{0};

    Impl(std::shared_ptr<const Annotator> a, const schema::TaskRegistry& r)
        : annotator(std::move(a)), registry(r) {}

    void route() {
        server.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_redirect("/api/v1/tool");
        });
        server.Get("/api", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(api_docs(registry), "text/html");
        });
        server.Get("/api/v1/tool", [this](const httplib::Request&, httplib::Response& res) {
            http::send_json(res, 200, metadata_to_json(annotator->metadata()));
        });
        server.Post(R"(/api/v1/(\w+))", [this](const httplib::Request& req,
                                               httplib::Response& res) {
            const std::string key = req.matches[1];
            std::optional<schema::TaskType> task;
            for (const auto& t : registry.all()) {
                if (t.response_key() == key) {
                    task = t;
                    break;
                }
            }
            if (!task) {
                http::send_problem(res, 404, "Not Found", "unknown annotation task: " + key);
                return;
            }
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object() || !body.contains("note")) {
                http::send_problem(res, 400, "Bad Request",
                                   "request body must be a JSON object with a 'note' field");
                return;
            }
            try {
                auto note = schema::note_from_json(body["note"]);
                auto valid = schema::validate_note(note);
                if (!valid.ok()) {
                    http::send_problem(res, 400, "Bad Request", valid.joined());
                    return;
                }
                json list = json::array();
                for (const auto& ann : annotator->annotate(note, *task)) {
                    list.push_back(schema::annotation_to_json_without_note_id(ann));
                }
                http::send_json(res, 200, json{{key, std::move(list)}});
            } catch (const schema::WireError& e) {
                http::send_problem(res, 400, "Bad Request", e.what());
            }
        });
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty()) {
                http::send_problem(res, res.status, "Not Found",
                                   "no resource at " + req.path);
            }
        });
    }
};

ToolServer::ToolServer(std::shared_ptr<const Annotator> annotator,
                       const schema::TaskRegistry& registry)
    : impl_(std::make_unique<Impl>(std::move(annotator), registry)) {
    impl_->route();
}

ToolServer::~ToolServer() { stop(); }

int ToolServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) {
            throw std::runtime_error("tool server: cannot bind to " + host);
        }
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("tool server: cannot bind to " + host + ":" +
                                 std::to_string(port));
    }
    impl_->bound_port = bound;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ToolServer::stop() {
    if (impl_ && impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int ToolServer::port() const { return impl_->bound_port; }

}  // namespace sandbox::tool
