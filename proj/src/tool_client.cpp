#include "sandbox/tool_client.hpp"

#include "http_common.hpp"

namespace sandbox::tool {

namespace {

using nlohmann::json;

ToolError from_httplib_error(httplib::Error err) {
    switch (err) {
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
            return {ToolError::Kind::Timeout, "tool request timed out"};
        default:
            return {ToolError::Kind::Network,
                    "tool unreachable: " + httplib::to_string(err)};
    }
}

}  // namespace

struct ToolClient::Impl {
    httplib::Client client;

    explicit Impl(const std::pair<std::string, int>& hp) : client(hp.first, hp.second) {
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        client.set_keep_alive(false);
    }
};

ToolClient::ToolClient(const std::string& endpoint)
    : impl_(std::make_unique<Impl>(http::split_endpoint(endpoint))) {}

ToolClient::~ToolClient() = default;

void ToolClient::set_read_timeout(std::chrono::milliseconds timeout) {
    if (timeout.count() <= 0) {
        timeout = std::chrono::milliseconds(1);
    }
    impl_->client.set_read_timeout(timeout);
}

ToolMetadata ToolClient::fetch_metadata() {
    auto res = impl_->client.Get("/api/v1/tool");
    if (!res) {
        throw from_httplib_error(res.error());
    }
    if (res->status != 200) {
        throw ToolError(ToolError::Kind::Protocol,
                        "metadata request returned status " + std::to_string(res->status));
    }
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) {
        throw ToolError(ToolError::Kind::Protocol, "metadata response is not valid JSON");
    }
    try {
        return metadata_from_json(j);
    } catch (const schema::WireError& e) {
        throw ToolError(ToolError::Kind::Protocol, e.what());
    }
}

std::vector<schema::TextAnnotation> ToolClient::annotate(const schema::ClinicalNote& note,
                                                         const schema::TaskType& task) {
    const std::string path = "/api/v1/" + task.response_key();
    json request{{"note", schema::note_to_json(note)}};
    auto res = impl_->client.Post(path, schema::canonical_dump(request), "application/json");
    if (!res) {
        throw from_httplib_error(res.error());
    }
    if (res->status != 200) {
        throw ToolError(ToolError::Kind::Protocol,
                        "annotation request returned status " + std::to_string(res->status));
    }
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ToolError(ToolError::Kind::Protocol, "annotation response is not a JSON object");
    }
    auto it = j.find(task.response_key());
    if (it == j.end() || !it->is_array()) {
        throw ToolError(ToolError::Kind::Protocol,
                        "annotation response missing list field '" + task.response_key() + "'");
    }
    std::vector<schema::TextAnnotation> annotations;
    annotations.reserve(it->size());
    for (const auto& item : *it) {
        try {
            annotations.push_back(
                schema::annotation_from_response_json(item, task.name(), note.identifier));
        } catch (const schema::WireError& e) {
            throw ToolError(ToolError::Kind::Protocol, e.what());
        }
    }
    return annotations;
}

ToolClient::RawResponse ToolClient::get(const std::string& path) {
    auto res = impl_->client.Get(path);
    if (!res) {
        throw from_httplib_error(res.error());
    }
    RawResponse raw;
    raw.status = res->status;
    raw.body = res->body;
    if (res->has_header("Location")) {
        raw.location = res->get_header_value("Location");
    }
    return raw;
}

ToolClient::RawResponse ToolClient::post_json(const std::string& path, const std::string& body) {
    auto res = impl_->client.Post(path, body, "application/json");
    if (!res) {
        throw from_httplib_error(res.error());
    }
    RawResponse raw;
    raw.status = res->status;
    raw.body = res->body;
    return raw;
}

}  // namespace sandbox::tool
