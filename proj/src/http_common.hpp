#pragma once

// Internal helpers shared by the HTTP translation units. Keep this header
// out of include/: it pulls in the full vendored server library.

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "sandbox/types.hpp"

namespace sandbox::http {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& j) {
    res.status = status;
    res.set_content(schema::canonical_dump(j), "application/json");
}

// Uniform machine-readable error body.
inline void send_problem(httplib::Response& res, int status, const std::string& title,
                         const std::string& detail) {
    send_json(res, status,
              nlohmann::json{{"status", status}, {"title", title}, {"detail", detail}});
}

inline std::string query_param(const httplib::Request& req, const char* key) {
    return req.has_param(key) ? req.get_param_value(key) : "";
}

// Splits "host:port", tolerating an "http://" prefix and trailing slash.
inline std::pair<std::string, int> split_endpoint(std::string endpoint) {
    if (endpoint.rfind("http://", 0) == 0) {
        endpoint = endpoint.substr(7);
    }
    if (!endpoint.empty() && endpoint.back() == '/') {
        endpoint.pop_back();
    }
    auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) {
        return {endpoint, 80};
    }
    return {endpoint.substr(0, colon), std::stoi(endpoint.substr(colon + 1))};
}

}  // namespace sandbox::http
