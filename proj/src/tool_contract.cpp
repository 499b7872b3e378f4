#include "sandbox/tool_contract.hpp"

#include <nlohmann/json.hpp>

#include "sandbox/validation.hpp"

namespace sandbox::tool {

namespace {

using nlohmann::json;

const schema::ClinicalNote kProbeNotes[] = {
    {"probe-1", "probe-patient", "On 12/26/2020, Ms. Chloe Price met with Dr. Prescott in Seattle.",
     "loinc:LP29684-5"},
    {"probe-2", "probe-patient", "Call 206-555-0100 regarding MRN 0012345 before 2021-03-01.",
     "loinc:LP29684-5"},
    {"probe-3", "probe-patient", "Patient was naïve to treatment; follow up in clinic.",
     "loinc:LP29684-5"},
};

}  // namespace

ContractReport tool_contract_check(ToolClient& client, const schema::TaskType& task) {
    ContractReport report;
    auto fail = [&report](std::string reason) { report.failures.push_back(std::move(reason)); };

    try {
        auto root = client.get("/");
        if (root.status < 300 || root.status >= 400) {
            fail("root redirect missing: GET / returned status " + std::to_string(root.status));
        } else if (root.location.find("/api/v1/tool") == std::string::npos) {
            fail("root redirect missing: GET / points at '" + root.location +
                 "' instead of the tool resource");
        }

        auto docs = client.get("/api");
        if (docs.status != 200 || docs.body.empty()) {
            fail("api docs missing: GET /api returned status " + std::to_string(docs.status));
        }

        try {
            client.fetch_metadata();
        } catch (const ToolError& e) {
            fail(std::string("metadata malformed: ") + e.what());
        }

        const std::string path = "/api/v1/" + task.response_key();
        for (const auto& note : kProbeNotes) {
            json request{{"note", schema::note_to_json(note)}};
            const std::string body = schema::canonical_dump(request);
            auto first = client.post_json(path, body);
            auto second = client.post_json(path, body);
            if (first.status != 200) {
                fail("probe note '" + note.identifier + "' returned status " +
                     std::to_string(first.status));
                continue;
            }
            if (first.body != second.body) {
                fail("non-reproducible: probe note '" + note.identifier +
                     "' produced different responses on repeat annotation");
                continue;
            }
            json parsed = json::parse(first.body, nullptr, false);
            if (parsed.is_discarded() || !parsed.is_object() ||
                !parsed.contains(task.response_key()) ||
                !parsed[task.response_key()].is_array()) {
                fail("probe note '" + note.identifier + "' response is not {\"" +
                     task.response_key() + "\": [...]}");
                continue;
            }
            for (const auto& item : parsed[task.response_key()]) {
                try {
                    auto ann =
                        schema::annotation_from_response_json(item, task.name(), note.identifier);
                    auto valid = schema::validate_annotation(ann, note);
                    if (!valid.ok()) {
                        fail("probe note '" + note.identifier +
                             "' returned invalid annotation: " + valid.joined());
                    }
                } catch (const schema::WireError& e) {
                    fail("probe note '" + note.identifier +
                         "' returned malformed annotation: " + e.what());
                }
            }
        }
    } catch (const ToolError& e) {
        fail(std::string("tool unreachable during contract check: ") + e.what());
    }

    report.ok = report.failures.empty();
    return report;
}

}  // namespace sandbox::tool
