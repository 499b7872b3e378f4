#include "sandbox/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sandbox/eval_run.hpp"
#include "sandbox/node_client.hpp"
#include "sandbox/tool_contract.hpp"

namespace sandbox::orch {

namespace {

using nlohmann::json;

std::string role_to_string(SiteConfig::Role role) {
    return role == SiteConfig::Role::Test ? "TEST" : "FEDERATED";
}

SiteConfig::Role role_from_string(const std::string& s) {
    if (s == "TEST") return SiteConfig::Role::Test;
    if (s == "FEDERATED") return SiteConfig::Role::Federated;
    throw OrchestratorError(OrchestratorError::Kind::Invalid, "unknown site role: " + s);
}

const json& require_field(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                std::string(where) + " is missing field '" + key + "'");
    }
    return *it;
}

std::string require_string(const json& j, const char* key, const char* where) {
    const json& field = require_field(j, key, where);
    if (!field.is_string() || field.get<std::string>().empty()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                std::string(where) + " field '" + key +
                                    "' must be a non-empty string");
    }
    return field.get<std::string>();
}

schema::AnnotationStoreRef store_ref_from_json(const json& j, const char* where) {
    if (!j.is_object()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                std::string(where) + " must be an object");
    }
    schema::AnnotationStoreRef ref;
    ref.dataset_id = require_string(j, "datasetId", where);
    ref.annotation_store_id = require_string(j, "annotationStoreId", where);
    return ref;
}

json store_ref_to_json(const schema::AnnotationStoreRef& ref) {
    return json{{"datasetId", ref.dataset_id}, {"annotationStoreId", ref.annotation_store_id}};
}

// Tolerates a torn final line from an interrupted append; anything else
// malformed mid-file is corruption.
void replay_jsonl(const std::filesystem::path& path,
                  const std::function<void(const json&)>& apply) {
    std::ifstream in(path);
    if (!in.is_open()) return;
    std::string line;
    bool saw_bad = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (saw_bad) {
            throw std::runtime_error("corrupt log " + path.string() + " at line " +
                                     std::to_string(line_no - 1));
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            saw_bad = true;
            continue;
        }
        apply(j);
    }
}

std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& part : parts) {
        if (!out.empty()) out += "; ";
        out += part;
    }
    return out;
}

json counts_to_json(const metrics::MatchCounts& counts) {
    return json{{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}};
}

}  // namespace

const SiteConfig& Topology::test_site() const {
    for (const auto& site : sites) {
        if (site.role == SiteConfig::Role::Test) return site;
    }
    throw OrchestratorError(OrchestratorError::Kind::Invalid, "topology has no TEST site");
}

std::vector<const SiteConfig*> Topology::federated_sites() const {
    std::vector<const SiteConfig*> out;
    for (const auto& site : sites) {
        if (site.role == SiteConfig::Role::Federated) out.push_back(&site);
    }
    return out;
}

Topology topology_from_json(const json& j) {
    if (!j.is_object() || !j.contains("sites") || !j["sites"].is_array() ||
        j["sites"].empty()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                "topology must contain a non-empty 'sites' array");
    }
    Topology topology;
    std::set<std::string> seen_ids;
    std::size_t test_count = 0;
    for (const auto& sj : j["sites"]) {
        SiteConfig site;
        site.site_id = require_string(sj, "siteId", "site");
        if (!seen_ids.insert(site.site_id).second) {
            throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                    "duplicate siteId: " + site.site_id);
        }
        site.endpoint = require_string(sj, "endpoint", "site");
        site.role = role_from_string(require_string(sj, "role", "site"));
        if (site.role == SiteConfig::Role::Test) ++test_count;

        const json& ns = require_field(sj, "noteStore", "site");
        site.note_store.dataset_id = require_string(ns, "datasetId", "noteStore");
        site.note_store.fhir_store_id = require_string(ns, "fhirStoreId", "noteStore");

        const json& gold = require_field(sj, "goldStores", "site");
        if (!gold.is_object() || gold.empty()) {
            throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                    "site '" + site.site_id +
                                        "' needs a non-empty 'goldStores' object");
        }
        for (auto it = gold.begin(); it != gold.end(); ++it) {
            site.gold_refs[it.key()] = store_ref_from_json(it.value(), "goldStores entry");
        }

        if (sj.contains("budget")) {
            const json& b = sj["budget"];
            if (b.contains("wallClockMs")) {
                site.budget.wall_clock = std::chrono::milliseconds(b["wallClockMs"].get<long long>());
            }
            if (b.contains("perNoteTimeoutMs")) {
                site.budget.per_note_timeout =
                    std::chrono::milliseconds(b["perNoteTimeoutMs"].get<long long>());
            }
        }
        if (site.budget.wall_clock.count() <= 0 || site.budget.per_note_timeout.count() <= 0) {
            throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                    "site '" + site.site_id + "' budget must be positive");
        }
        topology.sites.push_back(std::move(site));
    }
    if (test_count != 1) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                "topology must contain exactly one TEST site, found " +
                                    std::to_string(test_count));
    }
    return topology;
}

Topology topology_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                "cannot open topology file: " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                "topology file is not valid JSON: " + path.string());
    }
    return topology_from_json(j);
}

std::string to_string(SubmissionState state) {
    switch (state) {
        case SubmissionState::Received: return "RECEIVED";
        case SubmissionState::Validating: return "VALIDATING";
        case SubmissionState::TestScoring: return "TEST_SCORING";
        case SubmissionState::FederatedScoring: return "FEDERATED_SCORING";
        case SubmissionState::Complete: return "COMPLETE";
        case SubmissionState::Failed: return "FAILED";
    }
    return "UNKNOWN";
}

SubmissionState submission_state_from_string(const std::string& s) {
    if (s == "RECEIVED") return SubmissionState::Received;
    if (s == "VALIDATING") return SubmissionState::Validating;
    if (s == "TEST_SCORING") return SubmissionState::TestScoring;
    if (s == "FEDERATED_SCORING") return SubmissionState::FederatedScoring;
    if (s == "COMPLETE") return SubmissionState::Complete;
    if (s == "FAILED") return SubmissionState::Failed;
    throw OrchestratorError(OrchestratorError::Kind::Invalid, "unknown submission state: " + s);
}

json submission_to_json(const Submission& sub) {
    json j{{"id", sub.id},
           {"queue", sub.queue},
           {"state", to_string(sub.state)},
           {"toolRef", launch::tool_ref_to_json(sub.tool_ref)},
           {"createdAt", sub.created_at}};
    if (sub.state == SubmissionState::Failed) {
        j["failureReason"] = sub.failure_reason;
        j["failedStage"] = sub.failed_stage;
    }
    return j;
}

Submission submission_from_json(const json& j) {
    Submission sub;
    sub.id = j.at("id").get<std::string>();
    sub.queue = j.at("queue").get<std::string>();
    sub.state = submission_state_from_string(j.at("state").get<std::string>());
    sub.tool_ref = launch::tool_ref_from_json(j.at("toolRef"));
    sub.created_at = j.value("createdAt", "");
    sub.failure_reason = j.value("failureReason", "");
    sub.failed_stage = j.value("failedStage", "");
    return sub;
}

json leaderboard_record_to_json(const LeaderboardRecord& record) {
    json reports = json::object();
    for (const auto& [site_id, report] : record.site_reports) {
        reports[site_id] = metrics::report_to_json(report);
    }
    return json{{"submissionId", record.submission_id},
                {"queue", record.queue},
                {"completedAt", record.completed_at},
                {"toolMetadata", tool::metadata_to_json(record.tool_metadata)},
                {"siteReports", reports}};
}

LeaderboardRecord leaderboard_record_from_json(const json& j) {
    LeaderboardRecord record;
    record.submission_id = j.at("submissionId").get<std::string>();
    record.queue = j.at("queue").get<std::string>();
    record.completed_at = j.at("completedAt").get<std::string>();
    record.tool_metadata = tool::metadata_from_json(j.at("toolMetadata"));
    for (auto it = j.at("siteReports").begin(); it != j.at("siteReports").end(); ++it) {
        record.site_reports[it.key()] = metrics::report_from_json(it.value());
    }
    return record;
}

struct Orchestrator::SiteStage {
    evalrun::StageOutcome outcome;
    std::string log_text;
};

Orchestrator::Orchestrator(Topology topology, launch::Launcher& launcher,
                           const schema::TaskRegistry& registry,
                           std::filesystem::path state_dir, clockutil::Clock& clock)
    : topology_(std::move(topology)),
      launcher_(launcher),
      registry_(registry),
      state_dir_(std::move(state_dir)),
      clock_(clock) {
    topology_.test_site();
    std::filesystem::create_directories(state_dir_);
    std::filesystem::create_directories(state_dir_ / "logs");
    std::filesystem::create_directories(state_dir_ / "diagnostics");

    replay_jsonl(state_dir_ / "submissions.jsonl", [this](const json& j) {
        const std::string op = j.at("op").get<std::string>();
        if (op == "submit") {
            Submission sub = submission_from_json(j.at("doc"));
            submissions_[sub.id] = sub;
            if (sub.id.rfind("sub-", 0) == 0) {
                const std::uint64_t n = std::strtoull(sub.id.c_str() + 4, nullptr, 10);
                next_submission_ = std::max(next_submission_, n + 1);
            }
        } else if (op == "state") {
            auto it = submissions_.find(j.at("id").get<std::string>());
            if (it == submissions_.end()) {
                throw std::runtime_error("state change for unknown submission: " +
                                         j.at("id").get<std::string>());
            }
            it->second.state = submission_state_from_string(j.at("state").get<std::string>());
            it->second.failure_reason = j.value("failureReason", "");
            it->second.failed_stage = j.value("failedStage", "");
        } else {
            throw std::runtime_error("unknown op in submissions log: " + op);
        }
    });
    replay_jsonl(state_dir_ / "leaderboard.jsonl", [this](const json& j) {
        LeaderboardRecord record = leaderboard_record_from_json(j);
        published_.emplace(record.submission_id, std::move(record));
    });

    submissions_log_.open(state_dir_ / "submissions.jsonl", std::ios::app);
    leaderboard_log_.open(state_dir_ / "leaderboard.jsonl", std::ios::app);
    if (!submissions_log_.is_open() || !leaderboard_log_.is_open()) {
        throw std::runtime_error("cannot open orchestrator state logs under " +
                                 state_dir_.string());
    }
}

std::string Orchestrator::submit(const launch::ToolRef& tool_ref, const std::string& queue) {
    if (!registry_.find(queue)) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid, "unknown queue: " + queue);
    }
    for (const auto& site : topology_.sites) {
        if (site.gold_refs.count(queue) == 0) {
            throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                    "site '" + site.site_id +
                                        "' has no gold store for queue " + queue);
        }
    }
    std::lock_guard<std::mutex> lock(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sub-%06llu",
                  static_cast<unsigned long long>(next_submission_++));
    Submission sub;
    sub.id = buf;
    sub.tool_ref = tool_ref;
    sub.queue = queue;
    sub.state = SubmissionState::Received;
    sub.created_at = clockutil::format_iso8601(clock_.now());
    submissions_[sub.id] = sub;
    submissions_log_ << schema::canonical_dump(
                            json{{"op", "submit"}, {"doc", submission_to_json(sub)}})
                     << '\n';
    submissions_log_.flush();
    return sub.id;
}

Submission Orchestrator::get_submission(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = submissions_.find(id);
    if (it == submissions_.end()) {
        throw OrchestratorError(OrchestratorError::Kind::NotFound, "no such submission: " + id);
    }
    return it->second;
}

std::vector<Submission> Orchestrator::list_submissions() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<Submission> out;
    out.reserve(submissions_.size());
    for (const auto& [id, sub] : submissions_) out.push_back(sub);
    return out;
}

void Orchestrator::transition(Submission& sub, SubmissionState state, const std::string& reason,
                              const std::string& stage) {
    sub.state = state;
    sub.failure_reason = reason;
    sub.failed_stage = stage;
    persist_submission_snapshot(sub);
}

void Orchestrator::persist_submission_snapshot(const Submission& sub) {
    std::lock_guard<std::mutex> lock(mutex_);
    submissions_[sub.id] = sub;
    json j{{"op", "state"}, {"id", sub.id}, {"state", to_string(sub.state)}};
    if (sub.state == SubmissionState::Failed) {
        j["failureReason"] = sub.failure_reason;
        j["failedStage"] = sub.failed_stage;
    }
    submissions_log_ << schema::canonical_dump(j) << '\n';
    submissions_log_.flush();
}

Orchestrator::SiteStage Orchestrator::run_site_stage(const Submission& sub,
                                                     const schema::TaskType& task,
                                                     const SiteConfig& site) {
    SiteStage stage;
    auto gold_it = site.gold_refs.find(sub.queue);
    if (gold_it == site.gold_refs.end()) {
        stage.outcome.failure = "site has no gold store for queue " + sub.queue;
        return stage;
    }
    std::unique_ptr<launch::LaunchedTool> launched;
    try {
        launched = launcher_.launch(sub.tool_ref,
                                    state_dir_ / "logs" / (sub.id + "-" + site.site_id + ".log"));
    } catch (const launch::LaunchError& e) {
        stage.outcome.failure = std::string("tool launch failed: ") + e.what();
        return stage;
    }
    try {
        node::NodeClient node(site.endpoint);
        tool::ToolClient client(launched->endpoint());
        evalrun::StageParams params;
        params.note_store = site.note_store;
        params.gold_ref = gold_it->second;
        params.wall_clock = site.budget.wall_clock;
        params.per_note_timeout = site.budget.per_note_timeout;
        stage.outcome = evalrun::run_stage(node, client, task, params);
    } catch (const std::exception& e) {
        stage.outcome.ok = false;
        stage.outcome.failure = std::string("stage error: ") + e.what();
    }
    launched->shutdown();
    stage.log_text = launched->log_text();
    return stage;
}

Submission Orchestrator::run_submission(const std::string& id) {
    Submission sub = get_submission(id);
    const std::optional<schema::TaskType> task = registry_.find(sub.queue);
    if (!task) {
        throw OrchestratorError(OrchestratorError::Kind::Invalid,
                                "submission queue is not a registered task: " + sub.queue);
    }

    json diag;
    diag["submissionId"] = sub.id;
    diag["queue"] = sub.queue;
    diag["sites"] = json::array();

    transition(sub, SubmissionState::Validating);
    tool::ToolMetadata metadata;
    {
        std::unique_ptr<launch::LaunchedTool> launched;
        try {
            launched = launcher_.launch(sub.tool_ref,
                                        state_dir_ / "logs" / (sub.id + "-validate.log"));
        } catch (const launch::LaunchError& e) {
            diag["validation"] = json{{"status", "failed"},
                                      {"failures", json::array({std::string("launch: ") + e.what()})},
                                      {"logText", ""}};
            transition(sub, SubmissionState::Failed,
                       std::string("tool launch failed: ") + e.what(), "VALIDATING");
            write_diagnostics(sub.id, diag);
            return sub;
        }
        tool::ContractReport contract;
        std::string contract_error;
        try {
            tool::ToolClient client(launched->endpoint());
            contract = tool::tool_contract_check(client, *task);
            if (contract.ok) metadata = client.fetch_metadata();
        } catch (const std::exception& e) {
            contract.ok = false;
            contract_error = e.what();
            contract.failures.push_back(std::string("contract check aborted: ") + e.what());
        }
        launched->shutdown();
        json validation{{"status", contract.ok ? "ok" : "failed"},
                        {"failures", contract.failures},
                        {"logText", launched->log_text()}};
        if (contract.ok) validation["toolMetadata"] = tool::metadata_to_json(metadata);
        diag["validation"] = validation;
        if (!contract.ok) {
            transition(sub, SubmissionState::Failed,
                       "tool contract check failed: " + join_lines(contract.failures),
                       "VALIDATING");
            write_diagnostics(sub.id, diag);
            return sub;
        }
    }

    transition(sub, SubmissionState::TestScoring);
    const SiteConfig& test_site = topology_.test_site();
    SiteStage test_stage = run_site_stage(sub, *task, test_site);
    {
        json site_diag{{"siteId", test_site.site_id},
                       {"role", "TEST"},
                       {"status", test_stage.outcome.ok ? "ok" : test_stage.outcome.failure},
                       {"notesEvaluated", test_stage.outcome.notes_evaluated},
                       {"protocolViolationCount", test_stage.outcome.protocol_violation_count},
                       {"protocolViolations", test_stage.outcome.protocol_violations},
                       {"logText", test_stage.log_text}};
        if (test_stage.outcome.ok) {
            site_diag["report"] = metrics::report_to_json(test_stage.outcome.report);
            json fps = json::array();
            for (const auto& ann : test_stage.outcome.diff.false_positives) {
                fps.push_back(schema::annotation_to_json(ann));
            }
            json fns = json::array();
            for (const auto& ann : test_stage.outcome.diff.false_negatives) {
                fns.push_back(schema::annotation_to_json(ann));
            }
            site_diag["falsePositives"] = fps;
            site_diag["falseNegatives"] = fns;
        }
        diag["sites"].push_back(site_diag);
    }
    if (!test_stage.outcome.ok) {
        transition(sub, SubmissionState::Failed, test_stage.outcome.failure, "TEST_SCORING");
        write_diagnostics(sub.id, diag);
        return sub;
    }

    transition(sub, SubmissionState::FederatedScoring);
    const auto federated = topology_.federated_sites();
    std::vector<SiteStage> stages(federated.size());
    std::vector<std::thread> workers;
    workers.reserve(federated.size());
    for (std::size_t i = 0; i < federated.size(); ++i) {
        workers.emplace_back([this, &sub, task, &stages, &federated, i] {
            try {
                stages[i] = run_site_stage(sub, *task, *federated[i]);
            } catch (const std::exception& e) {
                stages[i].outcome.ok = false;
                stages[i].outcome.failure = std::string("stage error: ") + e.what();
            }
        });
    }
    for (auto& worker : workers) worker.join();

    std::string federated_failure;
    for (std::size_t i = 0; i < federated.size(); ++i) {
        const SiteConfig& site = *federated[i];
        const evalrun::StageOutcome& outcome = stages[i].outcome;
        json site_diag{{"siteId", site.site_id},
                       {"role", "FEDERATED"},
                       {"status", outcome.ok ? "ok" : outcome.failure},
                       {"protocolViolationCount", outcome.protocol_violation_count}};
        if (outcome.ok) {
            site_diag["counts"] = json{{"instance", counts_to_json(outcome.report.instance.counts)},
                                       {"token", counts_to_json(outcome.report.token.counts)}};
        }
        diag["sites"].push_back(site_diag);
        if (!outcome.ok && federated_failure.empty()) {
            federated_failure = "site '" + site.site_id + "': " + outcome.failure;
        }
    }
    if (!federated_failure.empty()) {
        transition(sub, SubmissionState::Failed, federated_failure, "FEDERATED_SCORING");
        write_diagnostics(sub.id, diag);
        return sub;
    }

    LeaderboardRecord record;
    record.submission_id = sub.id;
    record.queue = sub.queue;
    record.tool_metadata = metadata;
    record.site_reports[test_site.site_id] = test_stage.outcome.report;
    for (std::size_t i = 0; i < federated.size(); ++i) {
        record.site_reports[federated[i]->site_id] = stages[i].outcome.report;
    }
    record.completed_at = clockutil::format_iso8601(clock_.now());
    publish(record);
    transition(sub, SubmissionState::Complete);
    write_diagnostics(sub.id, diag);
    return sub;
}

bool Orchestrator::publish(const LeaderboardRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = published_.emplace(record.submission_id, record);
    if (!inserted) return false;
    leaderboard_log_ << schema::canonical_dump(leaderboard_record_to_json(record)) << '\n';
    leaderboard_log_.flush();
    return true;
}

std::filesystem::path Orchestrator::diagnostics_path(const std::string& id) const {
    return state_dir_ / "diagnostics" / (id + ".json");
}

void Orchestrator::write_diagnostics(const std::string& id, const json& diag) {
    const auto path = diagnostics_path(id);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << schema::canonical_dump(diag) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json Orchestrator::diagnostics(const std::string& id, bool include_spans) const {
    get_submission(id);
    std::ifstream in(diagnostics_path(id));
    if (!in.is_open()) {
        throw OrchestratorError(OrchestratorError::Kind::NotFound,
                                "no diagnostics recorded for submission: " + id);
    }
    json diag = json::parse(in);
    if (!include_spans && diag.contains("sites")) {
        for (auto& site : diag["sites"]) {
            site.erase("falsePositives");
            site.erase("falseNegatives");
        }
    }
    return diag;
}

nlohmann::json Orchestrator::site_spans(const std::string& id, const std::string& site_id) const {
    json diag = diagnostics(id, true);
    for (const auto& site : diag["sites"]) {
        if (site.at("siteId").get<std::string>() != site_id) continue;
        if (site.at("role").get<std::string>() != "TEST") {
            throw OrchestratorError(OrchestratorError::Kind::Policy,
                                    "span-level results never leave federated site '" +
                                        site_id + "'");
        }
        return json{{"siteId", site_id},
                    {"falsePositives", site.value("falsePositives", json::array())},
                    {"falseNegatives", site.value("falseNegatives", json::array())}};
    }
    throw OrchestratorError(OrchestratorError::Kind::NotFound,
                            "submission " + id + " has no stage for site: " + site_id);
}

LeaderboardPage Orchestrator::leaderboard(const std::string& queue, std::uint64_t offset,
                                          std::uint64_t limit) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<const LeaderboardRecord*> filtered;
    for (const auto& [id, record] : published_) {
        if (queue.empty() || record.queue == queue) filtered.push_back(&record);
    }
    std::sort(filtered.begin(), filtered.end(),
              [](const LeaderboardRecord* a, const LeaderboardRecord* b) {
                  if (a->completed_at != b->completed_at) {
                      return a->completed_at > b->completed_at;
                  }
                  return a->submission_id > b->submission_id;
              });
    LeaderboardPage page;
    page.offset = offset;
    page.limit = limit;
    page.total_count = filtered.size();
    for (std::size_t i = offset; i < filtered.size() && page.items.size() < limit; ++i) {
        page.items.push_back(*filtered[i]);
    }
    return page;
}

}  // namespace sandbox::orch
