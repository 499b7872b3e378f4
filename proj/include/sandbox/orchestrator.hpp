#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sandbox/clock.hpp"
#include "sandbox/launcher.hpp"
#include "sandbox/metrics.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/tool_client.hpp"
#include "sandbox/types.hpp"

namespace sandbox::orch {

class OrchestratorError : public std::runtime_error {
  public:
    enum class Kind { NotFound, Invalid, Policy };

    OrchestratorError(Kind kind, const std::string& detail)
        : std::runtime_error(detail), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

struct Budget {
    std::chrono::milliseconds wall_clock{60000};
    std::chrono::milliseconds per_note_timeout{30000};
};

struct SiteConfig {
    enum class Role { Test, Federated };

    std::string site_id;
    std::string endpoint;  // data node "host:port"
    schema::NoteStoreRef note_store;
    std::map<std::string, schema::AnnotationStoreRef> gold_refs;  // queue -> gold store
    Budget budget;
    Role role = Role::Federated;
};

// Exactly one TEST site, any number of FEDERATED sites.
struct Topology {
    std::vector<SiteConfig> sites;

    const SiteConfig& test_site() const;
    std::vector<const SiteConfig*> federated_sites() const;
};

Topology topology_from_json(const nlohmann::json& j);
Topology topology_from_file(const std::filesystem::path& path);

enum class SubmissionState {
    Received,
    Validating,
    TestScoring,
    FederatedScoring,
    Complete,
    Failed,
};

std::string to_string(SubmissionState state);
SubmissionState submission_state_from_string(const std::string& s);

struct Submission {
    std::string id;
    launch::ToolRef tool_ref;
    std::string queue;
    SubmissionState state = SubmissionState::Received;
    std::string failure_reason;  // set when Failed
    std::string failed_stage;    // stage name when Failed
    std::string created_at;
};

nlohmann::json submission_to_json(const Submission& sub);
Submission submission_from_json(const nlohmann::json& j);

// Aggregate scores only: counts, metrics, metadata, timestamps. Never note
// text, annotation text, or offsets.
struct LeaderboardRecord {
    std::string submission_id;
    std::string queue;
    std::map<std::string, metrics::CategoryReport> site_reports;  // siteId -> report
    tool::ToolMetadata tool_metadata;
    std::string completed_at;
};

nlohmann::json leaderboard_record_to_json(const LeaderboardRecord& record);
LeaderboardRecord leaderboard_record_from_json(const nlohmann::json& j);

struct LeaderboardPage {
    std::vector<LeaderboardRecord> items;
    std::uint64_t offset = 0;
    std::uint64_t limit = 0;
    std::uint64_t total_count = 0;
};

// Runs submissions through validation, the TEST gate, and the concurrent
// FEDERATED fan-out. State and the leaderboard are persisted as JSONL under
// state_dir and replayed on startup; publishing is keyed by submission id,
// so re-running after a crash never duplicates a leaderboard row.
class Orchestrator {
  public:
    Orchestrator(Topology topology, launch::Launcher& launcher,
                 const schema::TaskRegistry& registry, std::filesystem::path state_dir,
                 clockutil::Clock& clock);

    std::string submit(const launch::ToolRef& tool_ref, const std::string& queue);
    Submission get_submission(const std::string& id) const;
    std::vector<Submission> list_submissions() const;

    // Drives the submission to COMPLETE or FAILED and returns the final
    // record. Safe to call again after a crash or for a finished submission.
    Submission run_submission(const std::string& id);

    // Diagnostic bundle: validation outcome, TEST-site logs/violations, and
    // per-federated-site status with aggregate counts only. include_spans
    // additionally returns TEST-site false positives/negatives.
    nlohmann::json diagnostics(const std::string& id, bool include_spans) const;

    // TEST-site FP/FN lists; refused with a Policy error for federated sites.
    nlohmann::json site_spans(const std::string& id, const std::string& site_id) const;

    LeaderboardPage leaderboard(const std::string& queue, std::uint64_t offset,
                                std::uint64_t limit) const;

    const Topology& topology() const { return topology_; }

  private:
    struct SiteStage;

    SiteStage run_site_stage(const Submission& sub, const schema::TaskType& task,
                             const SiteConfig& site);
    void transition(Submission& sub, SubmissionState state, const std::string& reason = "",
                    const std::string& stage = "");
    void persist_submission_snapshot(const Submission& sub);
    bool publish(const LeaderboardRecord& record);
    void write_diagnostics(const std::string& id, const nlohmann::json& diag);
    std::filesystem::path diagnostics_path(const std::string& id) const;

    Topology topology_;
    launch::Launcher& launcher_;
    const schema::TaskRegistry& registry_;
    std::filesystem::path state_dir_;
    clockutil::Clock& clock_;

    mutable std::mutex mutex_;
    std::map<std::string, Submission> submissions_;
    std::map<std::string, LeaderboardRecord> published_;  // by submission id
    std::uint64_t next_submission_ = 1;
    std::ofstream submissions_log_;
    std::ofstream leaderboard_log_;
};

}  // namespace sandbox::orch
