#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sandbox/annotator.hpp"
#include "sandbox/bundle.hpp"
#include "sandbox/clock.hpp"
#include "sandbox/corpus.hpp"
#include "sandbox/eval_run.hpp"
#include "sandbox/launcher.hpp"
#include "sandbox/metrics.hpp"
#include "sandbox/node_client.hpp"
#include "sandbox/node_service.hpp"
#include "sandbox/node_store.hpp"
#include "sandbox/orchestrator.hpp"
#include "sandbox/status_api.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/tool_client.hpp"
#include "sandbox/tool_server.hpp"
#include "sandbox/transfer.hpp"
#include "sandbox/types.hpp"

namespace fs = std::filesystem;
using namespace sandbox;
using nlohmann::json;

namespace {

// Command-line or configuration mistakes; everything else that throws is a
// runtime failure. Exit codes: 0 success, 1 runtime failure, 2 usage error.
class UsageError : public std::runtime_error {
  public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

volatile std::sig_atomic_t g_stop = 0;

void handle_stop(int) { g_stop = 1; }

void wait_for_stop() {
    std::signal(SIGINT, handle_stop);
    std::signal(SIGTERM, handle_stop);
    while (g_stop == 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == listen.size()) {
        throw UsageError("listen address must be host:port, got '" + listen + "'");
    }
    int port = 0;
    try {
        port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("listen address has a non-numeric port: '" + listen + "'");
    }
    if (port < 0 || port > 65535) {
        throw UsageError("listen port out of range: " + listen.substr(colon + 1));
    }
    return {listen.substr(0, colon), port};
}

// The launcher polls this file for the bound port; write it atomically so a
// concurrent read never sees a partial number.
void write_port_file(const std::string& path, int port) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << port << '\n';
    }
    fs::rename(tmp, path);
}

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream in(command);
    std::vector<std::string> argv;
    std::string word;
    while (in >> word) argv.push_back(word);
    return argv;
}

launch::ToolRef tool_ref_from_flags(const std::string& tool_endpoint,
                                    const std::string& tool_cmd) {
    if (tool_endpoint.empty() == tool_cmd.empty()) {
        throw UsageError("exactly one of --tool-endpoint and --tool-cmd is required");
    }
    launch::ToolRef ref;
    if (!tool_endpoint.empty()) {
        ref.kind = launch::ToolRef::Kind::Endpoint;
        ref.endpoint = tool_endpoint;
    } else {
        ref.kind = launch::ToolRef::Kind::Subprocess;
        ref.command = split_command(tool_cmd);
        if (ref.command.empty()) {
            throw UsageError("--tool-cmd must not be blank");
        }
    }
    return ref;
}

schema::TaskType require_task(const schema::TaskRegistry& registry, const std::string& name) {
    auto task = registry.find(name);
    if (!task) {
        throw UsageError("unknown task: " + name);
    }
    return *task;
}

int serve_data_node(const std::string& data_dir, const std::string& listen,
                    const std::string& port_file) {
    schema::TaskRegistry registry;
    node::NodeStore store(data_dir, registry);
    node::NodeService service(store);
    const auto [host, port] = parse_listen(listen);
    const int bound = service.start(host, port);
    if (!port_file.empty()) write_port_file(port_file, bound);
    std::cout << "data node listening on " << host << ":" << bound << std::endl;
    wait_for_stop();
    service.stop();
    std::cout << "data node stopped" << std::endl;
    return 0;
}

struct AnnotatorFlags {
    std::string kind = "reference";
    std::string data_dir = "data";
    std::string bundle_dir;
    std::string perturb;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t delay_ms = 0;
};

std::shared_ptr<const tool::Annotator> build_annotator(const AnnotatorFlags& flags,
                                                       const schema::TaskRegistry& registry) {
    if (flags.kind == "reference") {
        return std::make_shared<tool::ReferenceAnnotator>(tool::load_lexicons(flags.data_dir));
    }
    if (flags.bundle_dir.empty()) {
        throw UsageError("gold-echo annotator needs --bundle");
    }
    const schema::DatasetBundle bundle = schema::read_bundle(flags.bundle_dir, registry);
    tool::GoldEchoAnnotator::Options options;
    if (!flags.perturb.empty()) {
        options.perturb = corpus::perturb_mode_from_string(flags.perturb);
        options.perturb_rate = flags.rate;
        options.perturb_seed = flags.seed;
    }
    options.delay_per_note = std::chrono::milliseconds(flags.delay_ms);
    return std::make_shared<tool::GoldEchoAnnotator>(bundle, registry, options);
}

int serve_annotator(const AnnotatorFlags& flags, const std::string& listen,
                    const std::string& port_file) {
    schema::TaskRegistry registry;
    tool::ToolServer server(build_annotator(flags, registry), registry);
    const auto [host, port] = parse_listen(listen);
    const int bound = server.start(host, port);
    if (!port_file.empty()) write_port_file(port_file, bound);
    std::cout << "annotator listening on " << host << ":" << bound << std::endl;
    wait_for_stop();
    server.stop();
    std::cout << "annotator stopped" << std::endl;
    return 0;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 const std::string& data_dir, const std::optional<std::uint64_t>& seed) {
    schema::TaskRegistry registry;
    corpus::CorpusConfig config = corpus::config_from_json_file(config_path);
    if (seed) config.seed = *seed;
    if (fs::exists(out_dir) && (!fs::is_directory(out_dir) || !fs::is_empty(out_dir))) {
        throw UsageError("output path exists and is not an empty directory: " + out_dir);
    }
    const corpus::SurrogatePools pools = corpus::load_pools(data_dir);
    const schema::DatasetBundle bundle = corpus::generate_corpus(config, pools, registry);
    schema::write_bundle(bundle, out_dir, registry);

    const std::uint64_t total = bundle.manifest.note_count;
    std::printf("bundle %s: %llu notes\n", bundle.manifest.id.c_str(),
                static_cast<unsigned long long>(total));
    std::printf("%-14s %12s %8s %8s\n", "category", "annotations", "notes", "notes%");
    for (const auto& tally : corpus::tally_bundle(bundle)) {
        const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(tally.notes_with) /
                                                  static_cast<double>(total);
        std::printf("%-14s %12llu %8llu %7.1f%%\n", tally.category.c_str(),
                    static_cast<unsigned long long>(tally.annotations),
                    static_cast<unsigned long long>(tally.notes_with), pct);
    }
    return 0;
}

int cmd_ingest(const std::string& bundle_dir, const std::string& endpoint,
               const std::string& dataset_override) {
    schema::TaskRegistry registry;
    schema::DatasetBundle bundle = schema::read_bundle(bundle_dir, registry);
    if (!dataset_override.empty()) bundle.manifest.id = dataset_override;
    node::NodeClient client(endpoint);
    const transfer::IngestResult result = transfer::ingest_bundle(client, bundle, registry);
    std::printf("ingested dataset %s: %llu notes, %zu stores, %llu annotations\n",
                result.dataset_id.c_str(), static_cast<unsigned long long>(result.note_count),
                result.gold_store_ids.size(),
                static_cast<unsigned long long>(result.annotation_count));
    return 0;
}

struct EvaluateFlags {
    std::string endpoint;
    std::string tool_endpoint;
    std::string tool_cmd;
    std::string task;
    std::string dataset;
    std::string gold_store;
    std::string fhir_store = "notes";
    std::string out;
    std::uint64_t wall_clock_ms = 60000;
    std::uint64_t per_note_timeout_ms = 30000;
};

int cmd_evaluate(const EvaluateFlags& flags) {
    schema::TaskRegistry registry;
    const schema::TaskType task = require_task(registry, flags.task);
    const std::string gold_store =
        flags.gold_store.empty() ? transfer::gold_store_id(task) : flags.gold_store;

    evalrun::StageParams params;
    params.note_store = schema::NoteStoreRef{flags.dataset, flags.fhir_store};
    params.gold_ref = schema::AnnotationStoreRef{flags.dataset, gold_store};
    params.wall_clock = std::chrono::milliseconds(flags.wall_clock_ms);
    params.per_note_timeout = std::chrono::milliseconds(flags.per_note_timeout_ms);

    const launch::ToolRef ref = tool_ref_from_flags(flags.tool_endpoint, flags.tool_cmd);
    launch::StandardLauncher launcher;
    const fs::path log_file =
        fs::temp_directory_path() / ("sandbox-evaluate-" + std::to_string(::getpid()) + ".log");
    auto launched = launcher.launch(ref, log_file);

    int exit_code = 1;
    try {
        node::NodeClient node_client(flags.endpoint);
        const schema::Dataset dataset = node_client.get_dataset(flags.dataset);
        if (std::find(dataset.fhir_store_ids.begin(), dataset.fhir_store_ids.end(),
                      flags.fhir_store) == dataset.fhir_store_ids.end()) {
            throw UsageError("dataset " + flags.dataset + " has no fhir store " +
                             flags.fhir_store);
        }
        node_client.get_annotation_store(params.gold_ref);
        tool::ToolClient tool_client(launched->endpoint());
        tool_client.fetch_metadata();

        const evalrun::StageOutcome outcome =
            evalrun::run_stage(node_client, tool_client, task, params);
        if (outcome.ok) {
            std::cout << metrics::format_report_table({outcome.report});
            if (!flags.out.empty()) {
                std::ofstream out(flags.out, std::ios::trunc);
                out << schema::canonical_dump(metrics::report_to_json(outcome.report)) << '\n';
            }
            exit_code = 0;
        } else {
            std::cerr << "evaluation failed: " << outcome.failure << '\n';
            for (const auto& violation : outcome.protocol_violations) {
                std::cerr << "  " << violation << '\n';
            }
            if (outcome.protocol_violation_count > outcome.protocol_violations.size()) {
                std::cerr << "  (" << outcome.protocol_violation_count << " violations total)\n";
            }
        }
    } catch (...) {
        launched->shutdown();
        throw;
    }
    launched->shutdown();
    return exit_code;
}

struct OrchestrateFlags {
    std::string config;
    std::string state_dir;
    bool logical_clock = false;
};

struct OrchestratorBundle {
    schema::TaskRegistry registry;
    launch::StandardLauncher launcher;
    std::unique_ptr<clockutil::Clock> clock;
    std::unique_ptr<orch::Orchestrator> orchestrator;
};

std::unique_ptr<OrchestratorBundle> make_orchestrator(const OrchestrateFlags& flags) {
    auto bundle = std::make_unique<OrchestratorBundle>();
    if (flags.logical_clock) {
        bundle->clock = std::make_unique<clockutil::LogicalClock>();
    } else {
        bundle->clock = std::make_unique<clockutil::SystemClock>();
    }
    bundle->orchestrator = std::make_unique<orch::Orchestrator>(
        orch::topology_from_file(flags.config), bundle->launcher, bundle->registry,
        flags.state_dir, *bundle->clock);
    return bundle;
}

void print_submission(const orch::Submission& sub) {
    std::cout << sub.id << ": " << orch::to_string(sub.state);
    if (sub.state == orch::SubmissionState::Failed) {
        std::cout << " (stage " << sub.failed_stage << "): " << sub.failure_reason;
    }
    std::cout << std::endl;
}

int orchestrate_leaderboard(const OrchestrateFlags& flags, const std::string& queue,
                            std::uint64_t offset, std::uint64_t limit, bool as_json) {
    auto bundle = make_orchestrator(flags);
    const orch::LeaderboardPage page = bundle->orchestrator->leaderboard(queue, offset, limit);
    if (as_json) {
        json items = json::array();
        for (const auto& record : page.items) {
            items.push_back(orch::leaderboard_record_to_json(record));
        }
        std::cout << schema::canonical_dump(json{{"items", items},
                                                 {"offset", page.offset},
                                                 {"limit", page.limit},
                                                 {"totalCount", page.total_count}})
                  << std::endl;
        return 0;
    }
    std::printf("%-12s %-12s %-22s %-14s %-7s %-7s %-7s %-7s %-7s %-7s\n", "submission",
                "queue", "completed", "site", "inst-p", "inst-r", "inst-f1", "tok-p", "tok-r",
                "tok-f1");
    for (const auto& record : page.items) {
        for (const auto& [site_id, report] : record.site_reports) {
            std::printf("%-12s %-12s %-22s %-14s %-7.2f %-7.2f %-7.2f %-7.2f %-7.2f %-7.2f\n",
                        record.submission_id.c_str(), record.queue.c_str(),
                        record.completed_at.c_str(), site_id.c_str(),
                        report.instance.metrics.precision, report.instance.metrics.recall,
                        report.instance.metrics.f1, report.token.metrics.precision,
                        report.token.metrics.recall, report.token.metrics.f1);
        }
    }
    return 0;
}

int orchestrate_serve(const OrchestrateFlags& flags, const std::string& listen,
                      const std::string& port_file) {
    auto bundle = make_orchestrator(flags);
    orch::StatusApi api(*bundle->orchestrator);
    const auto [host, port] = parse_listen(listen);
    const int bound = api.start(host, port);
    if (!port_file.empty()) write_port_file(port_file, bound);
    std::cout << "orchestrator status api listening on " << host << ":" << bound << std::endl;
    wait_for_stop();
    api.stop();
    std::cout << "orchestrator status api stopped" << std::endl;
    return 0;
}

int run_guarded(const std::function<int()>& action) {
    try {
        return action();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const corpus::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const orch::OrchestratorError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return e.kind() == orch::OrchestratorError::Kind::Invalid ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-hostable federated evaluation sandbox for clinical-text annotators"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "1.0.0");
    std::function<int()> action;

    auto* serve = app.add_subcommand("serve", "run a long-lived component");
    serve->require_subcommand(1);
    {
        auto* cmd = serve->add_subcommand("data-node", "REST data node over a local store");
        auto data_dir = std::make_shared<std::string>();
        auto listen = std::make_shared<std::string>("127.0.0.1:0");
        auto port_file = std::make_shared<std::string>();
        cmd->add_option("--data-dir", *data_dir, "persistence directory")
            ->envname("SANDBOX_DATA_DIR")
            ->required();
        cmd->add_option("--listen", *listen, "host:port, port 0 for ephemeral")
            ->envname("SANDBOX_LISTEN");
        cmd->add_option("--port-file", *port_file, "write the bound port to this file")
            ->envname("SANDBOX_PORT_FILE");
        cmd->callback([&action, data_dir, listen, port_file] {
            action = [=] { return serve_data_node(*data_dir, *listen, *port_file); };
        });
    }
    {
        auto* cmd = serve->add_subcommand("annotator", "HTTP annotation tool");
        auto flags = std::make_shared<AnnotatorFlags>();
        auto listen = std::make_shared<std::string>("127.0.0.1:0");
        auto port_file = std::make_shared<std::string>();
        cmd->add_option("--annotator", flags->kind, "which tool to serve")
            ->check(CLI::IsMember({"reference", "gold-echo"}));
        cmd->add_option("--data-dir", flags->data_dir, "lexicon directory")
            ->envname("SANDBOX_DATA_DIR");
        cmd->add_option("--bundle", flags->bundle_dir, "bundle served by gold-echo");
        cmd->add_option("--perturb", flags->perturb, "perturbation applied by gold-echo")
            ->check(CLI::IsMember({"drop", "shift", "split", "duplicate", "retype"}));
        cmd->add_option("--rate", flags->rate, "perturbation rate in [0,1]");
        cmd->add_option("--perturb-seed", flags->seed, "perturbation rng seed");
        cmd->add_option("--delay-ms", flags->delay_ms, "artificial delay per note");
        cmd->add_option("--listen", *listen, "host:port, port 0 for ephemeral")
            ->envname("SANDBOX_LISTEN");
        cmd->add_option("--port-file", *port_file, "write the bound port to this file")
            ->envname("SANDBOX_PORT_FILE");
        cmd->callback([&action, flags, listen, port_file] {
            action = [=] { return serve_annotator(*flags, *listen, *port_file); };
        });
    }

    {
        auto* cmd = app.add_subcommand("generate", "generate a synthetic dataset bundle");
        auto config = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto data_dir = std::make_shared<std::string>("data");
        auto seed = std::make_shared<std::optional<std::uint64_t>>();
        cmd->add_option("--config", *config, "generator config json")
            ->envname("SANDBOX_CONFIG")
            ->required();
        cmd->add_option("--out", *out, "bundle output directory")
            ->envname("SANDBOX_OUT")
            ->required();
        cmd->add_option("--data-dir", *data_dir, "lexicon and template directory")
            ->envname("SANDBOX_DATA_DIR");
        cmd->add_option("--seed", *seed, "override the config seed")->envname("SANDBOX_SEED");
        cmd->callback([&action, config, out, data_dir, seed] {
            action = [=] { return cmd_generate(*config, *out, *data_dir, *seed); };
        });
    }

    {
        auto* cmd = app.add_subcommand("ingest", "push a bundle into a data node");
        auto bundle = std::make_shared<std::string>();
        auto endpoint = std::make_shared<std::string>();
        auto dataset = std::make_shared<std::string>();
        cmd->add_option("--bundle", *bundle, "bundle directory")->required();
        cmd->add_option("--endpoint", *endpoint, "data node host:port")
            ->envname("SANDBOX_ENDPOINT")
            ->required();
        cmd->add_option("--dataset", *dataset, "override the bundle's dataset id")
            ->envname("SANDBOX_DATASET");
        cmd->callback([&action, bundle, endpoint, dataset] {
            action = [=] { return cmd_ingest(*bundle, *endpoint, *dataset); };
        });
    }

    {
        auto* cmd = app.add_subcommand(
            "evaluate", "score one annotator against one data node's gold store");
        auto flags = std::make_shared<EvaluateFlags>();
        cmd->add_option("--endpoint", flags->endpoint, "data node host:port")
            ->envname("SANDBOX_ENDPOINT")
            ->required();
        cmd->add_option("--tool-endpoint", flags->tool_endpoint, "running annotator host:port");
        cmd->add_option("--tool-cmd", flags->tool_cmd, "command that serves the annotator");
        cmd->add_option("--task", flags->task, "task type, e.g. DATE")
            ->envname("SANDBOX_TASK")
            ->required();
        cmd->add_option("--dataset", flags->dataset, "dataset id")
            ->envname("SANDBOX_DATASET")
            ->required();
        cmd->add_option("--gold-store", flags->gold_store, "gold annotation store id")
            ->envname("SANDBOX_GOLD_STORE");
        cmd->add_option("--fhir-store", flags->fhir_store, "note store id");
        cmd->add_option("--out", flags->out, "write the json report here")
            ->envname("SANDBOX_OUT");
        cmd->add_option("--wall-clock-ms", flags->wall_clock_ms, "stage budget");
        cmd->add_option("--per-note-timeout-ms", flags->per_note_timeout_ms,
                        "per-request budget");
        cmd->callback([&action, flags] {
            action = [=] { return cmd_evaluate(*flags); };
        });
    }

    {
        auto* cmd = app.add_subcommand("orchestrate", "drive the submission workflow");
        cmd->require_subcommand(1);
        auto flags = std::make_shared<OrchestrateFlags>();
        cmd->add_option("--config", flags->config, "topology json")
            ->envname("SANDBOX_CONFIG")
            ->required();
        cmd->add_option("--state-dir", flags->state_dir, "orchestrator state directory")
            ->envname("SANDBOX_STATE_DIR")
            ->required();
        cmd->add_flag("--logical-clock", flags->logical_clock,
                      "deterministic timestamps for reproducible runs");

        auto* submit = cmd->add_subcommand("submit", "enqueue a tool on a task queue");
        auto tool_endpoint = std::make_shared<std::string>();
        auto tool_cmd = std::make_shared<std::string>();
        auto queue = std::make_shared<std::string>();
        submit->add_option("--tool-endpoint", *tool_endpoint, "running annotator host:port");
        submit->add_option("--tool-cmd", *tool_cmd, "command that serves the annotator");
        submit->add_option("--queue", *queue, "task queue, e.g. DATE")->required();
        submit->callback([&action, flags, tool_endpoint, tool_cmd, queue] {
            action = [=] {
                auto bundle = make_orchestrator(*flags);
                const std::string id = bundle->orchestrator->submit(
                    tool_ref_from_flags(*tool_endpoint, *tool_cmd), *queue);
                std::cout << id << std::endl;
                return 0;
            };
        });

        auto* run = cmd->add_subcommand("run", "run a submission to a terminal state");
        auto run_id = std::make_shared<std::string>();
        run->add_option("--id", *run_id, "submission id")->required();
        run->callback([&action, flags, run_id] {
            action = [=] {
                auto bundle = make_orchestrator(*flags);
                const orch::Submission sub = bundle->orchestrator->run_submission(*run_id);
                print_submission(sub);
                return sub.state == orch::SubmissionState::Complete ? 0 : 1;
            };
        });

        auto* status = cmd->add_subcommand("status", "show a submission's state");
        auto status_id = std::make_shared<std::string>();
        status->add_option("--id", *status_id, "submission id")->required();
        status->callback([&action, flags, status_id] {
            action = [=] {
                auto bundle = make_orchestrator(*flags);
                print_submission(bundle->orchestrator->get_submission(*status_id));
                return 0;
            };
        });

        auto* board = cmd->add_subcommand("leaderboard", "list published results");
        auto board_queue = std::make_shared<std::string>();
        auto offset = std::make_shared<std::uint64_t>(0);
        auto limit = std::make_shared<std::uint64_t>(100);
        auto as_json = std::make_shared<bool>(false);
        board->add_option("--queue", *board_queue, "filter by task queue");
        board->add_option("--offset", *offset, "page offset");
        board->add_option("--limit", *limit, "page size");
        board->add_flag("--json", *as_json, "print the page as canonical json");
        board->callback([&action, flags, board_queue, offset, limit, as_json] {
            action = [=] {
                return orchestrate_leaderboard(*flags, *board_queue, *offset, *limit, *as_json);
            };
        });

        auto* api = cmd->add_subcommand("serve", "serve the read-only status api");
        auto listen = std::make_shared<std::string>("127.0.0.1:0");
        auto port_file = std::make_shared<std::string>();
        api->add_option("--listen", *listen, "host:port, port 0 for ephemeral")
            ->envname("SANDBOX_LISTEN");
        api->add_option("--port-file", *port_file, "write the bound port to this file")
            ->envname("SANDBOX_PORT_FILE");
        api->callback([&action, flags, listen, port_file] {
            action = [=] { return orchestrate_serve(*flags, *listen, *port_file); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return run_guarded(action);
}
