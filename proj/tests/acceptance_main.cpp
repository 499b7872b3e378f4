// End-to-end acceptance checks. Run as:
//   acceptance <sandbox-cli> <data-dir>
// Prints one PASS/FAIL line per criterion; exit code is the failure count.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "sandbox/annotator.hpp"
#include "sandbox/bundle.hpp"
#include "sandbox/clock.hpp"
#include "sandbox/corpus.hpp"
#include "sandbox/launcher.hpp"
#include "sandbox/metrics.hpp"
#include "sandbox/node_client.hpp"
#include "sandbox/node_service.hpp"
#include "sandbox/node_store.hpp"
#include "sandbox/orchestrator.hpp"
#include "sandbox/rng.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/tool_client.hpp"
#include "sandbox/transfer.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

namespace fs = std::filesystem;
using namespace sandbox;
using nlohmann::json;

namespace {

std::string g_cli;
fs::path g_data_dir;
int g_failures = 0;

struct CheckError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& what) {
    if (!condition) throw CheckError(what);
}

std::string num(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

void run_criterion(int number, const char* title, const std::function<void()>& body) {
    try {
        body();
        std::printf("PASS %2d  %s\n", number, title);
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("FAIL %2d  %s: %s\n", number, title, e.what());
    }
    std::fflush(stdout);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------
// 1. F1 self-consistency on a frozen score table.

struct PublishedCell {
    const char* tool;
    const char* site;
    const char* level;
    const char* category;
    double p, r, f1;
};

// Two annotation tools scored against four corpora at both levels. P and R
// are printed at two decimals; the check derives counts that reproduce them
// and confirms the printed F1 follows from compute_prf within +-0.01.
const PublishedCell kPublished[] = {
    {"tool-a", "site-1", "instance", "DATE", 0.77, 0.88, 0.82},
    {"tool-a", "site-1", "instance", "PERSON_NAME", 0.29, 0.68, 0.41},
    {"tool-a", "site-1", "instance", "ID", 0.34, 0.90, 0.49},
    {"tool-a", "site-1", "instance", "CONTACT", 0.31, 0.99, 0.47},
    {"tool-a", "site-1", "instance", "LOCATION", 0.27, 0.23, 0.25},
    {"tool-a", "site-1", "token", "DATE", 0.79, 0.89, 0.84},
    {"tool-a", "site-1", "token", "PERSON_NAME", 0.51, 0.86, 0.64},
    {"tool-a", "site-1", "token", "ID", 0.37, 0.94, 0.53},
    {"tool-a", "site-1", "token", "CONTACT", 0.43, 0.99, 0.60},
    {"tool-a", "site-1", "token", "LOCATION", 0.52, 0.74, 0.61},
    {"tool-a", "site-2", "instance", "DATE", 0.95, 0.99, 0.97},
    {"tool-a", "site-2", "instance", "PERSON_NAME", 0.25, 0.55, 0.34},
    {"tool-a", "site-2", "token", "DATE", 0.95, 0.99, 0.97},
    {"tool-a", "site-2", "token", "PERSON_NAME", 0.71, 1.00, 0.83},
    {"tool-a", "site-3", "instance", "DATE", 0.76, 0.94, 0.84},
    {"tool-a", "site-3", "instance", "PERSON_NAME", 0.19, 0.63, 0.29},
    {"tool-a", "site-3", "instance", "ID", 0.13, 0.90, 0.23},
    {"tool-a", "site-3", "instance", "CONTACT", 0.25, 0.85, 0.39},
    {"tool-a", "site-3", "instance", "LOCATION", 0.09, 0.14, 0.11},
    {"tool-a", "site-3", "token", "DATE", 0.77, 0.94, 0.85},
    {"tool-a", "site-3", "token", "PERSON_NAME", 0.41, 0.86, 0.56},
    {"tool-a", "site-3", "token", "ID", 0.10, 0.89, 0.18},
    {"tool-a", "site-3", "token", "CONTACT", 0.30, 0.87, 0.45},
    {"tool-a", "site-3", "token", "LOCATION", 0.28, 0.51, 0.36},
    {"tool-a", "site-4", "instance", "DATE", 0.85, 0.91, 0.88},
    {"tool-a", "site-4", "instance", "PERSON_NAME", 0.19, 0.62, 0.29},
    {"tool-a", "site-4", "instance", "ID", 0.22, 0.83, 0.35},
    {"tool-a", "site-4", "instance", "CONTACT", 0.38, 0.64, 0.48},
    {"tool-a", "site-4", "instance", "LOCATION", 0.15, 0.14, 0.14},
    {"tool-a", "site-4", "token", "DATE", 0.87, 0.92, 0.89},
    {"tool-a", "site-4", "token", "PERSON_NAME", 0.38, 0.84, 0.52},
    {"tool-a", "site-4", "token", "ID", 0.21, 0.79, 0.33},
    {"tool-a", "site-4", "token", "CONTACT", 0.39, 0.81, 0.53},
    {"tool-a", "site-4", "token", "LOCATION", 0.27, 0.43, 0.33},
    {"tool-b", "site-1", "instance", "DATE", 0.92, 0.91, 0.91},
    {"tool-b", "site-1", "instance", "PERSON_NAME", 0.91, 0.88, 0.89},
    {"tool-b", "site-1", "instance", "ID", 0.67, 0.65, 0.66},
    {"tool-b", "site-1", "instance", "CONTACT", 0.86, 0.93, 0.89},
    {"tool-b", "site-1", "instance", "LOCATION", 0.86, 0.79, 0.82},
    {"tool-b", "site-1", "token", "DATE", 0.93, 0.92, 0.92},
    {"tool-b", "site-1", "token", "PERSON_NAME", 0.96, 0.93, 0.94},
    {"tool-b", "site-1", "token", "ID", 0.65, 0.69, 0.67},
    {"tool-b", "site-1", "token", "CONTACT", 0.91, 0.95, 0.93},
    {"tool-b", "site-1", "token", "LOCATION", 0.96, 0.86, 0.91},
    {"tool-b", "site-2", "instance", "DATE", 0.92, 0.99, 0.95},
    {"tool-b", "site-2", "instance", "PERSON_NAME", 0.24, 0.20, 0.22},
    {"tool-b", "site-2", "token", "DATE", 0.91, 1.00, 0.95},
    {"tool-b", "site-2", "token", "PERSON_NAME", 0.51, 0.76, 0.61},
    {"tool-b", "site-3", "instance", "DATE", 0.89, 0.95, 0.92},
    {"tool-b", "site-3", "instance", "PERSON_NAME", 0.76, 0.80, 0.78},
    {"tool-b", "site-3", "instance", "ID", 0.51, 0.70, 0.59},
    {"tool-b", "site-3", "instance", "CONTACT", 0.42, 0.76, 0.54},
    {"tool-b", "site-3", "instance", "LOCATION", 0.37, 0.36, 0.36},
    {"tool-b", "site-3", "token", "DATE", 0.89, 0.95, 0.92},
    {"tool-b", "site-3", "token", "PERSON_NAME", 0.87, 0.85, 0.86},
    {"tool-b", "site-3", "token", "ID", 0.45, 0.67, 0.54},
    {"tool-b", "site-3", "token", "CONTACT", 0.43, 0.75, 0.55},
    {"tool-b", "site-3", "token", "LOCATION", 0.60, 0.40, 0.48},
    {"tool-b", "site-4", "instance", "DATE", 0.92, 0.93, 0.92},
    {"tool-b", "site-4", "instance", "PERSON_NAME", 0.79, 0.68, 0.73},
    {"tool-b", "site-4", "instance", "ID", 0.40, 0.42, 0.41},
    {"tool-b", "site-4", "instance", "CONTACT", 0.60, 0.76, 0.67},
    {"tool-b", "site-4", "instance", "LOCATION", 0.62, 0.47, 0.53},
    {"tool-b", "site-4", "token", "DATE", 0.93, 0.94, 0.93},
    {"tool-b", "site-4", "token", "PERSON_NAME", 0.86, 0.77, 0.81},
    {"tool-b", "site-4", "token", "ID", 0.36, 0.40, 0.38},
    {"tool-b", "site-4", "token", "CONTACT", 0.66, 0.76, 0.71},
    {"tool-b", "site-4", "token", "LOCATION", 0.68, 0.48, 0.56},
};

void criterion_1() {
    std::size_t checked = 0;
    for (const auto& cell : kPublished) {
        // Counts on a 10000 scale that encode the printed precision and
        // recall: tp/(tp+fp) = p and tp/(tp+fn) = r up to integer rounding.
        const auto tp = std::llround(10000.0 * cell.p * cell.r);
        const auto fp = std::llround(10000.0 * cell.r) - tp;
        const auto fn = std::llround(10000.0 * cell.p) - tp;
        metrics::MatchCounts counts;
        counts.tp = static_cast<std::uint64_t>(tp);
        counts.fp = static_cast<std::uint64_t>(fp);
        counts.fn = static_cast<std::uint64_t>(fn);
        const metrics::Metrics m = metrics::compute_prf(counts);

        const std::string where = std::string(cell.tool) + "/" + cell.site + "/" + cell.level +
                                  "/" + cell.category;
        require(std::abs(m.precision - cell.p) <= 1e-3,
                where + ": derived precision " + num(m.precision) + " != " + num(cell.p));
        require(std::abs(m.recall - cell.r) <= 1e-3,
                where + ": derived recall " + num(m.recall) + " != " + num(cell.r));
        require(std::abs(m.f1 - cell.f1) <= 0.01 + 1e-9,
                where + ": f1 " + num(m.f1) + " not within 0.01 of " + num(cell.f1));
        ++checked;
    }
    require(checked == 68, "expected 68 table cells, saw " + std::to_string(checked));
}

// ---------------------------------------------------------------------------
// 2. Matcher agreement with an independent oracle.

void criterion_2() {
    rng::SplitMix64 rng(2024);
    const std::size_t pairs = 600;
    for (std::size_t i = 0; i < pairs; ++i) {
        const oracle::RandomPair pair = oracle::random_pair(rng, 50);
        const auto inst = metrics::match_instances(pair.gold, pair.pred);
        const auto inst_ref = oracle::naive_match_instances(pair.gold, pair.pred);
        require(inst.tp == inst_ref.tp && inst.fp == inst_ref.fp && inst.fn == inst_ref.fn,
                "instance counts diverge from oracle on pair " + std::to_string(i));
        const auto tok = metrics::match_tokens(pair.gold, pair.pred);
        const auto tok_ref = oracle::naive_match_tokens(pair.gold, pair.pred);
        require(tok.tp == tok_ref.tp && tok.fp == tok_ref.fp && tok.fn == tok_ref.fn,
                "token counts diverge from oracle on pair " + std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// 3. Analytic scores under drop and duplicate perturbations.

std::vector<schema::TextAnnotation> date_golds(std::size_t n) {
    std::vector<schema::TextAnnotation> golds;
    for (std::size_t i = 0; i < n; ++i) {
        golds.push_back(fixtures::make_ann("note-" + std::to_string(i), 3, 10, "12/26/2020",
                                           "DATE"));
    }
    return golds;
}

void criterion_3() {
    schema::TaskRegistry registry;
    const schema::TaskType date = *registry.find("DATE");

    for (const auto& [n, rate] : std::vector<std::pair<std::size_t, double>>{
             {5, 0.0}, {8, 0.25}, {10, 0.3}, {7, 0.5}, {12, 0.75}, {50, 0.42}}) {
        const auto gold = date_golds(n);
        const auto pred =
            corpus::perturb_predictions(gold, corpus::PerturbMode::Drop, rate, 7, registry);
        const auto d = static_cast<std::uint64_t>(rate * static_cast<double>(n));
        const auto report = metrics::evaluate_category(gold, pred, date);
        const double want_recall =
            static_cast<double>(n - d) / static_cast<double>(n);
        require(report.instance.metrics.precision == 1.0,
                "drop n=" + std::to_string(n) + " precision " +
                    num(report.instance.metrics.precision) + " != 1");
        require(report.instance.metrics.recall == want_recall,
                "drop n=" + std::to_string(n) + " recall " +
                    num(report.instance.metrics.recall) + " != " + num(want_recall));
    }

    for (const auto& [n, rate] : std::vector<std::pair<std::size_t, double>>{
             {6, 0.2}, {10, 0.5}, {25, 1.0}, {9, 0.34}}) {
        const auto gold = date_golds(n);
        const auto pred =
            corpus::perturb_predictions(gold, corpus::PerturbMode::Duplicate, rate, 7, registry);
        const auto d = static_cast<std::uint64_t>(rate * static_cast<double>(n));
        require(pred.size() == n + d, "duplicate produced wrong prediction count");
        const auto report = metrics::evaluate_category(gold, pred, date);
        const double want_precision = static_cast<double>(n) / static_cast<double>(n + d);
        require(report.instance.metrics.precision == want_precision,
                "duplicate n=" + std::to_string(n) + " precision " +
                    num(report.instance.metrics.precision) + " != " + num(want_precision));
        require(report.instance.metrics.recall == 1.0,
                "duplicate n=" + std::to_string(n) + " recall " +
                    num(report.instance.metrics.recall) + " != 1");
    }
}

// ---------------------------------------------------------------------------
// 4. Split-name predictions: separate instances, identical tokens.

void criterion_4() {
    schema::TaskRegistry registry;
    const schema::TaskType person = *registry.find("PERSON_NAME");
    const std::vector<schema::TextAnnotation> gold{
        fixtures::make_ann("n1", 17, 11, "David Smith", "PERSON_NAME")};
    const std::vector<schema::TextAnnotation> pred{
        fixtures::make_ann("n1", 17, 5, "David", "PERSON_NAME"),
        fixtures::make_ann("n1", 23, 5, "Smith", "PERSON_NAME"),
        fixtures::make_ann("n1", 17, 11, "David Smith", "PERSON_NAME")};

    const auto report = metrics::evaluate_category(gold, pred, person);
    const auto& inst = report.instance;
    require(inst.counts.tp == 1 && inst.counts.fp == 2 && inst.counts.fn == 0,
            "instance counts are not tp=1 fp=2 fn=0");
    require(inst.metrics.precision == 1.0 / 3.0,
            "instance precision " + num(inst.metrics.precision) + " != 1/3");
    require(inst.metrics.recall == 1.0, "instance recall != 1");
    require(std::abs(inst.metrics.f1 - 0.5) <= 1e-12,
            "instance f1 " + num(inst.metrics.f1) + " != 0.5");

    const auto& tok = report.token;
    require(tok.counts.tp == 2 && tok.counts.fp == 0 && tok.counts.fn == 0,
            "token counts are not tp=2 fp=0 fn=0");
    require(tok.metrics.precision == 1.0 && tok.metrics.recall == 1.0 && tok.metrics.f1 == 1.0,
            "token metrics are not all exactly 1");
}

// ---------------------------------------------------------------------------
// 5. The served reference annotator reproduces the worked example.

launch::ToolRef reference_tool_ref() {
    launch::ToolRef ref;
    ref.kind = launch::ToolRef::Kind::Subprocess;
    ref.command = {g_cli,          "serve",      "annotator", "--annotator",
                   "reference",    "--data-dir", g_data_dir.string()};
    return ref;
}

void criterion_5() {
    fixtures::TempDir dir("accept-ref");
    launch::SubprocessLauncher launcher;
    auto launched = launcher.launch(reference_tool_ref(), dir / "tool.log");

    std::vector<schema::TextAnnotation> anns;
    try {
        tool::ToolClient client(launched->endpoint());
        const auto note = fixtures::make_note(
            "note-1", "On 12/26/2020, Ms. Chloe Price met with Dr. Prescott in Seattle.");
        anns = client.annotate(note, schema::tasks::date());
    } catch (...) {
        launched->shutdown();
        throw;
    }
    launched->shutdown();

    require(anns.size() == 1, "expected exactly one date annotation, got " +
                                  std::to_string(anns.size()));
    const auto& ann = anns[0];
    require(ann.start == 3, "start " + std::to_string(ann.start) + " != 3");
    require(ann.length == 10, "length " + std::to_string(ann.length) + " != 10");
    require(ann.text == "12/26/2020", "text '" + ann.text + "' != '12/26/2020'");
    const auto format = ann.attributes.find("dateFormat");
    require(format != ann.attributes.end() && format->second == "MM/DD/YYYY",
            "dateFormat attribute missing or not MM/DD/YYYY");
}

// ---------------------------------------------------------------------------
// Federated harness shared by criteria 6 through 9.

struct FedHarness {
    schema::TaskRegistry registry;
    fixtures::TempDir root{"accept-fed"};

    struct Site {
        std::string id;
        std::unique_ptr<node::NodeStore> store;
        std::unique_ptr<node::NodeService> service;
        std::string endpoint;
        std::map<std::string, std::uint64_t> gold_counts;
        std::vector<std::string> note_texts;
    };
    std::vector<Site> sites;  // [0] TEST, [1] and [2] FEDERATED

    json topology;
    fs::path merged_dir;
    launch::ToolRef echo_ref;
    launch::StandardLauncher launcher;

    fs::path state1;
    fs::path state2;
    double flow_seconds = 0.0;

    // Second run kept alive so later criteria can extend it.
    std::unique_ptr<clockutil::LogicalClock> clock2;
    std::unique_ptr<orch::Orchestrator> orch2;

    FedHarness() {
        const auto pools = corpus::load_pools(g_data_dir);
        schema::DatasetBundle merged;
        merged.manifest.id = "accept-merged";

        topology = json{{"sites", json::array()}};
        std::uint64_t seed = 201;
        for (const std::string id : {"accept-test", "accept-a", "accept-b"}) {
            corpus::CorpusConfig config;
            config.seed = seed++;
            config.note_count = 100;
            config.id = id;
            const auto bundle = corpus::generate_corpus(config, pools, registry);

            Site site;
            site.id = id;
            for (const auto& [category, anns] : bundle.gold) {
                site.gold_counts[category] = anns.size();
                require(!anns.empty(), id + " generated no " + category + " gold");
            }
            for (const auto& note : bundle.notes) site.note_texts.push_back(note.text);

            site.store = std::make_unique<node::NodeStore>(root / ("node-" + id), registry);
            site.service = std::make_unique<node::NodeService>(*site.store);
            const int port = site.service->start("127.0.0.1", 0);
            site.endpoint = "127.0.0.1:" + std::to_string(port);
            node::NodeClient client(site.endpoint);
            transfer::ingest_bundle(client, bundle, registry);

            merged.notes.insert(merged.notes.end(), bundle.notes.begin(), bundle.notes.end());
            for (const auto& [category, anns] : bundle.gold) {
                auto& into = merged.gold[category];
                into.insert(into.end(), anns.begin(), anns.end());
            }

            json gold_stores = json::object();
            for (const auto& task : registry.all()) {
                gold_stores[task.name()] = {{"datasetId", id},
                                            {"annotationStoreId", transfer::gold_store_id(task)}};
            }
            topology["sites"].push_back(
                json{{"siteId", id},
                     {"endpoint", site.endpoint},
                     {"role", id == "accept-test" ? "TEST" : "FEDERATED"},
                     {"noteStore", {{"datasetId", id}, {"fhirStoreId", "notes"}}},
                     {"goldStores", gold_stores}});
            sites.push_back(std::move(site));
        }

        merged.manifest.note_count = merged.notes.size();
        for (const auto& [category, anns] : merged.gold) {
            (void)anns;
            merged.manifest.categories.push_back(category);
        }
        merged_dir = root / "merged";
        schema::write_bundle(merged, merged_dir, registry);

        echo_ref.kind = launch::ToolRef::Kind::Subprocess;
        echo_ref.command = {g_cli,       "serve",    "annotator",
                            "--annotator", "gold-echo", "--bundle",
                            merged_dir.string()};

        state1 = root / "state1";
        state2 = root / "state2";
    }

    std::uint64_t federated_requests() const {
        return sites[1].service->request_count() + sites[2].service->request_count();
    }

    // Submits the given tool to every queue in registry order and drives each
    // submission to a terminal state.
    std::vector<orch::Submission> run_all_queues(orch::Orchestrator& orchestrator,
                                                 const launch::ToolRef& tool) {
        std::vector<orch::Submission> results;
        for (const auto& task : registry.all()) {
            const std::string id = orchestrator.submit(tool, task.name());
            results.push_back(orchestrator.run_submission(id));
        }
        return results;
    }
};

std::optional<FedHarness> g_fed;

FedHarness& fed() {
    require(g_fed.has_value(), "federated harness unavailable (criterion 6 setup failed)");
    return *g_fed;
}

// ---------------------------------------------------------------------------
// 6. Federated flow completes and is byte-for-byte reproducible.

void criterion_6() {
    g_fed.emplace();
    auto& h = *g_fed;

    const auto t0 = std::chrono::steady_clock::now();

    const auto check_run = [&](orch::Orchestrator& orchestrator,
                               const std::vector<orch::Submission>& subs) {
        require(subs.size() == 5, "expected 5 submissions");
        for (const auto& sub : subs) {
            require(sub.state == orch::SubmissionState::Complete,
                    sub.id + " (" + sub.queue + ") ended " + orch::to_string(sub.state) + " " +
                        sub.failure_reason);
        }
        const auto page = orchestrator.leaderboard("", 0, 100);
        require(page.total_count == 5, "leaderboard holds " +
                                           std::to_string(page.total_count) + " records, not 5");
        for (const auto& record : page.items) {
            require(record.site_reports.size() == 3,
                    record.submission_id + " has " +
                        std::to_string(record.site_reports.size()) + " site reports, not 3");
            for (const auto& [site_id, report] : record.site_reports) {
                require(report.category == record.queue,
                        site_id + " report category " + report.category + " != queue " +
                            record.queue);
            }
        }
    };

    {
        clockutil::LogicalClock clock1;
        orch::Orchestrator orch1(orch::topology_from_json(h.topology), h.launcher, h.registry,
                                 h.state1, clock1);
        check_run(orch1, h.run_all_queues(orch1, reference_tool_ref()));
    }

    h.clock2 = std::make_unique<clockutil::LogicalClock>();
    h.orch2 = std::make_unique<orch::Orchestrator>(orch::topology_from_json(h.topology),
                                                   h.launcher, h.registry, h.state2, *h.clock2);
    check_run(*h.orch2, h.run_all_queues(*h.orch2, reference_tool_ref()));

    h.flow_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string board1 = read_file(h.state1 / "leaderboard.jsonl");
    const std::string board2 = read_file(h.state2 / "leaderboard.jsonl");
    require(!board1.empty(), "first run published nothing");
    require(board1 == board2, "leaderboard bytes differ between the two runs");
    require(h.flow_seconds < 300.0,
            "two runs took " + num(h.flow_seconds) + "s, budget is 300s");
}

// ---------------------------------------------------------------------------
// 7. Gold-echo scores a perfect 1.0 on every site and category.

void criterion_7() {
    auto& h = fed();
    require(h.orch2 != nullptr, "criterion 6 orchestrator unavailable");

    const auto subs = h.run_all_queues(*h.orch2, h.echo_ref);
    for (const auto& sub : subs) {
        require(sub.state == orch::SubmissionState::Complete,
                sub.id + " (" + sub.queue + ") ended " + orch::to_string(sub.state) + " " +
                    sub.failure_reason);

        const auto page = h.orch2->leaderboard(sub.queue, 0, 100);
        const orch::LeaderboardRecord* record = nullptr;
        for (const auto& item : page.items) {
            if (item.submission_id == sub.id) record = &item;
        }
        require(record != nullptr, sub.id + " missing from leaderboard");
        require(record->site_reports.size() == 3, sub.id + " does not cover all 3 sites");

        for (const auto& site : h.sites) {
            const auto it = record->site_reports.find(site.id);
            require(it != record->site_reports.end(), sub.id + " lacks a report for " + site.id);
            const auto& report = it->second;
            const std::string where = sub.queue + "@" + site.id;
            for (const auto& [level_name, level] :
                 {std::pair<const char*, const metrics::LevelReport&>{"instance",
                                                                      report.instance},
                  {"token", report.token}}) {
                require(level.metrics.precision == 1.0 && level.metrics.recall == 1.0 &&
                            level.metrics.f1 == 1.0,
                        where + " " + level_name + " metrics are not exactly 1");
                require(level.counts.fp == 0 && level.counts.fn == 0,
                        where + " " + level_name + " has errors");
            }
            require(report.instance.counts.tp == site.gold_counts.at(sub.queue),
                    where + " instance tp " + std::to_string(report.instance.counts.tp) +
                        " != gold count " + std::to_string(site.gold_counts.at(sub.queue)));
        }
    }
}

// ---------------------------------------------------------------------------
// 8. No federated note text appears in anything that leaves the sites.

void criterion_8() {
    auto& h = fed();
    require(h.orch2 != nullptr, "criterion 6 orchestrator unavailable");
    constexpr std::size_t kWindow = 12;

    std::unordered_set<std::string> windows;
    for (std::size_t s = 1; s < h.sites.size(); ++s) {
        for (const auto& text : h.sites[s].note_texts) {
            if (text.size() < kWindow) continue;
            for (std::size_t i = 0; i + kWindow <= text.size(); ++i) {
                windows.insert(text.substr(i, kWindow));
            }
        }
    }
    require(!windows.empty(), "no federated note text collected");

    std::uint64_t scanned = 0;
    const auto scan = [&](const std::string& body, const std::string& what) {
        if (body.size() < kWindow) return;
        for (std::size_t i = 0; i + kWindow <= body.size(); ++i) {
            require(windows.count(body.substr(i, kWindow)) == 0,
                    what + " contains federated note text: '..." + body.substr(i, kWindow) +
                        "...'");
        }
        ++scanned;
    };

    for (const fs::path& state : {h.state1, h.state2}) {
        scan(read_file(state / "leaderboard.jsonl"), state.filename().string() +
                                                         "/leaderboard.jsonl");
        for (const auto& entry : fs::directory_iterator(state / "logs")) {
            scan(read_file(entry.path()), "log " + entry.path().filename().string());
        }
    }

    for (const auto& sub : h.orch2->list_submissions()) {
        const json diag = h.orch2->diagnostics(sub.id, true);
        for (const auto& site_diag : diag.value("sites", json::array())) {
            if (site_diag.value("role", "") != "FEDERATED") continue;
            scan(schema::canonical_dump(site_diag), sub.id + " federated diagnostics");
        }
    }

    const auto page = h.orch2->leaderboard("", 0, 100);
    for (const auto& record : page.items) {
        scan(schema::canonical_dump(orch::leaderboard_record_to_json(record)),
             record.submission_id + " leaderboard record");
    }
    require(scanned > 10, "scanned suspiciously few artifacts");
}

// ---------------------------------------------------------------------------
// 9. A blown test budget fails the submission before any federated traffic.

void criterion_9() {
    auto& h = fed();

    json topology = h.topology;
    topology["sites"][0]["budget"] = {{"wallClockMs", 5000}, {"perNoteTimeoutMs", 30000}};
    launch::ToolRef slow = h.echo_ref;
    slow.command.push_back("--delay-ms");
    slow.command.push_back("1500");

    clockutil::LogicalClock clock;
    orch::Orchestrator orchestrator(orch::topology_from_json(topology), h.launcher, h.registry,
                                    h.root / "state-budget", clock);

    const std::uint64_t before = h.federated_requests();
    const std::string id = orchestrator.submit(slow, "DATE");
    const orch::Submission sub = orchestrator.run_submission(id);

    require(sub.state == orch::SubmissionState::Failed,
            "submission ended " + orch::to_string(sub.state) + ", expected FAILED");
    require(sub.failure_reason == "budget exceeded",
            "failure reason '" + sub.failure_reason + "' != 'budget exceeded'");
    require(sub.failed_stage == "TEST_SCORING",
            "failed stage '" + sub.failed_stage + "' != 'TEST_SCORING'");
    require(orchestrator.leaderboard("", 0, 100).total_count == 0,
            "failed submission reached the leaderboard");
    require(h.federated_requests() == before,
            "federated sites received requests despite the failed gate");
}

// ---------------------------------------------------------------------------
// 10. Data node concurrency, durable restart, canonical round trip.

void criterion_10() {
    schema::TaskRegistry registry;
    fixtures::TempDir dir("accept-node");
    const schema::AnnotationStoreRef gold_ref{"ds", "c10"};
    const schema::NoteStoreRef notes_ref{"ds", "notes"};

    std::set<std::string> ids;
    {
        node::NodeStore store(dir.path(), registry);
        store.create_dataset("ds");
        store.create_fhir_store(notes_ref);
        store.create_patient(notes_ref, "p1");
        store.create_note(notes_ref,
                          fixtures::make_note("n1", "On 12/26/2020, seen in Seattle."));
        store.create_annotation_store(gold_ref, "DATE");

        std::vector<std::thread> writers;
        std::vector<std::vector<std::string>> results(8);
        for (int t = 0; t < 8; ++t) {
            writers.emplace_back([&store, &gold_ref, &results, t] {
                for (int i = 0; i < 100; ++i) {
                    const auto stored = store.store_annotation(
                        gold_ref, fixtures::make_ann("n1", 3, 10, "12/26/2020", "DATE"));
                    results[t].push_back(stored.annotation_id);
                }
            });
        }
        for (auto& w : writers) w.join();
        for (const auto& r : results) ids.insert(r.begin(), r.end());

        require(ids.size() == 800, "writers produced " + std::to_string(ids.size()) +
                                       " distinct ids, not 800");
        const auto page = store.list_annotations(gold_ref, {0, 1000});
        require(page.total_count == 800, "store holds " + std::to_string(page.total_count) +
                                             " annotations, not 800");
    }

    node::NodeStore reborn(dir.path(), registry);
    const auto page = reborn.list_annotations(gold_ref, {0, 1000});
    require(page.total_count == 800, "restart recovered " + std::to_string(page.total_count) +
                                         " annotations, not 800");
    std::set<std::string> recovered;
    for (const auto& item : page.items) recovered.insert(item.annotation_id);
    require(recovered == ids, "recovered ids differ from written ids");
    require(reborn.get_note(notes_ref, "n1").text == "On 12/26/2020, seen in Seattle.",
            "restart lost the note");

    // Ingest a generated bundle over HTTP and export it back unchanged.
    const auto pools = corpus::load_pools(g_data_dir);
    corpus::CorpusConfig config;
    config.seed = 205;
    config.note_count = 30;
    config.id = "round-trip";
    const auto bundle = corpus::generate_corpus(config, pools, registry);

    fixtures::TempDir node_dir("accept-rt");
    node::NodeStore store(node_dir.path(), registry);
    node::NodeService service(store);
    const int port = service.start("127.0.0.1", 0);
    node::NodeClient client("127.0.0.1:" + std::to_string(port));
    transfer::ingest_bundle(client, bundle, registry);
    const auto exported = transfer::export_bundle(client, "round-trip", registry);
    service.stop();

    require(schema::bundle_files(exported, registry) == schema::bundle_files(bundle, registry),
            "exported bundle is not canonically identical to the ingested one");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: %s <sandbox-cli> <data-dir>\n", argv[0]);
        return 64;
    }
    g_cli = fs::absolute(argv[1]).string();
    g_data_dir = fs::absolute(argv[2]);

    run_criterion(1, "printed f1 follows from precision and recall across the score table",
                  criterion_1);
    run_criterion(2, "matchers agree with the naive oracle on 600 random pairs", criterion_2);
    run_criterion(3, "drop and duplicate perturbations score analytically", criterion_3);
    run_criterion(4, "split-name predictions count as separate instances", criterion_4);
    run_criterion(5, "served reference annotator reproduces the worked example", criterion_5);
    run_criterion(6, "federated flow completes twice with identical leaderboards", criterion_6);
    run_criterion(7, "gold-echo scores exactly one everywhere", criterion_7);
    run_criterion(8, "no federated note text leaves the sites", criterion_8);
    run_criterion(9, "a blown test budget blocks federated scoring", criterion_9);
    run_criterion(10, "data node survives concurrency, restart, and round trips", criterion_10);

    if (g_fed && g_fed->flow_seconds > 0.0) {
        std::printf("federated flow: %.1fs for two full runs\n", g_fed->flow_seconds);
    }
    std::printf("%d of 10 criteria failed\n", g_failures);
    return g_failures;
}
