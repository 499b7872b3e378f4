#include <doctest.h>

#include <fstream>
#include <set>

#include "sandbox/bundle.hpp"
#include "sandbox/corpus.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/utf8.hpp"
#include "sandbox/validation.hpp"
#include "support/fixtures.hpp"

using namespace sandbox;

namespace {

const std::filesystem::path kDataDir = SANDBOX_TEST_DATA_DIR;

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << content;
}

// Smallest pool layout load_pools accepts.
void write_min_pools(const std::filesystem::path& dir, const std::string& templates) {
    write_file(dir / "lexicons" / "given_names.txt", "Ada\n");
    write_file(dir / "lexicons" / "family_names.txt", "Lovelace\n");
    write_file(dir / "lexicons" / "locations.txt", "Seattle\n");
    write_file(dir / "corpus" / "street_names.txt", "Main\n");
    write_file(dir / "corpus" / "domains.txt", "example.org\n");
    write_file(dir / "corpus" / "fillers.txt", "Patient seen today.\n");
    write_file(dir / "corpus" / "templates.txt", templates);
}

}  // namespace

TEST_CASE("pool files skip comments and blank lines and strip CR") {
    fixtures::TempDir dir("pools");
    write_min_pools(dir.path(), "Follow up on {DATE} as planned.\n");
    write_file(dir / "lexicons" / "given_names.txt",
               "# header\n\nAda\r\nGrace\n  \n# trailing\n");
    const auto pools = corpus::load_pools(dir.path());
    CHECK(pools.given_names == std::vector<std::string>{"Ada", "Grace", "  "});
    REQUIRE(pools.templates.count("DATE"));
    CHECK(pools.templates.at("DATE").size() == 1);
}

TEST_CASE("pool loading failures raise config errors") {
    SUBCASE("missing directory") {
        CHECK_THROWS_AS(corpus::load_pools("/nonexistent/sandbox-pools"), corpus::ConfigError);
    }
    SUBCASE("pool file with no entries") {
        fixtures::TempDir dir("pools");
        write_min_pools(dir.path(), "Follow up on {DATE} as planned.\n");
        write_file(dir / "corpus" / "fillers.txt", "# only comments\n\n");
        CHECK_THROWS_WITH_AS(corpus::load_pools(dir.path()),
                             doctest::Contains("fillers.txt"), corpus::ConfigError);
    }
    SUBCASE("template without placeholder") {
        fixtures::TempDir dir("pools");
        write_min_pools(dir.path(), "no placeholder here\n");
        CHECK_THROWS_AS(corpus::load_pools(dir.path()), corpus::ConfigError);
    }
    SUBCASE("template with two placeholders") {
        fixtures::TempDir dir("pools");
        write_min_pools(dir.path(), "both {DATE} and {DATE} here\n");
        CHECK_THROWS_AS(corpus::load_pools(dir.path()), corpus::ConfigError);
    }
}

TEST_CASE("config defaults and overrides") {
    fixtures::TempDir dir("config");
    SUBCASE("empty object uses defaults") {
        write_file(dir / "c.json", "{}");
        const auto config = corpus::config_from_json_file(dir / "c.json");
        CHECK(config.seed == 0);
        CHECK(config.note_count == 1);
        CHECK(config.id.empty());
        CHECK(config.note_types == std::vector<std::string>{"loinc:LP29684-5"});
        CHECK(config.category_density.empty());
    }
    SUBCASE("full object") {
        write_file(dir / "c.json",
                   R"({"seed":42,"noteCount":20,"id":"seed-42",)"
                   R"("noteTypes":["loinc:LP29684-5","loinc:LP29708-2"],)"
                   R"("categoryDensity":{"DATE":1.5,"ID":0.0}})");
        const auto config = corpus::config_from_json_file(dir / "c.json");
        CHECK(config.seed == 42);
        CHECK(config.note_count == 20);
        CHECK(config.id == "seed-42");
        CHECK(config.note_types.size() == 2);
        CHECK(config.category_density.at("DATE") == 1.5);
        CHECK(config.category_density.at("ID") == 0.0);
    }
}

TEST_CASE("config rejections") {
    fixtures::TempDir dir("config");
    const auto expect_reject = [&](const std::string& body) {
        write_file(dir / "bad.json", body);
        CHECK_THROWS_AS(corpus::config_from_json_file(dir / "bad.json"), corpus::ConfigError);
    };
    expect_reject("{not json");
    expect_reject("[]");
    expect_reject(R"({"seed":-1})");
    expect_reject(R"({"noteCount":0})");
    expect_reject(R"({"noteTypes":[]})");
    expect_reject(R"({"categoryDensity":{"DATE":-0.5}})");
    expect_reject(R"({"categoryDensity":{"DATE":"high"}})");
    CHECK_THROWS_AS(corpus::config_from_json_file(dir / "missing.json"), corpus::ConfigError);
}

TEST_CASE("generation is deterministic and self-consistent") {
    schema::TaskRegistry registry;
    const auto pools = corpus::load_pools(kDataDir);
    corpus::CorpusConfig config;
    config.seed = 7;
    config.note_count = 30;

    const auto bundle = corpus::generate_corpus(config, pools, registry);
    const auto again = corpus::generate_corpus(config, pools, registry);
    CHECK(schema::bundle_files(bundle, registry) == schema::bundle_files(again, registry));

    config.seed = 8;
    const auto other = corpus::generate_corpus(config, pools, registry);
    CHECK(schema::bundle_files(bundle, registry) != schema::bundle_files(other, registry));
}

TEST_CASE("generated bundles validate cleanly") {
    schema::TaskRegistry registry;
    const auto pools = corpus::load_pools(kDataDir);
    corpus::CorpusConfig config;
    config.seed = 11;
    config.note_count = 25;
    const auto bundle = corpus::generate_corpus(config, pools, registry);

    const auto result = schema::validate_bundle(bundle, registry);
    CHECK(result.ok());
    CHECK(result.violations().empty());

    CHECK(bundle.manifest.id == "synthetic-11");
    CHECK(bundle.manifest.note_count == 25);
    CHECK(bundle.notes.size() == 25);
    CHECK(bundle.notes[0].identifier == "synthetic-11-note-000001");
    CHECK(bundle.notes[0].patient_id == "synthetic-11-patient-000001");
    CHECK(bundle.notes[1].patient_id == "synthetic-11-patient-000001");
    CHECK(bundle.notes[2].patient_id == "synthetic-11-patient-000002");
    CHECK(bundle.manifest.categories ==
          std::vector<std::string>{"DATE", "PERSON_NAME", "ID", "CONTACT", "LOCATION"});

    for (const auto& [category, anns] : bundle.gold) {
        CHECK(!anns.empty());
        for (const auto& ann : anns) {
            CHECK(ann.category == category);
        }
    }
}

TEST_CASE("gold spans quote the note text exactly") {
    schema::TaskRegistry registry;
    const auto pools = corpus::load_pools(kDataDir);
    corpus::CorpusConfig config;
    config.seed = 3;
    config.note_count = 12;
    const auto bundle = corpus::generate_corpus(config, pools, registry);

    std::map<std::string, const schema::ClinicalNote*> by_id;
    for (const auto& note : bundle.notes) {
        by_id[note.identifier] = &note;
    }
    std::size_t checked = 0;
    for (const auto& [category, anns] : bundle.gold) {
        for (const auto& ann : anns) {
            REQUIRE(by_id.count(ann.note_id));
            CHECK(utf8::substr(by_id.at(ann.note_id)->text, ann.start, ann.length) == ann.text);
            ++checked;
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("density controls planned annotations per note") {
    schema::TaskRegistry registry;
    const auto pools = corpus::load_pools(kDataDir);
    corpus::CorpusConfig config;
    config.seed = 5;
    config.note_count = 40;
    config.id = "dense";
    config.category_density = {{"DATE", 2.0}, {"PERSON_NAME", 0.0}};

    const auto bundle = corpus::generate_corpus(config, pools, registry);
    CHECK(bundle.manifest.categories == std::vector<std::string>{"DATE", "PERSON_NAME"});
    CHECK(bundle.gold.at("DATE").size() == 80);
    CHECK(bundle.gold.at("PERSON_NAME").empty());
    CHECK(!bundle.gold.count("ID"));

    const auto tallies = corpus::tally_bundle(bundle);
    REQUIRE(tallies.size() == 2);
    CHECK(tallies[0].category == "DATE");
    CHECK(tallies[0].annotations == 80);
    CHECK(tallies[0].notes_with == 40);
    CHECK(tallies[1].category == "PERSON_NAME");
    CHECK(tallies[1].annotations == 0);
    CHECK(tallies[1].notes_with == 0);
}

TEST_CASE("generation rejects unusable configs") {
    schema::TaskRegistry registry;
    const auto pools = corpus::load_pools(kDataDir);
    corpus::CorpusConfig config;
    config.category_density = {{"MYSTERY", 1.0}};
    CHECK_THROWS_WITH_AS(corpus::generate_corpus(config, pools, registry),
                         doctest::Contains("MYSTERY"), corpus::ConfigError);

    fixtures::TempDir dir("pools");
    write_min_pools(dir.path(), "Follow up on {DATE} as planned.\n");
    const auto sparse = corpus::load_pools(dir.path());
    corpus::CorpusConfig person;
    person.category_density = {{"PERSON_NAME", 1.0}};
    CHECK_THROWS_WITH_AS(corpus::generate_corpus(person, sparse, registry),
                         doctest::Contains("PERSON_NAME"), corpus::ConfigError);
}

TEST_CASE("perturb mode names round trip") {
    using corpus::PerturbMode;
    for (const auto mode : {PerturbMode::Drop, PerturbMode::Shift, PerturbMode::Split,
                            PerturbMode::Duplicate, PerturbMode::Retype}) {
        CHECK(corpus::perturb_mode_from_string(corpus::to_string(mode)) == mode);
    }
    CHECK_THROWS_AS(corpus::perturb_mode_from_string("scramble"), corpus::ConfigError);

    schema::TaskRegistry registry;
    CHECK_THROWS_AS(
        corpus::perturb_predictions({}, PerturbMode::Drop, 1.5, 0, registry),
        std::invalid_argument);
    CHECK_THROWS_AS(
        corpus::perturb_predictions({}, PerturbMode::Drop, -0.1, 0, registry),
        std::invalid_argument);
}
