#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "sandbox/bundle.hpp"
#include "sandbox/tasks.hpp"
#include "sandbox/types.hpp"
#include "sandbox/validation.hpp"
#include "support/fixtures.hpp"

using namespace sandbox;
using nlohmann::json;

TEST_CASE("task registry carries the five built-ins in fixed order") {
    schema::TaskRegistry registry;
    const auto all = registry.all();
    REQUIRE(all.size() == 5);
    CHECK(all[0].name() == "DATE");
    CHECK(all[1].name() == "PERSON_NAME");
    CHECK(all[2].name() == "ID");
    CHECK(all[3].name() == "CONTACT");
    CHECK(all[4].name() == "LOCATION");

    CHECK(all[1].gold_list_key() == "TextPersonNameAnnotations");
    CHECK(all[1].response_key() == "textPersonNameAnnotations");
    CHECK(all[1].file_stem() == "person_name");
    CHECK(all[0].response_key() == "textDateAnnotations");

    CHECK(registry.contains("CONTACT"));
    CHECK(!registry.contains("COVID_SYMPTOM"));
    CHECK(registry.find("LOCATION")->name() == "LOCATION");
}

TEST_CASE("new task types register without schema changes") {
    schema::TaskRegistry registry;
    registry.register_task("COVID_SYMPTOM", "CovidSymptom");
    REQUIRE(registry.contains("COVID_SYMPTOM"));
    CHECK(registry.find("COVID_SYMPTOM")->response_key() == "textCovidSymptomAnnotations");
    CHECK(registry.all().size() == 6);
    CHECK(registry.all().back().name() == "COVID_SYMPTOM");

    CHECK_THROWS_AS(registry.register_task("DATE", "Date"), std::invalid_argument);
    CHECK_THROWS_AS(registry.register_task("bad name", "BadName"), std::invalid_argument);
    CHECK_THROWS_AS(registry.register_task("OK_NAME", "not pascal"), std::invalid_argument);
}

TEST_CASE("canonical dump sorts keys and strips whitespace") {
    json j{{"zeta", 1}, {"alpha", json{{"b", 2}, {"a", 3}}}};
    CHECK(schema::canonical_dump(j) == R"({"alpha":{"a":3,"b":2},"zeta":1})");
}

TEST_CASE("note json round trip") {
    const auto note = fixtures::make_note("n1", "Patient was naïve to treatment.");
    const json j = schema::note_to_json(note);
    CHECK(j == json{{"identifier", "n1"},
                    {"patientId", "p1"},
                    {"text", "Patient was naïve to treatment."},
                    {"type", "loinc:LP29684-5"}});
    const auto back = schema::note_from_json(j);
    CHECK(back.identifier == note.identifier);
    CHECK(back.patient_id == note.patient_id);
    CHECK(back.text == note.text);
    CHECK(back.type == note.type);
}

TEST_CASE("note parsing rejects missing or mistyped fields") {
    CHECK_THROWS_AS(schema::note_from_json(json::array()), schema::WireError);
    CHECK_THROWS_AS(schema::note_from_json(json{{"identifier", "n1"}}), schema::WireError);
    CHECK_THROWS_AS(schema::note_from_json(json{{"identifier", 7},
                                                {"patientId", "p"},
                                                {"text", "t"},
                                                {"type", "y"}}),
                    schema::WireError);
}

TEST_CASE("annotation json carries no category and flattens attributes") {
    auto ann = fixtures::make_ann("n1", 3, 10, "12/26/2020", "DATE");
    ann.confidence = 95.5;
    ann.attributes["dateFormat"] = "MM/DD/YYYY";

    const json with_note = schema::annotation_to_json(ann);
    CHECK(with_note == json{{"noteId", "n1"},
                            {"start", 3},
                            {"length", 10},
                            {"text", "12/26/2020"},
                            {"confidence", 95.5},
                            {"dateFormat", "MM/DD/YYYY"}});
    CHECK(!with_note.contains("category"));

    const json bare = schema::annotation_to_json_without_note_id(ann);
    CHECK(!bare.contains("noteId"));

    const auto back = schema::annotation_from_json(with_note, "DATE");
    CHECK(back.note_id == "n1");
    CHECK(back.start == 3);
    CHECK(back.length == 10);
    CHECK(back.category == "DATE");
    CHECK(back.confidence == 95.5);
    CHECK(back.attributes.at("dateFormat") == "MM/DD/YYYY");
}

TEST_CASE("annotation without confidence omits the field") {
    const auto ann = fixtures::make_ann("n1", 0, 4, "text", "ID");
    const json j = schema::annotation_to_json(ann);
    CHECK(!j.contains("confidence"));
    const auto back = schema::annotation_from_json(j, "ID");
    CHECK(!back.confidence.has_value());
}

TEST_CASE("annotation parsing enforces the wire contract") {
    const json base{{"noteId", "n1"}, {"start", 0}, {"length", 4}, {"text", "abcd"}};

    CHECK_THROWS_AS(schema::annotation_from_json(json{{"start", 0}, {"length", 1}, {"text", "a"}},
                                                 "DATE"),
                    schema::WireError);
    json negative = base;
    negative["start"] = -1;
    CHECK_THROWS_AS(schema::annotation_from_json(negative, "DATE"), schema::WireError);
    json bad_conf = base;
    bad_conf["confidence"] = "high";
    CHECK_THROWS_AS(schema::annotation_from_json(bad_conf, "DATE"), schema::WireError);
    json bad_attr = base;
    bad_attr["dateFormat"] = 7;
    CHECK_THROWS_AS(schema::annotation_from_json(bad_attr, "DATE"), schema::WireError);
}

TEST_CASE("response annotations inherit and cross-check the request note") {
    const json no_note{{"start", 0}, {"length", 4}, {"text", "abcd"}};
    const auto inherited = schema::annotation_from_response_json(no_note, "DATE", "n9");
    CHECK(inherited.note_id == "n9");

    json wrong = no_note;
    wrong["noteId"] = "other";
    CHECK_THROWS_AS(schema::annotation_from_response_json(wrong, "DATE", "n9"),
                    schema::WireError);

    json matching = no_note;
    matching["noteId"] = "n9";
    CHECK(schema::annotation_from_response_json(matching, "DATE", "n9").note_id == "n9");
}

TEST_CASE("note validation flags each violation") {
    CHECK(schema::validate_note(fixtures::make_note("n1", "text")).ok());

    auto v = schema::validate_note(fixtures::make_note("", ""));
    CHECK(!v.ok());
    CHECK(v.violations().size() == 2);

    CHECK(!schema::validate_note(fixtures::make_note("has space", "t")).ok());
    CHECK(!schema::validate_note({"n1", "", "t", "ty"}).ok());
}

TEST_CASE("annotation validation checks span, text, and confidence") {
    const auto note = fixtures::make_note("n1", "On 12/26/2020, seen in Seattle.");

    auto good = fixtures::make_ann("n1", 3, 10, "12/26/2020", "DATE");
    CHECK(schema::validate_annotation(good, note).ok());

    auto wrong_note = good;
    wrong_note.note_id = "n2";
    CHECK(!schema::validate_annotation(wrong_note, note).ok());

    auto zero_len = good;
    zero_len.length = 0;
    CHECK(!schema::validate_annotation(zero_len, note).ok());

    auto out_of_bounds = good;
    out_of_bounds.start = 29;
    out_of_bounds.length = 5;
    CHECK(!schema::validate_annotation(out_of_bounds, note).ok());

    auto mismatch = good;
    mismatch.text = "13/26/2020";
    auto v = schema::validate_annotation(mismatch, note);
    REQUIRE(!v.ok());
    CHECK(v.joined().find("text mismatch") != std::string::npos);

    auto bad_conf = good;
    bad_conf.confidence = 115.0;
    CHECK(!schema::validate_annotation(bad_conf, note).ok());

    auto multi = good;
    multi.length = 0;
    multi.confidence = -3.0;
    multi.note_id = "nX";
    CHECK(schema::validate_annotation(multi, note).violations().size() == 3);
}

TEST_CASE("annotation spans count code points, not bytes") {
    const auto note = fixtures::make_note("n1", "naïve 12/26/2020 note");
    auto ann = fixtures::make_ann("n1", 6, 10, "12/26/2020", "DATE");
    CHECK(schema::validate_annotation(ann, note).ok());

    auto byte_offset = ann;
    byte_offset.start = 7;  // would be right if ï were two positions
    CHECK(!schema::validate_annotation(byte_offset, note).ok());
}

namespace {

schema::DatasetBundle small_bundle() {
    schema::DatasetBundle bundle;
    bundle.manifest.id = "mini";
    bundle.manifest.note_count = 2;
    bundle.manifest.categories = {"DATE", "PERSON_NAME"};
    bundle.notes.push_back(fixtures::make_note("n1", "Seen 2020-01-05 by staff.", "p1"));
    bundle.notes.push_back(fixtures::make_note("n2", "Ms. Chloe Price was naïve to it.", "p2"));
    bundle.gold["DATE"] = {fixtures::make_ann("n1", 5, 10, "2020-01-05", "DATE")};
    bundle.gold["PERSON_NAME"] = {fixtures::make_ann("n2", 4, 11, "Chloe Price", "PERSON_NAME")};
    return bundle;
}

}  // namespace

TEST_CASE("bundle validation accepts a consistent bundle") {
    schema::TaskRegistry registry;
    CHECK(schema::validate_bundle(small_bundle(), registry).ok());
}

TEST_CASE("bundle validation reports structural problems") {
    schema::TaskRegistry registry;

    auto wrong_count = small_bundle();
    wrong_count.manifest.note_count = 5;
    CHECK(!schema::validate_bundle(wrong_count, registry).ok());

    auto unknown_cat = small_bundle();
    unknown_cat.manifest.categories.push_back("MYSTERY");
    CHECK(!schema::validate_bundle(unknown_cat, registry).ok());

    auto dangling = small_bundle();
    dangling.gold["DATE"].push_back(fixtures::make_ann("ghost", 0, 1, "S", "DATE"));
    auto v = schema::validate_bundle(dangling, registry);
    REQUIRE(!v.ok());
    CHECK(v.joined().find("ghost") != std::string::npos);

    auto duplicate_note = small_bundle();
    duplicate_note.notes.push_back(duplicate_note.notes[0]);
    duplicate_note.manifest.note_count = 3;
    CHECK(!schema::validate_bundle(duplicate_note, registry).ok());

    auto duplicate_gold = small_bundle();
    duplicate_gold.gold["DATE"].push_back(duplicate_gold.gold["DATE"][0]);
    CHECK(!schema::validate_bundle(duplicate_gold, registry).ok());

    auto unlisted = small_bundle();
    unlisted.gold["ID"] = {fixtures::make_ann("n1", 0, 4, "Seen", "ID")};
    CHECK(!schema::validate_bundle(unlisted, registry).ok());
}

TEST_CASE("bundle write and read round trip is canonical") {
    schema::TaskRegistry registry;
    fixtures::TempDir dir("bundle");
    const auto bundle = small_bundle();

    schema::write_bundle(bundle, dir.path(), registry);
    const auto files = schema::bundle_files(bundle, registry);
    REQUIRE(files.count("manifest.json") == 1);
    REQUIRE(files.count("gold/date.json") == 1);
    for (const auto& [rel, expected] : files) {
        std::ifstream in(dir.path() / rel, std::ios::binary);
        REQUIRE(in.is_open());
        std::string actual((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        CHECK(actual == expected);
    }

    const auto back = schema::read_bundle(dir.path(), registry);
    CHECK(schema::bundle_files(back, registry) == files);
    CHECK(back.notes[1].text == bundle.notes[1].text);
    CHECK(back.gold.at("PERSON_NAME")[0].text == "Chloe Price");
}

TEST_CASE("bundle reader rejects corruption with file context") {
    schema::TaskRegistry registry;
    fixtures::TempDir dir("badbundle");
    schema::write_bundle(small_bundle(), dir.path(), registry);

    {
        std::ofstream out(dir.path() / "notes.json", std::ios::trunc);
        out << "{not json";
    }
    try {
        schema::read_bundle(dir.path(), registry);
        FAIL("expected BundleError");
    } catch (const schema::BundleError& e) {
        CHECK(std::string(e.what()).find("notes.json") != std::string::npos);
    }
}

TEST_CASE("bundle reader rejects invalid content") {
    schema::TaskRegistry registry;
    fixtures::TempDir dir("invbundle");
    auto bundle = small_bundle();
    schema::write_bundle(bundle, dir.path(), registry);

    json bad = json::array();
    bad.push_back(schema::annotation_to_json(fixtures::make_ann("n1", 3, 9, "2020-01-0", "DATE")));
    std::ofstream out(dir.path() / "gold" / "date.json", std::ios::trunc);
    out << json{{"TextDateAnnotations", bad}}.dump();
    out.close();
    CHECK_THROWS_AS(schema::read_bundle(dir.path(), registry), schema::BundleError);

    CHECK_THROWS_AS(schema::read_bundle(dir.path() / "missing", registry), schema::BundleError);
}
