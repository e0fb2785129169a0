#include <doctest.h>

#include "fixtures.hpp"
#include "stg/augment.hpp"
#include "stg/ingest.hpp"
#include "stg/json_io.hpp"
#include "stg/validate.hpp"

using namespace stg;

TEST_CASE("ingest: biamonti-style record matches the walkthrough topology") {
    auto record = load_json_file(std::string(STG_TEST_DATA_DIR) + "/biamonti_461.json");
    auto g = ingest(record, fixtures::all_levels());

    REQUIRE(g.levels.size() == 5);
    CHECK(g.levels[0].second.size() == 1);  // one segment
    CHECK(g.levels[1].second.size() == 3);  // two motifs + filler
    CHECK(g.levels[2].second.size() == 1);
    CHECK(g.levels[3].second.size() == 5);
    CHECK(g.levels[4].second.size() == 5);
    CHECK(validate_stg(g).ok());

    // Key starts in the first motif and ends in the filler: two parents.
    std::set<std::string> key_parents;
    for (const auto& [f, t] : g.edges)
        if (t == "key_0") key_parents.insert(f);
    CHECK(key_parents == std::set<std::string>{"motif_0", "motif_2"});

    // The penultimate-interval pattern: last melody node spans V7 then I.
    std::set<std::string> mel_parents;
    for (const auto& [f, t] : g.edges)
        if (t == "melody_4") mel_parents.insert(f);
    CHECK(mel_parents == std::set<std::string>{"chord_3", "chord_4"});
    CHECK(g.find("chord_3")->features.at("quality") == "D7");
    CHECK(g.find("chord_4")->features.at("quality") == "M");
}

TEST_CASE("ingest: single level, single span") {
    auto rec = nlohmann::json::parse(
        R"({"version":1,"levels":{"segmentation":[{"label":0,"start":0,"end":1}]}})");
    auto g = ingest(rec, {LevelKind::Segmentation});
    CHECK(g.node_count() == 1);
    CHECK(g.edges.empty());
    CHECK(validate_stg(g).ok());
}

TEST_CASE("ingest: nested children produce one edge each") {
    auto g = fixtures::seg_motif_toy();
    // every motif sits inside exactly one segment here
    CHECK(g.edges.size() == g.levels[1].second.size());
    CHECK(validate_stg(g).ok());
}

TEST_CASE("ingest: malformed span is rejected") {
    auto rec = nlohmann::json::parse(
        R"({"version":1,"levels":{"segmentation":[{"label":0,"start":2,"end":2}]}})");
    CHECK_THROWS_AS(ingest(rec, {LevelKind::Segmentation}), InputError);
}

TEST_CASE("ingest: uncovered child interval is an error") {
    auto rec = nlohmann::json::parse(R"({
      "version":1,"levels":{
        "segmentation":[{"label":0,"start":0,"end":2}],
        "motif":[{"pattern":0,"start":3,"end":4}]}})");
    CHECK_THROWS_AS(ingest(rec, {LevelKind::Segmentation, LevelKind::Motif}), InputError);
}

TEST_CASE("ingest: missing requested level is an error") {
    auto rec = nlohmann::json::parse(
        R"({"version":1,"levels":{"segmentation":[{"label":0,"start":0,"end":1}]}})");
    CHECK_THROWS_AS(ingest(rec, {LevelKind::Segmentation, LevelKind::Key}), InputError);
}

TEST_CASE("ingest is deterministic") {
    auto g1 = fixtures::five_level_toy();
    auto g2 = fixtures::five_level_toy();
    CHECK(stg_to_json(g1) == stg_to_json(g2));
}

TEST_CASE("validate: self-loop reports G1") {
    auto g = fixtures::seg_motif_toy();
    g.edges.insert({"motif_0", "motif_0"});
    CHECK(validate_stg(g).has("G1"));
}

TEST_CASE("validate: level-skipping edge reports G5, upward edge G4") {
    auto g = fixtures::five_level_toy();
    g.edges.insert({"segmentation_0", "chord_0"});
    CHECK(validate_stg(g).has("G5"));

    auto g2 = fixtures::five_level_toy();
    g2.edges.insert({"motif_0", "segmentation_0"});
    CHECK(validate_stg(g2).has("G4"));
}

TEST_CASE("validate: parent count bounds (I1)") {
    auto g = fixtures::seg_motif_toy();
    for (const auto& [kind, nodes] : g.levels)
        (void)kind;
    // strip the only parent of motif_1
    g.edges.erase({"segmentation_0", "motif_1"});
    CHECK(validate_stg(g).has("I1"));
}

TEST_CASE("validate: chain_index gap reports I2") {
    auto g = fixtures::seg_motif_toy();
    g.levels[1].second[2].chain_index = 5;
    CHECK(validate_stg(g).has("I2"));
}

TEST_CASE("validate: incomplete feature set reports P1, duplicate labels P2") {
    auto g = fixtures::five_level_toy();
    g.levels[3].second[0].features.erase("quality");
    CHECK(validate_stg(g).has("P1"));

    auto g2 = fixtures::five_level_toy();
    g2.levels[3].second[1].features = g2.levels[3].second[0].features;
    CHECK(validate_stg(g2).has("P2"));
}

TEST_CASE("levels_ablate keeps prefixes valid") {
    auto g = fixtures::five_level_toy();
    auto same = levels_ablate(g, 5);
    CHECK(stg_to_json(same) == stg_to_json(g));

    auto top = levels_ablate(g, 1);
    CHECK(top.levels.size() == 1);
    CHECK(top.edges.empty());

    for (int n = 1; n <= 5; ++n) CHECK(validate_stg(levels_ablate(g, n)).ok());
    CHECK_THROWS_AS(levels_ablate(g, 0), InputError);
    CHECK_THROWS_AS(levels_ablate(g, 6), InputError);
}

TEST_CASE("graph json round trip") {
    auto g = fixtures::five_level_toy();
    auto j = stg_to_json(g);
    auto g2 = stg_from_json(j);
    CHECK(stg_to_json(g2) == j);
}
