#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "stg/align.hpp"
#include "stg/matrix.hpp"

using namespace stg;

TEST_CASE("to_padded_pair: identical graphs, no dummies") {
    auto a = augment(fixtures::seg_motif_toy());
    auto [m1, m2] = to_padded_pair(a, a);
    CHECK(m1.a == m2.a);
    for (int i = 0; i < m1.n; ++i) {
        CHECK(m1.dummy[i] == 0);
        CHECK(m2.dummy[i] == 0);
    }
    CHECK(frobenius_distance(m1, m2) == 0.0);
}

TEST_CASE("to_padded_pair: size mismatch pads the smaller side") {
    auto g1 = fixtures::seg_motif_toy();
    auto rec = nlohmann::json::parse(R"({
      "version":1,"levels":{
        "segmentation":[{"label":0,"start":0.0,"end":4.0},{"label":1,"start":4.0,"end":8.0}],
        "motif":[{"pattern":0,"start":0.0,"end":3.0},{"pattern":1,"start":4.0,"end":8.0}]}})");
    auto g2 = ingest(rec, {LevelKind::Segmentation, LevelKind::Motif});
    REQUIRE(validate_stg(g2).ok());

    auto a1 = augment(g1);
    auto a2 = augment(g2);
    auto [m1, m2] = to_padded_pair(a1, a2);
    const auto& motif_part = m1.map->partitions[1];
    CHECK(motif_part.size() == 4);
    int dummies = 0;
    for (int r = motif_part.begin; r < motif_part.end; ++r) dummies += m2.dummy[r];
    CHECK(dummies == 2);
}

TEST_CASE("to_padded_pair: level-count mismatch is an error") {
    auto a1 = augment(fixtures::seg_motif_toy());
    auto a2 = augment(levels_ablate(fixtures::seg_motif_toy(), 1));
    CHECK_THROWS_AS(to_padded_pair(a1, a2), InputError);
}

TEST_CASE("frobenius distance basics") {
    auto a = augment(fixtures::seg_motif_toy());
    auto [m1, m2] = to_padded_pair(a, a);
    CHECK(frobenius_distance(m1, m2) == 0.0);
    m2.flip(0, 1);
    CHECK(frobenius_distance(m1, m2) == 1.0);
    // squared distance stays an integer cell count
    m2.flip(2, 3);
    auto d = frobenius_distance(m1, m2);
    CHECK(d * d == doctest::Approx(2.0));
}

TEST_CASE("align: identical matrices give zero energy") {
    auto a = augment(fixtures::five_level_toy());
    auto [m1, m2] = to_padded_pair(a, a);
    auto res = align(m1, m2, {200, 2.0, 0.01, 7});
    CHECK(res.energy == 0.0);
}

TEST_CASE("align: annealer matches exhaustive search on shuffled toys") {
    auto a = augment(fixtures::seg_motif_toy());
    auto [m1, m2raw] = to_padded_pair(a, a);

    // Shuffle m2 within partitions so identity is no longer optimal, and
    // flip a couple of cells for asymmetry.
    std::mt19937_64 rng(99);
    PaddedMatrix m2 = m2raw;
    std::vector<int> perm(m2.n);
    std::iota(perm.begin(), perm.end(), 0);
    for (const auto& p : m2.map->partitions)
        std::shuffle(perm.begin() + p.begin, perm.begin() + p.end, rng);
    PaddedMatrix shuffled = m2;
    for (int i = 0; i < m2.n; ++i)
        for (int j = 0; j < m2.n; ++j) shuffled.set(i, j, m2.get(perm[i], perm[j]));
    shuffled.flip(0, 3);
    shuffled.flip(1, 2);

    auto exact = exhaustive_align(m1, shuffled);
    auto annealed = align(m1, shuffled, {3000, 2.0, 0.01, 41});
    CHECK(annealed.energy_sq == exact.energy_sq);
}

TEST_CASE("align: energy reproduces under re-evaluation and moves stay in partitions") {
    auto a1 = augment(fixtures::five_level_toy());
    auto g2 = fixtures::five_level_toy();
    g2.levels[4].second[0].features["abs_interval"] = "7";
    auto a2 = augment(g2);
    auto [m1, m2] = to_padded_pair(a1, a2);
    auto res = align(m1, m2, {2000, 2.0, 0.01, 5});

    int64_t h = 0;
    for (int i = 0; i < m1.n; ++i)
        for (int j = 0; j < m1.n; ++j) h += m1.get(i, j) != m2.get(res.perm[i], res.perm[j]);
    CHECK(h == res.energy_sq);

    for (int i = 0; i < m1.n; ++i)
        CHECK(m1.map->row_partition[i] == m1.map->row_partition[res.perm[i]]);
}

TEST_CASE("align: seeded determinism") {
    auto a1 = augment(fixtures::five_level_toy());
    auto g2 = fixtures::five_level_toy();
    g2.edges.insert({"segmentation_1", "motif_0"});  // slightly different graph
    REQUIRE(validate_stg(g2).ok());
    auto a2 = augment(g2);
    auto [m1, m2] = to_padded_pair(a1, a2);
    auto r1 = align(m1, m2, {500, 2.0, 0.01, 123});
    auto r2 = align(m1, m2, {500, 2.0, 0.01, 123});
    CHECK(r1.perm == r2.perm);
    CHECK(r1.energy_sq == r2.energy_sq);
}

TEST_CASE("structural_distance: one extra valid edge costs exactly 1") {
    auto g1 = fixtures::five_level_toy();
    auto g2 = fixtures::five_level_toy();
    g2.edges.insert({"segmentation_1", "motif_0"});
    REQUIRE(validate_stg(g2).ok());
    auto d = structural_distance(g1, g2, {2000, 2.0, 0.01, 3});
    CHECK(d == doctest::Approx(1.0));
    CHECK(structural_distance(g1, g1, {100, 2.0, 0.01, 3}) == 0.0);
}

TEST_CASE("matrix_to_augmented inverts the matrix encoding") {
    auto a = augment(fixtures::five_level_toy());
    auto [m1, m2] = to_padded_pair(a, a);
    auto back = matrix_to_augmented(m1);
    CHECK(validate_augmented(back).ok());
    CHECK(back.node_count() == a.node_count());
    CHECK(back.edge_count() == a.edge_count());
    // rebuilt matrices must be identical
    auto ms = build_matrices({&back});
    CHECK(ms[0].a == m1.a);
}
