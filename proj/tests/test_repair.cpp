#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "stg/repair.hpp"

using namespace stg;

namespace {

PaddedMatrix toy_matrix() {
    auto a = augment(fixtures::seg_motif_toy());
    return build_matrices({&a})[0];
}

bool matrix_valid(const PaddedMatrix& m) {
    return validate_augmented(matrix_to_augmented(m)).ok();
}

// Smallest flip count that reaches any valid matrix, by brute force (k <= 2).
int min_repair_distance(const PaddedMatrix& m, int max_k) {
    if (matrix_valid(m)) return 0;
    const int cells = m.n * m.n;
    if (max_k >= 1)
        for (int c1 = 0; c1 < cells; ++c1) {
            PaddedMatrix v = m;
            v.flip(c1 / m.n, c1 % m.n);
            if (matrix_valid(v)) return 1;
        }
    if (max_k >= 2)
        for (int c1 = 0; c1 < cells; ++c1)
            for (int c2 = c1 + 1; c2 < cells; ++c2) {
                PaddedMatrix v = m;
                v.flip(c1 / m.n, c1 % m.n);
                v.flip(c2 / m.n, c2 % m.n);
                if (matrix_valid(v)) return 2;
            }
    return max_k + 1;
}

}  // namespace

TEST_CASE("repair is the identity on valid matrices") {
    for (auto g : {fixtures::seg_motif_toy(), fixtures::five_level_toy()}) {
        auto a = augment(g);
        auto m = build_matrices({&a})[0];
        auto res = repair(m);
        CHECK(res.objective == 0);
        CHECK(res.matrix.a == m.a);
        for (const auto& st : res.stats) {
            CHECK(st.optimal);
            CHECK_FALSE(st.timeout_hit);
        }
    }
}

TEST_CASE("repair restores a deleted chain edge minimally") {
    auto m = toy_matrix();
    int motif0 = m.map->partitions[1].begin;
    REQUIRE(m.get(motif0, motif0 + 1) == 1);
    m.flip(motif0, motif0 + 1);

    auto res = repair(m);
    CHECK(res.objective == 1);
    CHECK(res.matrix.get(motif0, motif0 + 1) == 1);
    CHECK(matrix_valid(res.matrix));
}

TEST_CASE("repair sweeps terminally illegal cells") {
    auto m = toy_matrix();
    int seg0 = m.map->partitions[0].begin;
    int motif0 = m.map->partitions[1].begin;
    m.set(motif0, seg0, 1);  // upward edge
    m.set(seg0, seg0, 1);    // self loop

    auto res = repair(m);
    CHECK(res.objective == 2);
    CHECK(res.stats[0].name == "global_sweep");
    CHECK(res.stats[0].flips == 2);
    CHECK(matrix_valid(res.matrix));
}

TEST_CASE("repair matches the brute-force minimum on small corruptions") {
    auto base = toy_matrix();
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 12; ++trial) {
        PaddedMatrix m = base;
        int k = 1 + static_cast<int>(rng() % 2);
        for (int f = 0; f < k; ++f) {
            int c = static_cast<int>(rng() % (m.n * m.n));
            m.flip(c / m.n, c % m.n);
        }
        if (matrix_valid(m)) continue;  // the flips landed on another valid graph
        int oracle = min_repair_distance(m, 2);
        if (oracle > 2) continue;
        auto res = repair(m);
        CHECK(res.objective == oracle);
        CHECK(matrix_valid(res.matrix));
        ++checked;
    }
    CHECK(checked >= 6);
}

TEST_CASE("repair objective never exceeds the corruption size") {
    auto a = augment(fixtures::five_level_toy());
    auto base = build_matrices({&a})[0];
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        PaddedMatrix m = base;
        int k = 1 + static_cast<int>(rng() % 3);
        std::set<int> cells;
        while (static_cast<int>(cells.size()) < k)
            cells.insert(static_cast<int>(rng() % (m.n * m.n)));
        for (int c : cells) m.flip(c / m.n, c % m.n);
        auto res = repair(m);
        CHECK(res.objective <= k);
        CHECK(matrix_valid(res.matrix));
    }
}

TEST_CASE("repair is idempotent") {
    auto m = toy_matrix();
    m.flip(0, 1);
    m.flip(2, 3);
    auto once = repair(m);
    auto twice = repair(once.matrix);
    CHECK(twice.objective == 0);
    CHECK(twice.matrix.a == once.matrix.a);
}

TEST_CASE("repair handles a single-level graph") {
    auto g = levels_ablate(fixtures::seg_motif_toy(), 1);
    auto a = augment(g);
    auto m = build_matrices({&a})[0];
    auto res = repair(m);
    CHECK(res.objective == 0);

    int seg0 = m.map->partitions[0].begin;
    m.flip(seg0, seg0 + 1);  // break the chain
    auto res2 = repair(m);
    CHECK(res2.objective == 1);
    CHECK(matrix_valid(res2.matrix));
}

TEST_CASE("repair reports per-partition stats") {
    auto res = repair(toy_matrix());
    std::vector<std::string> names;
    for (const auto& st : res.stats) names.push_back(st.name);
    CHECK(names == std::vector<std::string>{"global_sweep", "instance_pair_segmentation_motif",
                                            "prototypes_segmentation", "prototypes_motif"});
    for (const auto& st : res.stats) CHECK(st.seconds >= 0.0);
}

TEST_CASE("instance-pair SMT encoding has the expected shape") {
    auto m = toy_matrix();
    auto b = encode_instance_pair(m, 0, 1);
    CHECK(b.name == "instance_pair_segmentation_motif");
    CHECK_FALSE(b.scope.empty());
    for (const char* rule : {"I1", "I2", "I3", "I5"})
        CHECK(std::find(b.rules.begin(), b.rules.end(), rule) != b.rules.end());
    // motif overlaps, so I4 must not be asserted
    CHECK(std::find(b.rules.begin(), b.rules.end(), "I4") == b.rules.end());

    CHECK(b.smtlib.find("(set-logic") != std::string::npos);
    CHECK(b.smtlib.find("(check-sat)") != std::string::npos);
    CHECK(b.smtlib.find("(get-model)") != std::string::npos);
    CHECK(b.smtlib.find("assert-soft") != std::string::npos);
    long depth = 0;
    for (char c : b.smtlib) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        CHECK(depth >= 0);
    }
    CHECK(depth == 0);
    // one declaration per scoped edge variable
    size_t decls = 0, pos = 0;
    while ((pos = b.smtlib.find("(declare-fun e_", pos)) != std::string::npos) {
        ++decls;
        ++pos;
    }
    CHECK(decls == b.scope.size());

    CHECK_THROWS_AS(encode_instance_pair(m, 0, 0), InputError);
    CHECK_THROWS_AS(encode_instance_pair(m, 1, 0), InputError);
}

TEST_CASE("prototype SMT encoding freezes the instance subgraph") {
    auto a = augment(fixtures::five_level_toy());
    auto m = build_matrices({&a})[0];
    // chord level is P2-constrained
    int chord_level = 3;
    std::vector<int> order;
    const auto& part = m.map->partitions[chord_level];
    for (int r = part.begin; r < part.end; ++r) order.push_back(r);

    auto b = encode_prototypes(m, chord_level, order);
    CHECK(b.name == "prototypes_chord");
    CHECK(std::find(b.rules.begin(), b.rules.end(), "P1") != b.rules.end());
    CHECK(std::find(b.rules.begin(), b.rules.end(), "P2") != b.rules.end());
    CHECK_FALSE(b.frozen.empty());
    CHECK_FALSE(b.scope.empty());
    CHECK(b.smtlib.find("assert-soft") != std::string::npos);

    // melody has no adjacency-distinctness rule
    std::vector<int> morder;
    const auto& mpart = m.map->partitions[4];
    for (int r = mpart.begin; r < mpart.end; ++r) morder.push_back(r);
    auto bm = encode_prototypes(m, 4, morder);
    CHECK(std::find(bm.rules.begin(), bm.rules.end(), "P2") == bm.rules.end());

    CHECK_THROWS_AS(encode_prototypes(m, 99, order), InputError);
    CHECK_THROWS_AS(encode_prototypes(m, chord_level, {}), InputError);
}

TEST_CASE("repairing a corrupted candidate lands on a graph, not just a matrix") {
    auto g1 = fixtures::seg_motif_toy();
    auto g2 = fixtures::seg_motif_toy();
    g2.edges.insert({"segmentation_1", "motif_0"});
    auto a1 = augment(g1);
    auto a2 = augment(g2);
    auto ms = build_matrices({&a1, &a2});

    // a candidate halfway between the two members is off-manifold
    PaddedMatrix mix = ms[0];
    int seg1 = mix.map->partitions[0].begin + 1;
    int motif0 = mix.map->partitions[1].begin;
    mix.set(seg1, motif0, 1);            // the edge distinguishing g2
    mix.flip(motif0 + 2, motif0 + 3);    // plus chain damage
    auto res = repair(mix);

    auto back = matrix_to_augmented(res.matrix);
    CHECK(validate_augmented(back).ok());
    auto round = compress(back);
    CHECK(validate_stg(round).ok());
    // both members stay nearby: the projection cannot drift arbitrarily
    CHECK(hamming(res.matrix, ms[0]) <= 4);
    CHECK(hamming(res.matrix, ms[1]) <= 4);
}
