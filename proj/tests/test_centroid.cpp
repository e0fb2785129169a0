#include <doctest.h>

#include "fixtures.hpp"
#include "stg/centroid.hpp"

using namespace stg;

namespace {

std::vector<PaddedMatrix> toy_corpus() {
    auto g1 = fixtures::seg_motif_toy();
    auto g2 = fixtures::seg_motif_toy();
    g2.edges.insert({"segmentation_1", "motif_0"});
    REQUIRE(validate_stg(g2).ok());
    auto g3 = fixtures::seg_motif_toy();
    g3.levels[1].second[1].features = {{"pattern_num", "0"}};
    REQUIRE(validate_stg(g3).ok());

    auto a1 = augment(g1);
    auto a2 = augment(g2);
    auto a3 = augment(g3);
    return build_matrices({&a1, &a2, &a3});
}

}  // namespace

TEST_CASE("nested_schedule tracks the outer cooling ratio") {
    NestedEndpoints ep;  // 1.0 -> 0.05, 500 -> 5
    auto hot = nested_schedule(2.5, 0.05, 2.5, ep);
    CHECK(hot.t_max_curr == doctest::Approx(1.0));
    CHECK(hot.steps_curr == 500);

    auto cold = nested_schedule(0.05, 0.05, 2.5, ep);
    CHECK(cold.t_max_curr == doctest::Approx(0.05));
    CHECK(cold.steps_curr == 5);

    // halfway: t = t_min + 0.5 (t_max - t_min)
    auto mid = nested_schedule(0.05 + 0.5 * 2.45, 0.05, 2.5, ep);
    CHECK(mid.t_max_curr == doctest::Approx(0.525));
    CHECK(mid.steps_curr == 252);  // floor(252.5)

    // out-of-range temperatures clamp
    CHECK(nested_schedule(99.0, 0.05, 2.5, ep).steps_curr == 500);
    CHECK(nested_schedule(0.0, 0.05, 2.5, ep).steps_curr == 5);

    CHECK_THROWS_AS(nested_schedule(1.0, 2.0, 2.0, ep), ConfigError);
}

TEST_CASE("loss is the mean Frobenius distance to the aligned corpus") {
    auto ms = toy_corpus();
    CHECK(loss(ms[0], {ms[0], ms[0]}) == 0.0);

    PaddedMatrix off = ms[0];
    off.flip(0, 1);
    // distances 0 and 1
    CHECK(loss(ms[0], {ms[0], off}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(loss(ms[0], {}), InputError);
}

TEST_CASE("score_matrix counts per-cell disagreement") {
    auto ms = toy_corpus();
    auto s = score_matrix(ms[0], {ms[0], ms[1], ms[2]});
    const int n = ms[0].n;
    REQUIRE(static_cast<int>(s.size()) == n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int expect = 0;
            for (const auto& m : {ms[0], ms[1], ms[2]}) expect += m.get(i, j) != ms[0].get(i, j);
            CHECK(s[i * n + j] == expect);
        }
    // summed scores equal summed Hamming distances
    int64_t total = 0;
    for (int v : s) total += v;
    CHECK(total == hamming(ms[0], ms[1]) + hamming(ms[0], ms[2]));
}

TEST_CASE("flip_globally_valid enforces the terminal edge rules") {
    auto ms = toy_corpus();
    const auto& map = *ms[0].map;
    int seg_row = map.partitions[0].begin;
    int motif_row = map.partitions[1].begin;
    int proto_seg = -1, proto_motif = -1;
    for (const auto& p : map.partitions) {
        if (p.kind != Partition::Kind::Prototype) continue;
        if (p.level == LevelKind::Segmentation) proto_seg = p.begin;
        if (p.level == LevelKind::Motif && proto_motif < 0) proto_motif = p.begin;
    }
    REQUIRE(proto_seg >= 0);
    REQUIRE(proto_motif >= 0);

    CHECK_FALSE(flip_globally_valid(map, seg_row, seg_row));          // self loop
    CHECK_FALSE(flip_globally_valid(map, seg_row, proto_seg));        // into prototype
    CHECK_FALSE(flip_globally_valid(map, proto_seg, motif_row));      // level mismatch
    CHECK(flip_globally_valid(map, proto_motif, motif_row));          // proto -> own level
    CHECK_FALSE(flip_globally_valid(map, motif_row, seg_row));        // upward
    CHECK(flip_globally_valid(map, seg_row, motif_row));              // downward adjacent
    CHECK(flip_globally_valid(map, motif_row, motif_row + 1));        // chain cell
}

TEST_CASE("centroid_move picks the top admissible cell and honors memory") {
    auto ms = toy_corpus();
    PaddedMatrix cand = ms[0];
    const int n = cand.n;
    int seg_row = cand.map->partitions[0].begin;
    int motif_row = cand.map->partitions[1].begin;

    std::vector<int> score(n * n, 0);
    score[seg_row * n + motif_row + 1] = 5;  // unique admissible max
    Rng rng(7);
    MoveMemory mem;
    uint8_t before = cand.get(seg_row, motif_row + 1);
    auto cell = centroid_move(cand, score, mem, rng);
    REQUIRE(cell.has_value());
    CHECK(*cell == std::pair<int, int>{seg_row, motif_row + 1});
    CHECK(cand.get(seg_row, motif_row + 1) == (before ^ 1));

    // a higher score on an invalid cell (diagonal) is skipped
    cand = ms[0];
    score[seg_row * n + seg_row] = 9;
    cell = centroid_move(cand, score, mem, rng);
    REQUIRE(cell.has_value());
    CHECK(*cell == std::pair<int, int>{seg_row, motif_row + 1});

    // the last accepted cell is excluded...
    cand = ms[0];
    mem.on_accept({seg_row, motif_row + 1});
    cell = centroid_move(cand, score, mem, rng);
    REQUIRE(cell.has_value());
    CHECK(*cell != std::pair<int, int>{seg_row, motif_row + 1});

    // ...and so are cells rejected since the last accept
    cand = ms[0];
    mem = MoveMemory{};
    mem.on_reject({seg_row, motif_row + 1});
    cell = centroid_move(cand, score, mem, rng);
    REQUIRE(cell.has_value());
    CHECK(*cell != std::pair<int, int>{seg_row, motif_row + 1});

    // accepting clears the rejection memory
    mem.on_accept({0, 1});
    CHECK(mem.rejected_since_accept.empty());
}

TEST_CASE("naive_centroid matches an exhaustive-distance oracle") {
    auto ms = toy_corpus();
    AnnealSchedule sched{3000, 2.0, 0.01, 11};

    const int k = static_cast<int>(ms.size());
    std::vector<double> mean(k, 0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
            if (i != j) mean[i] += exhaustive_align(ms[i], ms[j]).energy;
        mean[i] /= k - 1;
    }
    int expect = 0;
    for (int i = 1; i < k; ++i)
        if (mean[i] < mean[expect] - 1e-12) expect = i;

    CHECK(naive_centroid(ms, sched) == expect);
    CHECK(naive_centroid(ms, sched, 4) == expect);  // worker count cannot change the result
    CHECK(naive_centroid({ms[0]}, sched) == 0);
    CHECK_THROWS_AS(naive_centroid({}, sched), InputError);
}

TEST_CASE("derive_centroid: identical corpus converges at loss zero") {
    auto a = augment(fixtures::seg_motif_toy());
    auto ms = build_matrices({&a, &a, &a});

    CentroidConfig cfg;
    cfg.outer = {30, 2.5, 0.05, 17};
    cfg.nested.s_initial = 150;
    auto res = derive_centroid(ms, cfg);
    CHECK(res.naive_index == 0);
    CHECK(res.naive_loss == 0.0);
    CHECK(res.best_loss == 0.0);
    CHECK(hamming(res.best_candidate, ms[0]) == 0);
}

TEST_CASE("derive_centroid: trace is non-increasing and never above the naive loss") {
    auto ms = toy_corpus();
    CentroidConfig cfg;
    cfg.outer = {60, 2.5, 0.05, 23};
    cfg.nested.s_initial = 200;
    auto res = derive_centroid(ms, cfg);

    CHECK(res.best_loss <= res.naive_loss + 1e-12);
    for (size_t i = 1; i < res.loss_trace.size(); ++i)
        CHECK(res.loss_trace[i] <= res.loss_trace[i - 1] + 1e-12);

    auto res2 = derive_centroid(ms, cfg);  // bit-exact reproducibility
    CHECK(res2.best_candidate.a == res.best_candidate.a);
    CHECK(res2.loss_trace == res.loss_trace);
    CHECK(res2.best_loss == res.best_loss);
}

TEST_CASE("derive_centroid rejects an empty corpus") {
    CentroidConfig cfg;
    CHECK_THROWS_AS(derive_centroid({}, cfg), InputError);
}
