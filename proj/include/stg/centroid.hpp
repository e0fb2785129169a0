#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include "stg/align.hpp"
#include "stg/matrix.hpp"
#include "stg/util.hpp"

namespace stg {

// Deterministic parallel loop: iteration i always runs with the same inputs
// regardless of the worker count.
template <typename F>
inline void parallel_for(int count, int workers, F&& body) {
    workers = std::max(1, std::min(workers, count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (auto& t : threads) t.join();
}

// Endpoints of the nested alignment annealer as the outer annealer cools.
struct NestedEndpoints {
    double t_initial_max = 1.0;
    double t_final_max = 0.05;
    int s_initial = 500;
    int s_final = 5;
    double t_min = 0.01;  // nested annealer's floor, fixed across the run
};

struct NestedSetting {
    double t_max_curr = 0;
    int steps_curr = 0;
};

// Scale the nested annealer with the outer annealer's normalized cooling
// ratio R: full effort while the outer search is hot, minimal effort once the
// loss has converged.
inline NestedSetting nested_schedule(double outer_t, double outer_t_min, double outer_t_max,
                                     const NestedEndpoints& ep) {
    if (outer_t_min >= outer_t_max)
        throw ConfigError("degenerate outer schedule: t_min must be < t_max");
    double r = (outer_t - outer_t_min) / (outer_t_max - outer_t_min);
    r = std::clamp(r, 0.0, 1.0);
    NestedSetting s;
    s.t_max_curr = ep.t_initial_max * r + ep.t_final_max * (1.0 - r);
    s.steps_curr = static_cast<int>(std::floor(ep.s_initial * r + ep.s_final * (1.0 - r)));
    return s;
}

// Mean Frobenius distance of the candidate to an already-aligned corpus.
inline double loss(const PaddedMatrix& candidate, const std::vector<PaddedMatrix>& aligned_corpus) {
    if (aligned_corpus.empty()) throw InputError("loss over an empty corpus");
    double sum = 0;
    for (const auto& m : aligned_corpus) sum += frobenius_distance(candidate, m);
    return sum / static_cast<double>(aligned_corpus.size());
}

inline PaddedMatrix permute_matrix(const PaddedMatrix& m, const std::vector<int>& perm) {
    PaddedMatrix out = m;
    for (int i = 0; i < m.n; ++i) {
        out.dummy[i] = m.dummy[perm[i]];
        out.row_ids[i] = m.row_ids[perm[i]];
        for (int j = 0; j < m.n; ++j) out.set(i, j, m.get(perm[i], perm[j]));
    }
    return out;
}

// Element-wise sum of disagreements with the aligned corpus. S[i][j] in
// [0, |corpus|]; high score means the cell drives the loss.
inline std::vector<int> score_matrix(const PaddedMatrix& candidate,
                                     const std::vector<PaddedMatrix>& aligned_corpus) {
    if (aligned_corpus.empty()) throw InputError("score matrix over an empty corpus");
    std::vector<int> s(candidate.a.size(), 0);
    for (const auto& m : aligned_corpus) {
        if (m.n != candidate.n) throw InputError("corpus matrix dimension mismatch");
        for (size_t c = 0; c < s.size(); ++c) s[c] += candidate.a[c] != m.a[c];
    }
    return s;
}

// Would flipping cell (i, j) break one of the never-repairable global rules?
// Self-loops, edges into prototypes, level-mismatched prototype edges, upward
// edges, and level-skipping edges are terminally invalid; chain removals and
// the like are allowed as intermediate states.
inline bool flip_globally_valid(const PartitionMap& map, int i, int j) {
    if (i == j) return false;  // G1
    const auto& pi = map.partitions[map.row_partition[i]];
    const auto& pj = map.partitions[map.row_partition[j]];
    if (pj.kind == Partition::Kind::Prototype) return false;  // G2
    if (pi.kind == Partition::Kind::Prototype) return pi.level == pj.level;  // G3
    int li = map.row_partition[i], lj = map.row_partition[j];  // instance partitions lead
    if (lj < li) return false;      // G4
    if (lj - li > 1) return false;  // G5 (lj == li is a chain-cell move)
    return true;
}

// Oscillation guards for the centroid move function.
struct MoveMemory {
    std::optional<std::pair<int, int>> last_accepted;
    std::set<std::pair<int, int>> rejected_since_accept;

    void on_accept(std::pair<int, int> cell) {
        last_accepted = cell;
        rejected_since_accept.clear();
    }
    void on_reject(std::pair<int, int> cell) { rejected_since_accept.insert(cell); }
};

// Pick the highest-score admissible cell (ties shuffled), flip it in the
// candidate, and return the coordinate. Empty optional: no admissible move.
inline std::optional<std::pair<int, int>> centroid_move(PaddedMatrix& candidate,
                                                        const std::vector<int>& score,
                                                        const MoveMemory& memory, Rng& rng) {
    const int n = candidate.n;
    std::vector<int> cells(score.size());
    std::iota(cells.begin(), cells.end(), 0);
    std::stable_sort(cells.begin(), cells.end(),
                     [&](int a, int b) { return score[a] > score[b]; });
    // shuffle within equal-score tiers
    size_t lo = 0;
    while (lo < cells.size()) {
        size_t hi = lo + 1;
        while (hi < cells.size() && score[cells[hi]] == score[cells[lo]]) ++hi;
        std::shuffle(cells.begin() + lo, cells.begin() + hi, rng);
        lo = hi;
    }
    for (int c : cells) {
        int i = c / n, j = c % n;
        std::pair<int, int> cell{i, j};
        if (!flip_globally_valid(*candidate.map, i, j)) continue;
        if (memory.last_accepted && *memory.last_accepted == cell) continue;
        if (memory.rejected_since_accept.count(cell)) continue;
        candidate.flip(i, j);
        return cell;
    }
    return std::nullopt;
}

// Index of the corpus member with minimal mean aligned distance to the rest;
// ties break toward the lowest index.
inline int naive_centroid(const std::vector<PaddedMatrix>& corpus, const AnnealSchedule& sched,
                          int workers = 1) {
    if (corpus.empty()) throw InputError("naive centroid of an empty corpus");
    const int k = static_cast<int>(corpus.size());
    if (k == 1) return 0;
    std::vector<double> d(static_cast<size_t>(k) * k, 0.0);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) pairs.push_back({i, j});
    parallel_for(static_cast<int>(pairs.size()), workers, [&](int t) {
        auto [i, j] = pairs[t];
        AnnealSchedule s = sched;
        s.seed = sub_seed(sched.seed, 0x6e61, static_cast<uint64_t>(i) * 1000 + j);
        double dist = align(corpus[i], corpus[j], s).energy;
        d[i * k + j] = d[j * k + i] = dist;
    });
    int best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        double sum = 0;
        for (int j = 0; j < k; ++j) sum += d[i * k + j];
        double l = sum / (k - 1);
        if (l < best_loss - 1e-12) {
            best_loss = l;
            best = i;
        }
    }
    return best;
}

struct CentroidResult {
    PaddedMatrix best_candidate;
    std::vector<double> loss_trace;  // best-so-far per outer step
    double best_loss = 0;
    int naive_index = 0;
    double naive_loss = 0;
    bool early_stop = false;
};

struct CentroidConfig {
    AnnealSchedule outer{1000, 2.5, 0.05, 0};
    NestedEndpoints nested;
    int workers = 1;
};

// Outer simulated annealer over candidate centroid matrices. Each step
// re-aligns the corpus to the proposed candidate with nested, schedule-scaled
// alignment runs (warm-started from the previous permutations), evaluates the
// mean-distance energy, and accepts/rejects the single-cell move.
inline CentroidResult derive_centroid(const std::vector<PaddedMatrix>& corpus,
                                      const CentroidConfig& cfg) {
    if (corpus.empty()) throw InputError("cannot derive a centroid for an empty corpus");
    cfg.outer.check();
    const int k = static_cast<int>(corpus.size());

    CentroidResult res;
    res.naive_index = naive_centroid(
        corpus, {cfg.nested.s_initial, cfg.nested.t_initial_max, cfg.nested.t_min,
                 sub_seed(cfg.outer.seed, 0x6e30)},
        cfg.workers);

    PaddedMatrix candidate = corpus[res.naive_index];
    std::vector<std::vector<int>> perms(k);
    std::vector<double> dists(k, 0.0);

    auto realign = [&](int steps, double t_max, uint64_t step_tag) {
        parallel_for(k, cfg.workers, [&](int i) {
            AnnealSchedule s{steps, t_max, cfg.nested.t_min,
                             sub_seed(cfg.outer.seed, step_tag, static_cast<uint64_t>(i))};
            const std::vector<int>* warm = perms[i].empty() ? nullptr : &perms[i];
            auto a = align(candidate, corpus[i], s, warm);
            perms[i] = std::move(a.perm);
            dists[i] = a.energy;
        });
        double sum = 0;
        for (double d : dists) sum += d;
        return sum / k;
    };

    double cur = realign(cfg.nested.s_initial, cfg.nested.t_initial_max, 0);
    res.naive_loss = cur;
    double best = cur;
    res.best_candidate = candidate;

    MoveMemory memory;
    Rng rng(sub_seed(cfg.outer.seed, 0x6d76));
    const double decay =
        cfg.outer.steps > 1
            ? std::pow(cfg.outer.t_min / cfg.outer.t_max, 1.0 / (cfg.outer.steps - 1))
            : 1.0;
    double t = cfg.outer.t_max;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int step = 0; step < cfg.outer.steps; ++step, t *= decay) {
        auto ns = nested_schedule(t, cfg.outer.t_min, cfg.outer.t_max, cfg.nested);

        std::vector<PaddedMatrix> aligned;
        aligned.reserve(k);
        for (int i = 0; i < k; ++i) aligned.push_back(permute_matrix(corpus[i], perms[i]));
        auto score = score_matrix(candidate, aligned);

        auto cell = centroid_move(candidate, score, memory, rng);
        if (!cell) {
            res.early_stop = true;  // no admissible move left; keep best-so-far
            break;
        }
        double next = realign(std::max(1, ns.steps_curr), ns.t_max_curr,
                              0x1000 + static_cast<uint64_t>(step));
        double delta = next - cur;
        if (delta <= 0 || unit(rng) < std::exp(-delta / t)) {
            cur = next;
            memory.on_accept(*cell);
            if (cur < best) {
                best = cur;
                res.best_candidate = candidate;
            }
        } else {
            candidate.flip(cell->first, cell->second);  // revert
            memory.on_reject(*cell);
        }
        res.loss_trace.push_back(best);
    }
    res.best_loss = best;
    return res;
}

}  // namespace stg
