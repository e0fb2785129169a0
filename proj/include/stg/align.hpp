#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "stg/matrix.hpp"
#include "stg/util.hpp"

namespace stg {

struct AnnealSchedule {
    int steps = 2000;
    double t_max = 2.0;
    double t_min = 0.01;
    uint64_t seed = 0;

    void check() const {
        if (steps < 1) throw ConfigError("annealing steps must be >= 1");
        if (!(t_min < t_max)) throw ConfigError("t_min must be < t_max");
        if (t_min <= 0) throw ConfigError("t_min must be positive");
    }
};

// Permutation alignment of m2 onto m1: aligned(i,j) = m2(perm[i], perm[j]).
struct Alignment {
    std::vector<int> perm;
    int64_t energy_sq = 0;  // differing-cell count at the best permutation
    double energy = 0.0;    // sqrt(energy_sq), the Frobenius distance
};

namespace detail {

inline int64_t permuted_hamming(const PaddedMatrix& m1, const PaddedMatrix& m2,
                                const std::vector<int>& perm) {
    int64_t h = 0;
    const int n = m1.n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h += m1.get(i, j) != m2.get(perm[i], perm[j]);
    return h;
}

// Differing-cell count restricted to rows/columns p and q.
inline int64_t cross_hamming(const PaddedMatrix& m1, const PaddedMatrix& m2,
                             const std::vector<int>& perm, int p, int q) {
    int64_t h = 0;
    const int n = m1.n;
    for (int k = 0; k < n; ++k) {
        h += m1.get(p, k) != m2.get(perm[p], perm[k]);
        h += m1.get(q, k) != m2.get(perm[q], perm[k]);
        if (k != p && k != q) {
            h += m1.get(k, p) != m2.get(perm[k], perm[p]);
            h += m1.get(k, q) != m2.get(perm[k], perm[q]);
        }
    }
    return h;
}

}  // namespace detail

inline void check_shared_map(const PaddedMatrix& m1, const PaddedMatrix& m2) {
    if (m1.map != m2.map || m1.n != m2.n)
        throw InputError("matrices do not share a partition map");
}

// Simulated-annealing alignment, Frobenius energy, partition-respecting row
// swaps, geometric cooling. Initial state is the identity permutation unless
// a warm start is supplied. Returns the best state seen.
inline Alignment align(const PaddedMatrix& m1, const PaddedMatrix& m2, const AnnealSchedule& sched,
                       const std::vector<int>* warm_start = nullptr) {
    check_shared_map(m1, m2);
    sched.check();
    const int n = m1.n;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    if (warm_start) {
        if (static_cast<int>(warm_start->size()) != n)
            throw InputError("warm start permutation has wrong size");
        perm = *warm_start;
    }

    // Partitions with at least two rows; swaps elsewhere are no-ops.
    std::vector<const Partition*> movable;
    for (const auto& p : m1.map->partitions)
        if (p.size() >= 2) movable.push_back(&p);

    int64_t cur = detail::permuted_hamming(m1, m2, perm);
    int64_t best = cur;
    std::vector<int> best_perm = perm;
    if (movable.empty()) return {best_perm, best, std::sqrt(static_cast<double>(best))};

    Rng rng(sched.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double decay = sched.steps > 1
                             ? std::pow(sched.t_min / sched.t_max,
                                        1.0 / static_cast<double>(sched.steps - 1))
                             : 1.0;
    double t = sched.t_max;

    for (int step = 0; step < sched.steps; ++step, t *= decay) {
        const Partition& part = *movable[rng() % movable.size()];
        int p = part.begin + static_cast<int>(rng() % part.size());
        int q = part.begin + static_cast<int>(rng() % part.size());
        if (p == q) continue;

        int64_t before = detail::cross_hamming(m1, m2, perm, p, q);
        std::swap(perm[p], perm[q]);
        int64_t after = detail::cross_hamming(m1, m2, perm, p, q);
        int64_t next = cur - before + after;

        double delta = std::sqrt(static_cast<double>(next)) - std::sqrt(static_cast<double>(cur));
        if (delta <= 0 || unit(rng) < std::exp(-delta / t)) {
            cur = next;
            if (cur < best) {
                best = cur;
                best_perm = perm;
            }
        } else {
            std::swap(perm[p], perm[q]);  // reject
        }
    }

    // The reported energy must reproduce exactly under a fresh evaluation.
    int64_t check = detail::permuted_hamming(m1, m2, best_perm);
    if (check != best) throw std::logic_error("alignment energy bookkeeping diverged");
    return {std::move(best_perm), best, std::sqrt(static_cast<double>(best))};
}

// Exact minimum over all partition-respecting permutations, by depth-first
// branch and bound over rows. A short annealed run seeds the incumbent, so on
// label-rigid graphs most branches prune at shallow depth. Throws when the
// node-expansion budget is exhausted (exact search genuinely intractable).
inline Alignment exhaustive_align(const PaddedMatrix& m1, const PaddedMatrix& m2,
                                  uint64_t max_expansions = 200'000'000ULL) {
    check_shared_map(m1, m2);
    const int n = m1.n;

    Alignment incumbent = align(m1, m2, {4000, 2.0, 0.01, 0x5eed});
    std::vector<int> best_perm = incumbent.perm;
    int64_t best = incumbent.energy_sq;
    if (best == 0) return incumbent;  // cannot be improved

    std::vector<int> perm(n, -1);
    std::vector<uint8_t> used(n, 0);
    uint64_t expansions = 0;

    // cost added when row r is assigned: cells against all rows fixed so far
    auto delta = [&](int r) {
        int64_t d = 0;
        for (int k = 0; k <= r; ++k) {
            d += m1.get(k, r) != m2.get(perm[k], perm[r]);
            if (k != r) d += m1.get(r, k) != m2.get(perm[r], perm[k]);
        }
        return d;
    };

    std::function<void(int, int64_t)> rec = [&](int r, int64_t partial) {
        if (r == n) {
            if (partial < best) {
                best = partial;
                best_perm = perm;
            }
            return;
        }
        const Partition& part = m1.map->of_row(r);
        for (int cand = part.begin; cand < part.end; ++cand) {
            if (used[cand]) continue;
            if (++expansions > max_expansions)
                throw InputError("exact alignment exceeded its search budget");
            perm[r] = cand;
            used[cand] = 1;
            int64_t next = partial + delta(r);
            if (next < best) rec(r + 1, next);
            used[cand] = 0;
            perm[r] = -1;
        }
    };
    rec(0, 0);

    Alignment result;
    result.perm = std::move(best_perm);
    result.energy_sq = best;
    result.energy = std::sqrt(static_cast<double>(best));
    return result;
}

// Full structural-distance pipeline for two compressed STGs.
inline double structural_distance(const StructuralTemporalGraph& g1,
                                  const StructuralTemporalGraph& g2,
                                  const AnnealSchedule& sched) {
    auto a1 = augment(g1);
    auto a2 = augment(g2);
    auto [m1, m2] = to_padded_pair(a1, a2);
    return align(m1, m2, sched).energy;
}

}  // namespace stg
