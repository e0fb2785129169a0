#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stg/align.hpp"
#include "stg/centroid.hpp"
#include "stg/matrix.hpp"
#include "stg/repair.hpp"
#include "stg/util.hpp"
#include "stg/validate.hpp"

namespace stg {

// An ordered list of cell flips over a base matrix. Every prefix that ends on
// a macro boundary yields a fully valid graph; coordinates are distinct, so
// the pre-alignment Hamming distance to the base equals cells.size().
struct EditScript {
    std::vector<std::pair<int, int>> cells;
    uint64_t seed = 0;
    bool complete = true;  // false: the retry budget ran out at cells.size() flips
};

struct SyntheticCorpus {
    PaddedMatrix base;
    std::vector<PaddedMatrix> variants;
    std::vector<EditScript> scripts;
    int edits_per_variant = 0;
    uint64_t seed = 0;
};

struct EditOptions {
    uint64_t retry_budget_per_edit = 1000;
    // re-sample whole scripts until the exhaustively aligned distance equals
    // sqrt(n); only viable on toy bases (permutations can otherwise absorb
    // part of an edit set and shrink the true distance below sqrt(n))
    bool verify_exact = false;
    int verify_budget = 200;
    // grow the corpus one member at a time, admitting a candidate variant only
    // if every member's exact mean distance over the rest of the corpus stays
    // at least sqrt(n). Overlapping edit scripts can otherwise leave a member
    // closer to the rest than the base is; the equidistance argument assumes
    // mutually far scripts, which tiny toys cannot guarantee per draw.
    bool verify_centroid = false;
    int candidate_budget = 400;  // sampled variants before giving up
};

inline PaddedMatrix apply_script(const PaddedMatrix& base, const EditScript& script) {
    PaddedMatrix m = base;
    for (auto [i, j] : script.cells) m.flip(i, j);
    return m;
}

namespace synth_detail {

inline bool matrix_valid(const PaddedMatrix& m) {
    return validate_augmented(matrix_to_augmented(m)).ok();
}

// One validity-preserving macro: either a single hierarchy-cell flip, or a
// two-cell prototype reassignment within one feature group. Chain cells are
// never flippable alone (any single flip breaks the path).
inline std::optional<std::vector<std::pair<int, int>>> try_macro(
    PaddedMatrix& m, const std::set<std::pair<int, int>>& used, int max_cells, Rng& rng) {
    const auto& map = *m.map;
    const int levels = static_cast<int>(map.level_kinds.size());

    bool want_pair = max_cells >= 2 && (rng() % 2 == 0);
    if (!want_pair && levels >= 2) {
        // hierarchy flip: a random cell between two adjacent instance levels
        int li = static_cast<int>(rng() % (levels - 1));
        const auto& up = map.partitions[li];
        const auto& lo = map.partitions[li + 1];
        int i = up.begin + static_cast<int>(rng() % up.size());
        int j = lo.begin + static_cast<int>(rng() % lo.size());
        if (used.count({i, j})) return std::nullopt;
        m.flip(i, j);
        if (matrix_valid(m)) return std::vector<std::pair<int, int>>{{i, j}};
        m.flip(i, j);
        return std::nullopt;
    }
    if (max_cells < 2) return std::nullopt;

    // prototype reassignment: move one instance's parent within a feature group
    std::vector<int> proto_parts;
    for (size_t pi = 0; pi < map.partitions.size(); ++pi)
        if (map.partitions[pi].kind == Partition::Kind::Prototype &&
            map.partitions[pi].size() >= 2)
            proto_parts.push_back(static_cast<int>(pi));
    if (proto_parts.empty()) return std::nullopt;
    const auto& part = map.partitions[proto_parts[rng() % proto_parts.size()]];
    int inst_part = -1;
    for (int li = 0; li < levels; ++li)
        if (map.level_kinds[li] == part.level) inst_part = li;
    if (inst_part < 0) return std::nullopt;
    const auto& ip = map.partitions[inst_part];
    if (ip.size() == 0) return std::nullopt;
    int inst = ip.begin + static_cast<int>(rng() % ip.size());
    int from = part.begin + static_cast<int>(rng() % part.size());
    int to = part.begin + static_cast<int>(rng() % part.size());
    if (from == to || m.get(from, inst) != 1 || m.get(to, inst) != 0) return std::nullopt;
    if (used.count({from, inst}) || used.count({to, inst})) return std::nullopt;
    m.flip(from, inst);
    m.flip(to, inst);
    if (matrix_valid(m)) return std::vector<std::pair<int, int>>{{from, inst}, {to, inst}};
    m.flip(from, inst);
    m.flip(to, inst);
    return std::nullopt;
}

inline EditScript sample_script(const PaddedMatrix& base, int n, uint64_t seed,
                                const EditOptions& opt) {
    EditScript script;
    script.seed = seed;
    Rng rng(seed);
    PaddedMatrix m = base;
    std::set<std::pair<int, int>> used;
    uint64_t attempts = 0;
    const uint64_t budget = opt.retry_budget_per_edit * std::max(1, n);
    while (static_cast<int>(script.cells.size()) < n) {
        if (++attempts > budget) {
            script.complete = false;
            return script;
        }
        int remaining = n - static_cast<int>(script.cells.size());
        auto cells = try_macro(m, used, remaining, rng);
        if (!cells) continue;
        for (auto c : *cells) {
            used.insert(c);
            script.cells.push_back(c);
        }
    }
    return script;
}

}  // namespace synth_detail

// Sample n distinct valid cell flips. With `verify_exact`, scripts whose true
// (exhaustively aligned) distance falls below sqrt(n) are re-sampled.
inline EditScript random_valid_edits(const PaddedMatrix& base, int n, uint64_t seed,
                                     const EditOptions& opt = {}) {
    if (n < 0) throw InputError("edit count must be >= 0");
    if (!synth_detail::matrix_valid(base)) throw InputError("edit base graph is invalid");
    EditScript best_partial;
    best_partial.seed = seed;
    best_partial.complete = false;
    for (int round = 0; round < opt.verify_budget; ++round) {
        auto script = synth_detail::sample_script(base, n, sub_seed(seed, 0xed17, round), opt);
        script.seed = seed;
        if (!script.complete) {
            // an unlucky macro ordering dead-ended; re-sample from a fresh seed
            if (script.cells.size() > best_partial.cells.size()) best_partial = script;
            continue;
        }
        if (!opt.verify_exact) return script;
        auto variant = apply_script(base, script);
        if (exhaustive_align(base, variant).energy_sq == n) return script;
    }
    if (opt.verify_exact && best_partial.cells.empty())
        throw InputError("could not sample a permutation-stable edit script of size " +
                         std::to_string(n));
    return best_partial;
}

// k variants, each ceil(|E|/2) valid flips from the base. By construction the
// base attains minimal sum of distances to the corpus.
inline SyntheticCorpus build_corpus(const PaddedMatrix& base, int k, uint64_t seed,
                                    const EditOptions& opt = {}, int workers = 1) {
    if (k < 1) throw InputError("corpus size must be >= 1");
    const int edits = static_cast<int>((base.edge_count() + 1) / 2);  // ceil(|E| / 2)
    SyntheticCorpus corpus;
    corpus.base = base;
    corpus.seed = seed;
    corpus.edits_per_variant = edits;

    if (!opt.verify_centroid) {
        corpus.scripts.resize(k);
        corpus.variants.resize(k, base);
        std::vector<std::string> errors(k);
        parallel_for(k, workers, [&](int v) {
            try {
                corpus.scripts[v] = random_valid_edits(base, edits, sub_seed(seed, 0xc0, v), opt);
                corpus.variants[v] = apply_script(base, corpus.scripts[v]);
            } catch (const std::exception& e) {
                errors[v] = e.what();
            }
        });
        for (const auto& e : errors)
            if (!e.empty()) throw InputError("corpus generation failed: " + e);
        for (const auto& s : corpus.scripts)
            if (!s.complete)
                throw InputError("corpus generation exhausted the edit retry budget at " +
                                 std::to_string(s.cells.size()) + " flips");
        return corpus;
    }

    // Grow the corpus one member at a time. A candidate joins only if, with it
    // included, every member's exact mean distance over the rest of the corpus
    // stays at least sqrt(edits) — the base's own loss — so the base provably
    // attains minimal loss over {base} ∪ members at every step.
    const double base_loss = std::sqrt(static_cast<double>(edits));
    std::vector<double> rowsum;  // per accepted member, sum of dists to the others
    for (int cand = 0; cand < opt.candidate_budget && static_cast<int>(corpus.variants.size()) < k;
         ++cand) {
        auto script = random_valid_edits(base, edits, sub_seed(seed, 0xca, cand), opt);
        if (!script.complete) continue;
        auto variant = apply_script(base, script);

        const int m = static_cast<int>(corpus.variants.size());
        std::vector<double> d(m, 0.0);
        parallel_for(m, workers, [&](int i) {
            d[i] = exhaustive_align(corpus.variants[i], variant).energy;
        });
        bool ok = true;
        double cand_sum = 0;
        for (int i = 0; i < m && ok; ++i) {
            cand_sum += d[i];
            if ((rowsum[i] + d[i]) / m < base_loss - 1e-12) ok = false;
        }
        if (m > 0 && cand_sum / m < base_loss - 1e-12) ok = false;
        if (!ok) continue;

        for (int i = 0; i < m; ++i) rowsum[i] += d[i];
        rowsum.push_back(cand_sum);
        corpus.scripts.push_back(std::move(script));
        corpus.variants.push_back(std::move(variant));
    }
    if (static_cast<int>(corpus.variants.size()) < k)
        throw InputError("could not build a corpus with the base as provable centroid within " +
                         std::to_string(opt.candidate_budget) + " candidates");
    return corpus;
}

struct DistErrorRow {
    int base_index = 0;
    double p = 0;
    int n = 0;  // requested edits ceil(|E| * p)
    int achieved = 0;
    bool complete = true;
    double true_dist = 0;  // sqrt(achieved)
    double est_dist = 0;
    double rel_error = 0;
};

// Relative error of annealed distance against the known sqrt(n) ground truth,
// across a grid of edit fractions p. Incomplete scripts are reported as rows
// with the achieved flip count rather than silently dropped.
inline std::vector<DistErrorRow> relative_error_study(const std::vector<PaddedMatrix>& bases,
                                                      const std::vector<double>& p_grid,
                                                      const AnnealSchedule& sched, uint64_t seed,
                                                      const EditOptions& opt = {},
                                                      int workers = 1) {
    if (bases.empty()) throw InputError("no base graphs");
    std::vector<std::pair<int, int>> jobs;
    for (size_t b = 0; b < bases.size(); ++b)
        for (size_t pi = 0; pi < p_grid.size(); ++pi)
            jobs.push_back({static_cast<int>(b), static_cast<int>(pi)});
    std::vector<DistErrorRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), workers, [&](int t) {
        auto [b, pi] = jobs[t];
        DistErrorRow row;
        row.base_index = b;
        row.p = p_grid[pi];
        row.n = static_cast<int>(
            std::ceil(static_cast<double>(bases[b].edge_count()) * row.p));
        auto script = random_valid_edits(bases[b], row.n, sub_seed(seed, 0x5e, t), opt);
        row.achieved = static_cast<int>(script.cells.size());
        row.complete = script.complete;
        row.true_dist = std::sqrt(static_cast<double>(row.achieved));
        auto variant = apply_script(bases[b], script);
        AnnealSchedule s = sched;
        s.seed = sub_seed(seed, 0xa1, t);
        row.est_dist = align(bases[b], variant, s).energy;
        row.rel_error = row.true_dist > 0
                            ? std::abs(row.est_dist - row.true_dist) / row.true_dist
                            : 0.0;
        rows[t] = row;
    });
    return rows;
}

struct CentroidErrorRow {
    int k = 0;
    double loss_true = 0;   // loss of the known centroid g
    double loss_derived = 0;
    double loss_naive = 0;
    double e_gd = 0;
    double e_gn = 0;
    bool derived_fell_back = false;  // repaired candidate lost to the naive member
};

struct CentroidStudyOptions {
    CentroidConfig centroid;
    RepairOptions repair;
    EditOptions edits;
    bool exhaustive_loss = false;  // exact alignment for the reported losses (toys)
    AnnealSchedule loss_sched{3000, 2.0, 0.01, 0};
};

namespace synth_detail {

// Mean distance to the corpus. When the candidate is itself a corpus member,
// pass its index so the loss averages over the *rest* of the corpus (the
// naive-centroid convention); self-distance zero would otherwise let any
// member undercut an external centroid.
inline double corpus_loss(const PaddedMatrix& candidate, const std::vector<PaddedMatrix>& corpus,
                          const CentroidStudyOptions& opt, uint64_t seed,
                          int exclude_index = -1) {
    double sum = 0;
    int counted = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        if (static_cast<int>(i) == exclude_index) continue;
        ++counted;
        if (opt.exhaustive_loss) {
            sum += exhaustive_align(candidate, corpus[i]).energy;
        } else {
            AnnealSchedule s = opt.loss_sched;
            s.seed = sub_seed(seed, 0x10f5, i);
            sum += align(candidate, corpus[i], s).energy;
        }
    }
    if (counted == 0) throw InputError("loss over an empty corpus");
    return sum / static_cast<double>(counted);
}

}  // namespace synth_detail

// Full ground-truth centroid experiment for one base graph: for each k, build
// a synthetic corpus around g, run the annealed centroid search, repair the
// result, and compare losses against g and the naive centroid. If the
// repaired candidate ends up worse than the naive member, the naive member is
// reported as the derived centroid (fall-back flagged in the row).
inline std::vector<CentroidErrorRow> centroid_error_study(const PaddedMatrix& g,
                                                          const std::vector<int>& k_range,
                                                          uint64_t seed,
                                                          const CentroidStudyOptions& opt = {}) {
    std::vector<CentroidErrorRow> rows;
    for (int k : k_range) {
        auto corpus = build_corpus(g, k, sub_seed(seed, 0xc0b5, k), opt.edits,
                                   opt.centroid.workers);

        CentroidConfig cfg = opt.centroid;
        cfg.outer.seed = sub_seed(seed, 0xce, k);
        auto centroid = derive_centroid(corpus.variants, cfg);
        auto repaired = repair(centroid.best_candidate, opt.repair);

        CentroidErrorRow row;
        row.k = k;
        uint64_t ls = sub_seed(seed, 0x105e, k);
        row.loss_true = synth_detail::corpus_loss(g, corpus.variants, opt, ls);
        row.loss_naive = synth_detail::corpus_loss(corpus.variants[centroid.naive_index],
                                                   corpus.variants, opt, ls,
                                                   centroid.naive_index);
        row.loss_derived = synth_detail::corpus_loss(repaired.matrix, corpus.variants, opt, ls);
        if (row.loss_derived > row.loss_naive) {
            row.loss_derived = row.loss_naive;
            row.derived_fell_back = true;
        }
        if (row.loss_true <= 0)
            throw InputError("degenerate study: the true centroid has zero loss");
        row.e_gd = (row.loss_derived - row.loss_true) / row.loss_true;
        row.e_gn = (row.loss_naive - row.loss_true) / row.loss_true;
        rows.push_back(row);
    }
    return rows;
}

inline std::string dist_error_csv(const std::vector<DistErrorRow>& rows) {
    std::ostringstream os;
    os << "base_index,p,n,achieved,complete,true_dist,est_dist,rel_error\n";
    for (const auto& r : rows)
        os << r.base_index << "," << r.p << "," << r.n << "," << r.achieved << ","
           << (r.complete ? 1 : 0) << "," << r.true_dist << "," << r.est_dist << ","
           << r.rel_error << "\n";
    return os.str();
}

inline std::string centroid_error_csv(const std::vector<CentroidErrorRow>& rows) {
    std::ostringstream os;
    os << "k,loss_true,loss_derived,loss_naive,e_gd,e_gn,derived_fell_back\n";
    for (const auto& r : rows)
        os << r.k << "," << r.loss_true << "," << r.loss_derived << "," << r.loss_naive << ","
           << r.e_gd << "," << r.e_gn << "," << (r.derived_fell_back ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace stg
