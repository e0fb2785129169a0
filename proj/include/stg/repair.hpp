#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stg/matrix.hpp"
#include "stg/util.hpp"
#include "stg/validate.hpp"

namespace stg {

struct RepairOptions {
    double timeout_per_partition = 300.0;  // seconds
    std::string solver_path;               // external SMT-LIB solver; built-in engine if empty
    std::string debug_dir;                 // dump emitted SMT-LIB scripts here when set
    int workers = 1;
    int exact_order_limit = 7;             // largest level solved by exhaustive chain orders
    uint64_t exact_pair_budget = 400000;   // max (upper x lower) order combinations per pair
    int exact_assign_limit = 4096;         // max label tuples for the exact prototype DP
};

struct PartitionStat {
    std::string name;
    double seconds = 0;
    bool timeout_hit = false;
    bool optimal = true;
    int64_t flips = 0;
};

struct RepairResult {
    PaddedMatrix matrix;
    int64_t objective = 0;  // Hamming distance to the input
    std::vector<PartitionStat> stats;
};

// A constraint bundle: the rule subset, the cell scope it may rewrite, hard
// edge assignments frozen by earlier phases, and the SMT-LIB v2 script.
struct ConstraintBundle {
    std::string name;
    std::vector<std::string> rules;
    std::vector<std::pair<int, int>> scope;
    std::vector<std::tuple<int, int, int>> frozen;  // (i, j, bit)
    std::string smtlib;
};

namespace repair_detail {

inline int64_t row_degree(const PaddedMatrix& m, int r) {
    int64_t d = 0;
    for (int k = 0; k < m.n; ++k) d += m.get(r, k) + m.get(k, r);
    return d;
}

// Is an edge at (i, j) structurally permitted at all (Table-1 style rules)?
inline bool cell_legal(const PartitionMap& map, int i, int j) {
    if (i == j) return false;
    const auto& pi = map.partitions[map.row_partition[i]];
    const auto& pj = map.partitions[map.row_partition[j]];
    if (pj.kind == Partition::Kind::Prototype) return false;
    if (pi.kind == Partition::Kind::Prototype) return pi.level == pj.level;
    int li = map.row_partition[i], lj = map.row_partition[j];
    return lj == li || lj == li + 1;
}

inline bool p2_level(LevelKind k) {
    return k == LevelKind::Segmentation || k == LevelKind::Key || k == LevelKind::Chord;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// Prototype feature groups for one instance level. Motif pattern_num and
// filler rows merge into one group (a motif node carries exactly one of them).
inline std::vector<std::vector<int>> proto_groups(const PartitionMap& map, LevelKind kind) {
    std::vector<std::vector<int>> groups;
    if (kind == LevelKind::Motif) {
        std::vector<int> rows;
        for (const auto& p : map.partitions)
            if (p.kind == Partition::Kind::Prototype && p.level == kind)
                for (int r = p.begin; r < p.end; ++r) rows.push_back(r);
        if (!rows.empty()) groups.push_back(std::move(rows));
        return groups;
    }
    for (const auto& name : level_feature_names(kind)) {
        std::vector<int> rows;
        for (const auto& p : map.partitions)
            if (p.kind == Partition::Kind::Prototype && p.level == kind && p.feature_name == name)
                for (int r = p.begin; r < p.end; ++r) rows.push_back(r);
        groups.push_back(std::move(rows));
    }
    return groups;
}

// Minimal-flip staircase parent assignment via DP over (first, last) parent
// positions. `hier(u, t)` is the approx bit for upper-order position u ->
// lower-order position t. Returns per-node (first, last) or nullopt if U == 0.
struct StairResult {
    int64_t cost = 0;
    std::vector<std::pair<int, int>> parents;  // positions in upper order
};

inline std::optional<StairResult> staircase_dp(int upper_n, int lower_n, bool non_overlap,
                                               const std::function<int(int, int)>& hier) {
    if (lower_n == 0) return StairResult{};
    if (upper_n == 0) return std::nullopt;

    const int u = upper_n;
    auto cost_of = [&](int t, int f, int l) {
        int64_t c = 0;
        for (int p = 0; p < u; ++p) {
            int want = (p == f || p == l) ? 1 : 0;
            c += hier(p, t) != want;
        }
        return c;
    };
    const int64_t inf = INT64_MAX / 4;
    // dp[f][l]: best cost up to node t with node t's parents (f, l)
    std::vector<std::vector<int64_t>> dp(u, std::vector<int64_t>(u, inf));
    std::vector<std::vector<std::vector<std::pair<int, int>>>> back(
        lower_n, std::vector<std::vector<std::pair<int, int>>>(u, std::vector<std::pair<int, int>>(u)));

    for (int f = 0; f <= 0; ++f)  // I3: chain start parents include upper start
        for (int l = f; l < u; ++l) dp[f][l] = cost_of(0, f, l);

    for (int t = 1; t < lower_n; ++t) {
        std::vector<std::vector<int64_t>> nx(u, std::vector<int64_t>(u, inf));
        for (int f = 0; f < u; ++f)
            for (int l = f; l < u; ++l) {
                int64_t step = cost_of(t, f, l);
                for (int pf = 0; pf <= f; ++pf)
                    for (int pl = pf; pl < u; ++pl) {
                        if (dp[pf][pl] >= inf) continue;
                        if (f < pf) continue;                  // I5
                        if (non_overlap && f < pl) continue;   // I4
                        if (dp[pf][pl] + step < nx[f][l]) {
                            nx[f][l] = dp[pf][pl] + step;
                            back[t][f][l] = {pf, pl};
                        }
                    }
            }
        dp = std::move(nx);
    }

    StairResult res;
    res.cost = inf;
    std::pair<int, int> end{-1, -1};
    for (int f = 0; f < u; ++f) {
        int l = u - 1;  // I3: chain end parents include upper end
        if (dp[f][l] < res.cost) {
            res.cost = dp[f][l];
            end = {f, l};
        }
    }
    if (res.cost >= inf) return std::nullopt;
    res.parents.assign(lower_n, {0, 0});
    for (int t = lower_n - 1; t >= 0; --t) {
        res.parents[t] = end;
        if (t > 0) end = back[t][end.first][end.second];
    }
    return res;
}

}  // namespace repair_detail

// ---------------------------------------------------------------------------
// SMT-LIB encoding
// ---------------------------------------------------------------------------

namespace smt_detail {

inline std::string edge_var(int i, int j) {
    return "e_" + std::to_string(i) + "_" + std::to_string(j);
}

inline void emit_header(std::ostringstream& os) {
    os << "(set-option :produce-models true)\n";
    os << "(set-logic ALL)\n";
}

}  // namespace smt_detail

// Encode the instance constraints (I1-I5 plus the relevant global rules) for
// one consecutive level pair as an SMT-LIB optimization script. Chain
// positions and first/last parents are modeled with uninterpreted functions.
inline ConstraintBundle encode_instance_pair(const PaddedMatrix& approx, int upper_level,
                                             int lower_level) {
    const auto& map = *approx.map;
    const int levels = static_cast<int>(map.level_kinds.size());
    if (upper_level < 0 || lower_level >= levels || lower_level != upper_level + 1)
        throw InputError("encode_instance_pair requires adjacent instance levels");

    const auto& up = map.partitions[upper_level];
    const auto& lo = map.partitions[lower_level];
    LevelKind lower_kind = map.level_kinds[lower_level];

    ConstraintBundle b;
    b.name = std::string("instance_pair_") + level_name(map.level_kinds[upper_level]) + "_" +
             level_name(lower_kind);
    b.rules = {"G1", "G4", "G5", "I1", "I2", "I3", "I5"};
    if (!level_may_overlap(lower_kind)) b.rules.push_back("I4");

    std::ostringstream os;
    smt_detail::emit_header(os);

    auto active = [&](const Partition& p) {
        std::vector<int> rows;
        for (int r = p.begin; r < p.end; ++r)
            if (repair_detail::row_degree(approx, r) > 0) rows.push_back(r);
        return rows;
    };
    auto uppers = active(up);
    auto lowers = active(lo);

    // Edge variables: upper->lower hierarchy cells and lower intra-level cells.
    for (int ur : uppers)
        for (int lr : lowers) {
            b.scope.push_back({ur, lr});
            os << "(declare-fun " << smt_detail::edge_var(ur, lr) << " () Bool)\n";
        }
    for (int a : lowers)
        for (int c : lowers)
            if (a != c) {
                b.scope.push_back({a, c});
                os << "(declare-fun " << smt_detail::edge_var(a, c) << " () Bool)\n";
            }

    // Uninterpreted functions: chain position and first/last parent position.
    os << "(declare-fun cpos (Int) Int)\n(declare-fun upos (Int) Int)\n"
       << "(declare-fun firstp (Int) Int)\n(declare-fun lastp (Int) Int)\n";
    const int un = static_cast<int>(uppers.size());
    const int ln = static_cast<int>(lowers.size());
    for (int i = 0; i < ln; ++i)
        os << "(assert (and (<= 0 (cpos " << lowers[i] << ")) (< (cpos " << lowers[i] << ") "
           << ln << ")))\n";
    for (int i = 0; i < un; ++i)
        os << "(assert (= (upos " << uppers[i] << ") " << i << "))\n";  // upper frozen
    if (ln > 1) {
        os << "(assert (distinct";
        for (int lr : lowers) os << " (cpos " << lr << ")";
        os << "))\n";
    }

    // I2: intra-level edge iff chain successor.
    for (int a : lowers)
        for (int c : lowers)
            if (a != c)
                os << "(assert (= " << smt_detail::edge_var(a, c) << " (= (cpos " << c
                   << ") (+ (cpos " << a << ") 1))))\n";

    for (int lr : lowers) {
        // I1: one or two parents.
        os << "(assert (let ((cnt (+";
        for (int ur : uppers) os << " (ite " << smt_detail::edge_var(ur, lr) << " 1 0)";
        os << "))) (or (= cnt 1) (= cnt 2))))\n";
        // first/last parent bounds + realization.
        for (int ur : uppers)
            os << "(assert (=> " << smt_detail::edge_var(ur, lr) << " (and (<= (firstp " << lr
               << ") (upos " << ur << ")) (<= (upos " << ur << ") (lastp " << lr << ")))))\n";
        os << "(assert (or";
        for (int ur : uppers)
            os << " (and " << smt_detail::edge_var(ur, lr) << " (= (firstp " << lr << ") (upos "
               << ur << ")))";
        os << "))\n(assert (or";
        for (int ur : uppers)
            os << " (and " << smt_detail::edge_var(ur, lr) << " (= (lastp " << lr << ") (upos "
               << ur << ")))";
        os << "))\n";
        // I3 at the chain endpoints.
        os << "(assert (=> (= (cpos " << lr << ") 0) (= (firstp " << lr << ") 0)))\n";
        os << "(assert (=> (= (cpos " << lr << ") " << (ln - 1) << ") (= (lastp " << lr << ") "
           << (un - 1) << ")))\n";
    }
    // I4/I5 between chain neighbours.
    for (int a : lowers)
        for (int c : lowers)
            if (a != c) {
                os << "(assert (=> (= (cpos " << c << ") (+ (cpos " << a << ") 1)) (>= (firstp "
                   << c << ") (firstp " << a << "))))\n";
                if (!level_may_overlap(lower_kind))
                    os << "(assert (=> (= (cpos " << c << ") (+ (cpos " << a
                       << ") 1)) (>= (firstp " << c << ") (lastp " << a << "))))\n";
            }
    // Soft constraints: stay close to the approximate centroid (Hamming objective).
    for (const auto& [i, j] : b.scope)
        os << "(assert-soft (= " << smt_detail::edge_var(i, j) << " "
           << (approx.get(i, j) ? "true" : "false") << ") :weight 1)\n";
    os << "(check-sat)\n(get-model)\n";
    b.smtlib = os.str();
    return b;
}

// Encode the prototype constraints (P1, P2, G3) for one instance level whose
// instance subgraph is already repaired and frozen.
inline ConstraintBundle encode_prototypes(const PaddedMatrix& approx, int level,
                                          const std::vector<int>& frozen_instance_order) {
    const auto& map = *approx.map;
    if (level < 0 || level >= static_cast<int>(map.level_kinds.size()))
        throw InputError("encode_prototypes: bad level index");
    if (frozen_instance_order.empty())
        throw InputError("encode_prototypes requires a frozen instance subgraph");
    LevelKind kind = map.level_kinds[level];

    ConstraintBundle b;
    b.name = std::string("prototypes_") + level_name(kind);
    b.rules = {"G1", "G2", "G3", "P1"};
    if (repair_detail::p2_level(kind)) b.rules.push_back("P2");

    for (int inst : frozen_instance_order)
        for (int k = 0; k < approx.n; ++k)
            if (approx.get(k, inst) && map.partitions[map.row_partition[k]].kind ==
                                           Partition::Kind::Instance)
                b.frozen.push_back({k, inst, 1});

    std::ostringstream os;
    smt_detail::emit_header(os);
    auto groups = repair_detail::proto_groups(map, kind);
    for (const auto& g : groups)
        for (int pr : g)
            for (int inst : frozen_instance_order) {
                b.scope.push_back({pr, inst});
                os << "(declare-fun " << smt_detail::edge_var(pr, inst) << " () Bool)\n";
            }
    for (int inst : frozen_instance_order)
        for (const auto& g : groups) {
            os << "(assert (= 1 (+";
            for (int pr : g) os << " (ite " << smt_detail::edge_var(pr, inst) << " 1 0)";
            os << ")))\n";  // P1
        }
    if (repair_detail::p2_level(kind)) {
        for (size_t t = 1; t < frozen_instance_order.size(); ++t) {
            int a = frozen_instance_order[t - 1], c = frozen_instance_order[t];
            os << "(assert (or";
            for (const auto& g : groups)
                for (int pr : g)
                    os << " (distinct " << smt_detail::edge_var(pr, a) << " "
                       << smt_detail::edge_var(pr, c) << ")";
            os << "))\n";  // P2
        }
    }
    for (const auto& [i, j] : b.scope)
        os << "(assert-soft (= " << smt_detail::edge_var(i, j) << " "
           << (approx.get(i, j) ? "true" : "false") << ") :weight 1)\n";
    os << "(check-sat)\n(get-model)\n";
    b.smtlib = os.str();
    return b;
}

namespace repair_detail {

// Run an external SMT-LIB solver over a pipe; returns (var -> bit) or throws.
inline std::map<std::string, int> run_external_solver(const std::string& solver_path,
                                                      const ConstraintBundle& bundle,
                                                      double timeout_s,
                                                      const std::string& debug_dir) {
    namespace fs = std::filesystem;
    fs::path dir = debug_dir.empty() ? fs::temp_directory_path() : fs::path(debug_dir);
    fs::create_directories(dir);
    fs::path script = dir / (bundle.name + ".smt2");
    {
        std::ofstream out(script);
        out << bundle.smtlib;
    }
    std::string cmd = solver_path + " -T:" + std::to_string(std::max(1, (int)timeout_s)) + " " +
                      script.string() + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw SolverError("cannot launch solver: " + solver_path);
    std::string output;
    char buf[4096];
    while (size_t got = fread(buf, 1, sizeof buf, pipe)) output.append(buf, got);
    int rc = pclose(pipe);
    if (output.find("unsat") != std::string::npos)
        throw SolverError("partition " + bundle.name +
                          " is unsatisfiable; the constraint encoding is inconsistent");
    if (output.find("sat") == std::string::npos)
        throw SolverError("solver failed on " + bundle.name + " (rc=" + std::to_string(rc) +
                          "): " + output.substr(0, 400));
    // Parse (define-fun e_i_j () Bool true|false)
    std::map<std::string, int> model;
    size_t pos = 0;
    while ((pos = output.find("define-fun e_", pos)) != std::string::npos) {
        size_t name_start = output.find('e', pos);
        size_t name_end = output.find_first_of(" \t\n(", name_start);
        std::string name = output.substr(name_start, name_end - name_start);
        size_t val = output.find_first_of("tf", output.find("Bool", name_end));
        if (val == std::string::npos) break;
        model[name] = output[val] == 't' ? 1 : 0;
        pos = name_end;
    }
    return model;
}

}  // namespace repair_detail

// ---------------------------------------------------------------------------
// Built-in repair engine
// ---------------------------------------------------------------------------

namespace repair_detail {

struct LevelPlan {
    std::vector<int> order;  // active rows, chain order
};

// Candidate chain orders for one level: exhaustive for small levels, else the
// approx-derived path (when decodable) and row order.
inline std::vector<std::vector<int>> order_candidates(const PaddedMatrix& m,
                                                      const std::vector<int>& active,
                                                      int exact_limit, bool* exact) {
    std::vector<std::vector<int>> out;
    if (static_cast<int>(active.size()) <= exact_limit) {
        *exact = true;
        std::vector<int> idx = active;
        std::sort(idx.begin(), idx.end());
        do {
            out.push_back(idx);
        } while (std::next_permutation(idx.begin(), idx.end()));
        return out;
    }
    *exact = false;
    out.push_back(active);  // row order
    // follow the existing chain when it decodes to a full path
    std::map<int, int> succ;
    std::set<int> has_pred;
    for (int a : active)
        for (int c : active)
            if (a != c && m.get(a, c) && m.map->row_partition[a] == m.map->row_partition[c]) {
                if (!succ.count(a)) succ[a] = c;
                has_pred.insert(c);
            }
    std::vector<int> starts;
    for (int r : active)
        if (!has_pred.count(r)) starts.push_back(r);
    if (starts.size() == 1) {
        std::vector<int> path;
        std::set<int> seen;
        int cur = starts[0];
        while (seen.insert(cur).second) {
            path.push_back(cur);
            auto it = succ.find(cur);
            if (it == succ.end()) break;
            cur = it->second;
        }
        if (path.size() == active.size()) out.push_back(path);
    }
    return out;
}

inline int64_t chain_cost(const PaddedMatrix& m, const Partition& part,
                          const std::vector<int>& order) {
    std::set<std::pair<int, int>> path;
    for (size_t t = 0; t + 1 < order.size(); ++t) path.insert({order[t], order[t + 1]});
    int64_t cost = 0;
    for (int i = part.begin; i < part.end; ++i)
        for (int j = part.begin; j < part.end; ++j) {
            if (i == j) continue;
            int want = path.count({i, j}) ? 1 : 0;
            cost += m.get(i, j) != want;
        }
    return cost;
}

}  // namespace repair_detail

// Project an approximate centroid onto the nearest valid augmented STG.
// Instance level-pairs solve top-down with each solved level frozen, then
// prototype bundles per level. Uses the built-in exact/heuristic engine, or an
// external SMT-LIB optimizing solver when `solver_path` is set.
inline RepairResult repair(const PaddedMatrix& approx, const RepairOptions& opt = {}) {
    using namespace repair_detail;
    const auto& map = *approx.map;
    const int levels = static_cast<int>(map.level_kinds.size());

    RepairResult res;
    res.matrix = approx;
    PaddedMatrix& work = res.matrix;

    // Phase 0: clear cells no edge may ever occupy (Table-1 style rules).
    {
        Timer timer;
        PartitionStat st;
        st.name = "global_sweep";
        for (int i = 0; i < work.n; ++i)
            for (int j = 0; j < work.n; ++j)
                if (work.get(i, j) && !cell_legal(map, i, j)) {
                    work.set(i, j, 0);
                    ++st.flips;
                }
        st.seconds = timer.seconds();
        res.stats.push_back(st);
    }

    // Active rows per instance level: nonzero degree after the sweep, clamped
    // to one node when the level's label diversity cannot satisfy P2, and
    // cleared entirely when a required prototype group has no rows or the
    // level above came out empty.
    std::vector<std::vector<int>> active(levels);
    bool above_empty = false;
    for (int li = 0; li < levels; ++li) {
        const auto& part = map.partitions[li];
        for (int r = part.begin; r < part.end; ++r)
            if (row_degree(work, r) > 0) active[li].push_back(r);
        auto groups = proto_groups(map, map.level_kinds[li]);
        bool missing_group = groups.empty();
        uint64_t diversity = 1;
        for (const auto& g : groups) {
            if (g.empty()) missing_group = true;
            diversity = std::min<uint64_t>(diversity * std::max<size_t>(g.size(), 1), 1u << 20);
        }
        if (missing_group && !active[li].empty()) active[li].clear();
        if (p2_level(map.level_kinds[li]) && diversity <= 1 && active[li].size() > 1)
            active[li].resize(1);
        if (li > 0 && above_empty) active[li].clear();
        if (active[li].empty()) above_empty = true;
    }

    // Phase 1: instance level pairs, top-down; level 0's chain joins pair (0,1).
    std::vector<LevelPlan> plans(levels);
    auto clear_scope = [&](int li, int lj) {
        // zero everything in the pair scope; chosen edges get re-set after
        for (int a = map.partitions[li].begin; a < map.partitions[li].end; ++a)
            for (int c = map.partitions[lj].begin; c < map.partitions[lj].end; ++c)
                if (a != c) work.set(a, c, 0);
    };

    // net per-phase flips, via a snapshot (clear + restore must count as zero)
    auto snapshot_flips = [](const std::vector<uint8_t>& before, const PaddedMatrix& after) {
        int64_t d = 0;
        for (size_t i = 0; i < before.size(); ++i) d += before[i] != after.a[i];
        return d;
    };

    for (int l = (levels == 1 ? 0 : 1); l < levels; ++l) {
        Timer timer;
        PartitionStat st;
        const std::vector<uint8_t> before = work.a;
        const bool joint = (l == 1);  // first pair also orders the upper level
        const bool chain_only = (levels == 1);
        st.name = chain_only ? std::string("instance_chain_") + level_name(map.level_kinds[0])
                             : std::string("instance_pair_") + level_name(map.level_kinds[l - 1]) +
                                   "_" + level_name(map.level_kinds[l]);

        if (!opt.solver_path.empty() && !chain_only) {
            auto bundle = encode_instance_pair(work, l - 1, l);
            auto model = run_external_solver(opt.solver_path, bundle, opt.timeout_per_partition,
                                             opt.debug_dir);
            for (const auto& [i, j] : bundle.scope) {
                auto it = model.find(smt_detail::edge_var(i, j));
                int bit = it == model.end() ? 0 : it->second;
                if (work.get(i, j) != bit) {
                    work.flip(i, j);
                    ++st.flips;
                }
            }
            st.optimal = false;  // external solver may have returned an intermediate model
            st.seconds = timer.seconds();
            res.stats.push_back(st);
            // recover the frozen order for the prototype phase
            std::vector<int> lowers = active[l];
            plans[l].order = lowers;
            if (joint) plans[l - 1].order = active[l - 1];
            continue;
        }

        bool exact_lower = true, exact_upper = true;
        std::vector<std::vector<int>> lower_orders =
            order_candidates(work, active[l], opt.exact_order_limit, &exact_lower);
        std::vector<std::vector<int>> upper_orders;
        if (chain_only) {
            // nothing below; the "lower" enumeration orders level 0 itself
        } else if (joint) {
            upper_orders = order_candidates(work, active[l - 1], opt.exact_order_limit,
                                            &exact_upper);
        } else {
            upper_orders = {plans[l - 1].order};
        }
        if (chain_only) {
            upper_orders = {{}};
            exact_upper = true;
        }
        if (static_cast<uint64_t>(upper_orders.size()) * lower_orders.size() >
            opt.exact_pair_budget) {
            // trim to heuristic candidates
            bool dummy = false;
            lower_orders = order_candidates(work, active[l], -1, &dummy);
            if (joint) upper_orders = order_candidates(work, active[l - 1], -1, &dummy);
            exact_lower = exact_upper = false;
        }
        st.optimal = exact_lower && exact_upper;

        int64_t best_cost = INT64_MAX;
        std::vector<int> best_lower, best_upper;
        StairResult best_stairs;
        LevelKind lower_kind = map.level_kinds[l];
        for (const auto& uo : upper_orders) {
            for (const auto& lo : lower_orders) {
                if (timer.seconds() > opt.timeout_per_partition && best_cost != INT64_MAX) {
                    st.timeout_hit = true;
                    st.optimal = false;
                    break;
                }
                int64_t cost = chain_only ? chain_cost(work, map.partitions[0], lo)
                                          : chain_cost(work, map.partitions[l], lo);
                if (joint) cost += chain_cost(work, map.partitions[0], uo);
                StairResult stairs;
                if (!chain_only && !lo.empty()) {
                    auto hier = [&](int u, int t) { return (int)work.get(uo[u], lo[t]); };
                    auto r = staircase_dp((int)uo.size(), (int)lo.size(),
                                          !level_may_overlap(lower_kind), hier);
                    if (!r) continue;  // infeasible combination (empty upper)
                    stairs = std::move(*r);
                    cost += stairs.cost;
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best_lower = lo;
                    best_upper = uo;
                    best_stairs = std::move(stairs);
                }
            }
            if (st.timeout_hit) break;
        }

        if (best_cost == INT64_MAX && !active[l].empty()) {
            // no feasible staircase (upper level empty): deactivate this level
            active[l].clear();
            for (int li2 = l + 1; li2 < levels; ++li2) active[li2].clear();
            best_lower.clear();
            best_upper = chain_only ? std::vector<int>{} : plans[l - 1].order;
        }

        // Apply: wipe scope, then set the chosen chain and staircase edges.
        if (chain_only || joint) {
            int top = chain_only ? 0 : l - 1;
            clear_scope(top, top);
            const auto& order = chain_only ? best_lower : best_upper;
            for (size_t t = 0; t + 1 < order.size(); ++t) work.set(order[t], order[t + 1], 1);
            plans[top].order = order;
        }
        if (!chain_only) {
            clear_scope(l, l);
            clear_scope(l - 1, l);
            for (size_t t = 0; t + 1 < best_lower.size(); ++t)
                work.set(best_lower[t], best_lower[t + 1], 1);
            for (size_t t = 0; t < best_lower.size(); ++t) {
                auto [f, lp] = best_stairs.parents[t];
                work.set(best_upper[f], best_lower[t], 1);
                work.set(best_upper[lp], best_lower[t], 1);
            }
            plans[l].order = best_lower;
            if (joint) plans[l - 1].order = best_upper;
        }
        st.flips = snapshot_flips(before, work);
        st.seconds = timer.seconds();
        res.stats.push_back(st);
    }
    if (levels >= 1 && plans[0].order.empty() && !active[0].empty() && levels == 1)
        plans[0].order = active[0];
    if (levels > 1 && plans[0].order.empty()) plans[0].order = active[0];

    // Phase 2: prototype wiring per level over the frozen instance subgraph.
    for (int li = 0; li < levels; ++li) {
        Timer timer;
        PartitionStat st;
        const std::vector<uint8_t> before = work.a;
        LevelKind kind = map.level_kinds[li];
        st.name = std::string("prototypes_") + level_name(kind);
        auto groups = proto_groups(map, kind);
        const auto& order = plans[li].order;

        if (!opt.solver_path.empty() && !order.empty()) {
            auto bundle = encode_prototypes(work, li, order);
            auto model = run_external_solver(opt.solver_path, bundle, opt.timeout_per_partition,
                                             opt.debug_dir);
            for (const auto& [i, j] : bundle.scope) {
                auto it = model.find(smt_detail::edge_var(i, j));
                int bit = it == model.end() ? 0 : it->second;
                if (work.get(i, j) != bit) {
                    work.flip(i, j);
                    ++st.flips;
                }
            }
            st.optimal = false;
            st.seconds = timer.seconds();
            res.stats.push_back(st);
            continue;
        }

        // Clear prototype edges into this level's instance rows.
        const auto& ipart = map.partitions[li];
        for (const auto& g : groups)
            for (int pr : g)
                for (int inst = ipart.begin; inst < ipart.end; ++inst)
                    if (work.get(pr, inst)) {
                        work.set(pr, inst, 0);
                        ++st.flips;
                    }

        const int n = static_cast<int>(order.size());
        if (n > 0 && !groups.empty()) {
            // cost of assigning proto row pr to instance inst, relative to approx
            auto assign_cost = [&](int pr, int inst) {
                return approx.get(pr, inst) ? -1 : 1;  // delta against the wipe above
            };
            // enumerate assignment tuples per node
            std::vector<std::vector<std::vector<int>>> node_choices(n);
            uint64_t tuple_count = 1;
            for (const auto& g : groups) tuple_count *= g.size();
            bool exact = tuple_count <= static_cast<uint64_t>(opt.exact_assign_limit);
            st.optimal = exact;
            for (int t = 0; t < n; ++t) {
                std::vector<std::vector<int>> choice_sets;
                for (const auto& g : groups) {
                    std::vector<int> rows = g;
                    if (!exact) {
                        // keep the two cheapest rows per group
                        std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
                            return assign_cost(a, order[t]) < assign_cost(b, order[t]);
                        });
                        if (rows.size() > 2) rows.resize(2);
                        std::sort(rows.begin(), rows.end());
                    }
                    choice_sets.push_back(rows);
                }
                // flatten the cartesian product into tuples
                std::vector<std::vector<int>> tuples{{}};
                for (const auto& cs : choice_sets) {
                    std::vector<std::vector<int>> nx;
                    for (const auto& tup : tuples)
                        for (int r : cs) {
                            auto t2 = tup;
                            t2.push_back(r);
                            nx.push_back(std::move(t2));
                        }
                    tuples = std::move(nx);
                }
                node_choices[t] = std::move(tuples);
            }
            auto tuple_cost = [&](int t, const std::vector<int>& tup) {
                int64_t c = 0;
                for (int pr : tup) c += assign_cost(pr, order[t]);
                return c;
            };
            std::vector<std::vector<int>> pick(n);  // chosen tuple per node
            if (!p2_level(kind) || n == 1) {
                for (int t = 0; t < n; ++t) {
                    int64_t bc = INT64_MAX;
                    for (const auto& tup : node_choices[t]) {
                        int64_t c = tuple_cost(t, tup);
                        if (c < bc) {
                            bc = c;
                            pick[t] = tup;
                        }
                    }
                }
            } else {
                // DP with "adjacent tuples differ" (P2)
                const int64_t inf = INT64_MAX / 4;
                std::vector<int64_t> dp(node_choices[0].size());
                std::vector<std::vector<int>> back(n);
                for (size_t s = 0; s < node_choices[0].size(); ++s)
                    dp[s] = tuple_cost(0, node_choices[0][s]);
                std::vector<std::vector<int64_t>> alldp{dp};
                for (int t = 1; t < n; ++t) {
                    std::vector<int64_t> nx(node_choices[t].size(), inf);
                    back[t].assign(node_choices[t].size(), -1);
                    for (size_t s = 0; s < node_choices[t].size(); ++s) {
                        int64_t step = tuple_cost(t, node_choices[t][s]);
                        for (size_t p = 0; p < node_choices[t - 1].size(); ++p) {
                            if (node_choices[t][s] == node_choices[t - 1][p]) continue;
                            if (alldp[t - 1][p] + step < nx[s]) {
                                nx[s] = alldp[t - 1][p] + step;
                                back[t][s] = static_cast<int>(p);
                            }
                        }
                    }
                    alldp.push_back(nx);
                }
                int bs = 0;
                for (size_t s = 1; s < alldp[n - 1].size(); ++s)
                    if (alldp[n - 1][s] < alldp[n - 1][bs]) bs = static_cast<int>(s);
                if (alldp[n - 1][bs] >= inf)
                    throw SolverError("prototype partition " + st.name +
                                      " is unsatisfiable; the encoding is inconsistent");
                for (int t = n - 1; t >= 0; --t) {
                    pick[t] = node_choices[t][bs];
                    if (t > 0) bs = back[t][bs];
                }
            }
            for (int t = 0; t < n; ++t)
                for (int pr : pick[t]) work.set(pr, order[t], 1);
        }
        st.flips = snapshot_flips(before, work);
        st.seconds = timer.seconds();
        res.stats.push_back(st);
    }

    res.objective = hamming(approx, res.matrix);

    auto check = validate_augmented(matrix_to_augmented(res.matrix));
    if (!check.ok())
        throw SolverError("repair produced an invalid graph (encoding bug):\n" +
                          check.to_string());
    return res;
}

}  // namespace stg
