#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "stg/augment.hpp"
#include "stg/centroid.hpp"
#include "stg/util.hpp"

namespace stg {

// Connected directed subgraph of 2..5 nodes in canonical form: node order and
// edge list are the lexicographically smallest over all permutations, so two
// subgraphs are label-preserving isomorphic iff their canonical keys match.
// Node labels: instances carry their level kind, prototypes their
// feature_name:feature_value.
struct LabeledSubgraph {
    std::vector<std::string> labels;
    std::vector<std::tuple<int, int, EdgeRole>> edges;  // (from, to, role), sorted
    std::string key;

    bool operator<(const LabeledSubgraph& o) const { return key < o.key; }
    bool operator==(const LabeledSubgraph& o) const { return key == o.key; }
};

struct MineOptions {
    uint64_t candidate_cap = 2'000'000;  // per-graph connected-subset budget
    int workers = 1;
};

namespace mine_detail {

struct FlatGraph {
    std::vector<std::string> labels;
    std::vector<std::tuple<int, int, EdgeRole>> edges;
    std::vector<std::vector<int>> neighbors;  // undirected, deduplicated
};

inline FlatGraph flatten(const AugmentedGraph& a) {
    FlatGraph f;
    std::map<std::string, int> index;
    for (const auto& [kind, nodes] : a.levels)
        for (const auto& n : nodes) {
            index[n.id] = static_cast<int>(f.labels.size());
            f.labels.push_back(level_name(kind));
        }
    for (const auto& p : a.prototypes) {
        index[p.id()] = static_cast<int>(f.labels.size());
        f.labels.push_back(p.label());
    }
    f.neighbors.resize(f.labels.size());
    auto add = [&](const std::set<std::pair<std::string, std::string>>& es, EdgeRole role) {
        for (const auto& [u, v] : es) {
            auto iu = index.find(u), iv = index.find(v);
            if (iu == index.end() || iv == index.end())
                throw InputError("edge references unknown node: " + u + " -> " + v);
            f.edges.push_back({iu->second, iv->second, role});
            f.neighbors[iu->second].push_back(iv->second);
            f.neighbors[iv->second].push_back(iu->second);
        }
    };
    add(a.hierarchy_edges, EdgeRole::Hierarchy);
    add(a.prototype_edges, EdgeRole::Prototype);
    add(a.chain_edges, EdgeRole::Chain);
    for (auto& ns : f.neighbors) {
        std::sort(ns.begin(), ns.end());
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    }
    return f;
}

inline std::string serialize(const std::vector<std::string>& labels,
                             const std::vector<std::tuple<int, int, EdgeRole>>& edges) {
    std::ostringstream os;
    for (const auto& l : labels) os << l << ";";
    os << "|";
    for (const auto& [u, v, r] : edges) os << u << ">" << v << ":" << edge_role_name(r) << ";";
    return os.str();
}

// Minimal serialization over all node orders (<= 5! = 120 permutations).
inline LabeledSubgraph canonicalize(const std::vector<std::string>& labels,
                                    std::vector<std::tuple<int, int, EdgeRole>> edges) {
    const int k = static_cast<int>(labels.size());
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    LabeledSubgraph best;
    do {
        std::vector<std::string> pl(k);
        for (int i = 0; i < k; ++i) pl[perm[i]] = labels[i];
        std::vector<std::tuple<int, int, EdgeRole>> pe;
        pe.reserve(edges.size());
        for (const auto& [u, v, r] : edges) pe.push_back({perm[u], perm[v], r});
        std::sort(pe.begin(), pe.end());
        std::string s = serialize(pl, pe);
        if (best.key.empty() || s < best.key) {
            best.labels = std::move(pl);
            best.edges = std::move(pe);
            best.key = std::move(s);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// All connected induced k-subsets, each exactly once (extension enumeration:
// grow from an anchor node using only higher-numbered neighbors).
template <typename F>
inline void connected_subsets(const FlatGraph& g, int k, uint64_t cap, F&& emit) {
    const int n = static_cast<int>(g.labels.size());
    uint64_t seen = 0;
    std::vector<int> subset;
    std::vector<char> in_subset(n, 0), banned(n, 0);

    // Choose-or-ban over the frontier: once a vertex is passed over it stays
    // banned for the rest of the branch, so every subset is emitted once.
    std::function<void(int, std::vector<int>)> grow = [&](int anchor, std::vector<int> frontier) {
        if (static_cast<int>(subset.size()) == k) {
            if (++seen > cap)
                throw InputError("connected-subset enumeration exceeded the candidate cap");
            emit(subset);
            return;
        }
        std::vector<int> locally_banned;
        while (!frontier.empty()) {
            int v = frontier.back();
            frontier.pop_back();
            std::vector<int> next = frontier;
            for (int w : g.neighbors[v])
                if (w > anchor && !in_subset[w] && !banned[w] && w != v &&
                    std::find(next.begin(), next.end(), w) == next.end())
                    next.push_back(w);
            subset.push_back(v);
            in_subset[v] = 1;
            grow(anchor, std::move(next));
            in_subset[v] = 0;
            subset.pop_back();
            banned[v] = 1;
            locally_banned.push_back(v);
        }
        for (int v : locally_banned) banned[v] = 0;
    };

    for (int v = 0; v < n; ++v) {
        subset = {v};
        in_subset[v] = 1;
        std::vector<int> frontier;
        for (int w : g.neighbors[v])
            if (w > v) frontier.push_back(w);
        grow(v, std::move(frontier));
        in_subset[v] = 0;
    }
}

inline std::set<LabeledSubgraph> enumerate_graph(const AugmentedGraph& a, int size,
                                                 uint64_t cap) {
    FlatGraph f = flatten(a);
    std::set<LabeledSubgraph> out;
    connected_subsets(f, size, cap, [&](const std::vector<int>& subset) {
        std::vector<int> pos(f.labels.size(), -1);
        std::vector<std::string> labels;
        for (size_t i = 0; i < subset.size(); ++i) {
            pos[subset[i]] = static_cast<int>(i);
            labels.push_back(f.labels[subset[i]]);
        }
        std::vector<std::tuple<int, int, EdgeRole>> edges;
        for (const auto& [u, v, r] : f.edges)
            if (pos[u] >= 0 && pos[v] >= 0) edges.push_back({pos[u], pos[v], r});
        out.insert(canonicalize(labels, std::move(edges)));
    });
    return out;
}

// Label-respecting non-induced embedding of the pattern into the host.
inline bool embeds_into(const LabeledSubgraph& pattern, const FlatGraph& host) {
    const int k = static_cast<int>(pattern.labels.size());
    std::set<std::tuple<int, int, EdgeRole>> host_edges(host.edges.begin(), host.edges.end());
    std::vector<int> assign(k, -1);
    std::vector<char> used(host.labels.size(), 0);

    std::function<bool(int)> match = [&](int i) {
        if (i == k) return true;
        for (int h = 0; h < static_cast<int>(host.labels.size()); ++h) {
            if (used[h] || host.labels[h] != pattern.labels[i]) continue;
            bool ok = true;
            for (const auto& [u, v, r] : pattern.edges) {
                if (u == i && assign[v] >= 0 && !host_edges.count({h, assign[v], r})) ok = false;
                if (v == i && assign[u] >= 0 && !host_edges.count({assign[u], h, r})) ok = false;
                if (!ok) break;
            }
            if (!ok) continue;
            assign[i] = h;
            used[h] = 1;
            if (match(i + 1)) return true;
            used[h] = 0;
            assign[i] = -1;
        }
        return false;
    };
    return match(0);
}

}  // namespace mine_detail

inline bool embeds(const LabeledSubgraph& pattern, const AugmentedGraph& host) {
    auto f = mine_detail::flatten(host);
    return mine_detail::embeds_into(pattern, f);
}

// Canonical connected size-node subgraphs occurring in every corpus member.
// Per-graph enumeration is induced; the intersection runs smallest graph
// first so the candidate set only ever shrinks.
inline std::set<LabeledSubgraph> common_subgraphs(const std::vector<AugmentedGraph>& corpus,
                                                  int size = 5, const MineOptions& opt = {}) {
    if (corpus.empty()) throw InputError("empty corpus");
    if (size < 2 || size > 5) throw ConfigError("subgraph size must be in [2, 5]");

    std::vector<int> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return corpus[a].node_count() < corpus[b].node_count();
    });

    std::vector<std::set<LabeledSubgraph>> per_graph(corpus.size());
    std::vector<std::string> errors(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), opt.workers, [&](int i) {
        try {
            per_graph[i] = mine_detail::enumerate_graph(corpus[order[i]], size,
                                                        opt.candidate_cap);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw InputError(e);

    std::set<LabeledSubgraph> common = std::move(per_graph[0]);
    for (size_t i = 1; i < per_graph.size() && !common.empty(); ++i) {
        std::set<LabeledSubgraph> kept;
        std::set_intersection(common.begin(), common.end(), per_graph[i].begin(),
                              per_graph[i].end(), std::inserter(kept, kept.begin()));
        common = std::move(kept);
    }
    return common;
}

struct ContainmentReport {
    double percent = 100.0;
    int contained = 0;
    int total = 0;
    bool vacuous = false;  // empty common set: 100% by convention, flagged
};

// Fraction of the common subgraphs that embed into the centroid.
inline ContainmentReport containment_rate(const std::set<LabeledSubgraph>& common,
                                          const AugmentedGraph& centroid) {
    ContainmentReport r;
    r.total = static_cast<int>(common.size());
    if (common.empty()) {
        r.vacuous = true;
        return r;
    }
    auto host = mine_detail::flatten(centroid);
    for (const auto& s : common)
        if (mine_detail::embeds_into(s, host)) ++r.contained;
    r.percent = 100.0 * static_cast<double>(r.contained) / static_cast<double>(r.total);
    return r;
}

// GraphViz rendering of one canonical subgraph (solid: hierarchy, dashed:
// prototype, dotted: chain).
inline std::string subgraph_dot(const LabeledSubgraph& s, const std::string& name = "subgraph") {
    std::ostringstream os;
    os << "digraph \"" << name << "\" {\n";
    for (size_t i = 0; i < s.labels.size(); ++i)
        os << "  n" << i << " [label=\"" << s.labels[i] << "\"];\n";
    for (const auto& [u, v, r] : s.edges) {
        const char* style = r == EdgeRole::Hierarchy ? "solid"
                            : r == EdgeRole::Prototype ? "dashed"
                                                       : "dotted";
        os << "  n" << u << " -> n" << v << " [style=" << style << "];\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace stg
