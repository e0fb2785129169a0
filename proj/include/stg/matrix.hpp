#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "stg/augment.hpp"
#include "stg/model.hpp"
#include "stg/util.hpp"

namespace stg {

// One alignment partition: either the instance nodes of a level, or the
// prototype nodes of one (level, feature name) group. Rows of a partition are
// contiguous. Prototype partitions carry one labeled slot per feature value in
// the union over all graphs sharing the map; instance partitions are padded
// with anonymous dummy rows to the largest level size.
struct Partition {
    enum class Kind { Instance, Prototype };
    Kind kind = Kind::Instance;
    LevelKind level = LevelKind::Segmentation;
    std::string feature_name;                // Prototype partitions only
    std::vector<std::string> feature_values; // per-row value, Prototype only
    int begin = 0;
    int end = 0;  // half-open row range

    int size() const { return end - begin; }
};

struct PartitionMap {
    std::vector<LevelKind> level_kinds;  // common level sequence, rank order
    std::vector<Partition> partitions;   // instance partitions first, then prototype
    int n = 0;
    std::vector<int> row_partition;  // row index -> partition index

    const Partition& of_row(int row) const { return partitions[row_partition[row]]; }
    bool row_is_instance(int row) const { return of_row(row).kind == Partition::Kind::Instance; }
};

// Binary adjacency matrix over a shared partition map. `dummy[i]` marks rows
// that carry no node of this particular graph.
struct PaddedMatrix {
    std::shared_ptr<const PartitionMap> map;
    int n = 0;
    std::vector<uint8_t> a;              // row-major n*n
    std::vector<uint8_t> dummy;          // per row
    std::vector<std::string> row_ids;    // instance node ids; empty for dummies/prototypes

    uint8_t get(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
    void set(int i, int j, uint8_t v) { a[static_cast<size_t>(i) * n + j] = v; }
    void flip(int i, int j) { a[static_cast<size_t>(i) * n + j] ^= 1; }
    int64_t edge_count() const {
        int64_t c = 0;
        for (uint8_t v : a) c += v;
        return c;
    }
};

// Build matrices for any number of augmented graphs over one shared map.
// All graphs must have the same level-kind sequence.
inline std::vector<PaddedMatrix> build_matrices(const std::vector<const AugmentedGraph*>& graphs) {
    if (graphs.empty()) throw InputError("no graphs to build matrices for");
    std::vector<LevelKind> kinds;
    for (const auto& [k, nodes] : graphs[0]->levels) kinds.push_back(k);
    for (const auto* g : graphs) {
        std::vector<LevelKind> k2;
        for (const auto& [k, nodes] : g->levels) k2.push_back(k);
        if (k2 != kinds)
            throw InputError("graphs have different level sequences; cannot share a partition map");
    }

    auto map = std::make_shared<PartitionMap>();
    map->level_kinds = kinds;

    // Instance partitions, padded to the largest level size.
    for (size_t li = 0; li < kinds.size(); ++li) {
        size_t maxn = 0;
        for (const auto* g : graphs) maxn = std::max(maxn, g->levels[li].second.size());
        Partition p;
        p.kind = Partition::Kind::Instance;
        p.level = kinds[li];
        p.begin = map->n;
        p.end = map->n + static_cast<int>(maxn);
        map->n = p.end;
        map->partitions.push_back(std::move(p));
    }
    // Prototype partitions: union of feature values per (level, feature name).
    std::map<std::pair<int, std::string>, std::set<std::string>> groups;
    for (const auto* g : graphs)
        for (const auto& p : g->prototypes)
            groups[{rank_of(p.level), p.feature_name}].insert(p.feature_value);
    for (const auto& [key, values] : groups) {
        Partition p;
        p.kind = Partition::Kind::Prototype;
        p.level = static_cast<LevelKind>(key.first);
        p.feature_name = key.second;
        p.feature_values.assign(values.begin(), values.end());
        p.begin = map->n;
        p.end = map->n + static_cast<int>(values.size());
        map->n = p.end;
        map->partitions.push_back(std::move(p));
    }
    map->row_partition.resize(map->n);
    for (size_t pi = 0; pi < map->partitions.size(); ++pi)
        for (int r = map->partitions[pi].begin; r < map->partitions[pi].end; ++r)
            map->row_partition[r] = static_cast<int>(pi);

    std::vector<PaddedMatrix> out;
    for (const auto* g : graphs) {
        PaddedMatrix m;
        m.map = map;
        m.n = map->n;
        m.a.assign(static_cast<size_t>(m.n) * m.n, 0);
        m.dummy.assign(m.n, 1);
        m.row_ids.assign(m.n, "");

        std::map<std::string, int> row_of;
        for (size_t li = 0; li < kinds.size(); ++li) {
            const auto& part = map->partitions[li];
            const auto& nodes = g->levels[li].second;
            for (size_t ci = 0; ci < nodes.size(); ++ci) {
                int r = part.begin + static_cast<int>(ci);
                m.dummy[r] = 0;
                m.row_ids[r] = nodes[ci].id;
                row_of[nodes[ci].id] = r;
            }
        }
        for (const auto& part : map->partitions) {
            if (part.kind != Partition::Kind::Prototype) continue;
            for (int r = part.begin; r < part.end; ++r) {
                PrototypeNode proto{part.level, part.feature_name,
                                    part.feature_values[r - part.begin]};
                bool present =
                    std::binary_search(g->prototypes.begin(), g->prototypes.end(), proto);
                if (present) {
                    m.dummy[r] = 0;
                    row_of[proto.id()] = r;
                }
            }
        }
        auto add_edges = [&](const std::set<std::pair<std::string, std::string>>& edges) {
            for (const auto& [from, to] : edges) m.set(row_of.at(from), row_of.at(to), 1);
        };
        add_edges(g->hierarchy_edges);
        add_edges(g->prototype_edges);
        add_edges(g->chain_edges);
        out.push_back(std::move(m));
    }
    return out;
}

inline std::pair<PaddedMatrix, PaddedMatrix> to_padded_pair(const AugmentedGraph& a1,
                                                            const AugmentedGraph& a2) {
    auto ms = build_matrices({&a1, &a2});
    return {std::move(ms[0]), std::move(ms[1])};
}

inline int64_t hamming(const PaddedMatrix& m1, const PaddedMatrix& m2) {
    if (m1.n != m2.n) throw InputError("matrix dimension mismatch");
    int64_t c = 0;
    for (size_t i = 0; i < m1.a.size(); ++i) c += m1.a[i] != m2.a[i];
    return c;
}

// Eq-style Frobenius distance; for binary matrices this is sqrt(#differing cells).
inline double frobenius_distance(const PaddedMatrix& m1, const PaddedMatrix& m2) {
    return std::sqrt(static_cast<double>(hamming(m1, m2)));
}

// Reconstruct an augmented graph from a matrix. Instance rows with at least
// one incident edge are live nodes; chain order follows the chain-edge path
// when it is a full path over the live rows, otherwise row order. Features
// come from prototype parents.
inline AugmentedGraph matrix_to_augmented(const PaddedMatrix& m) {
    const auto& map = *m.map;
    auto degree = [&](int r) {
        int64_t d = 0;
        for (int k = 0; k < m.n; ++k) d += m.get(r, k) + m.get(k, r);
        return d;
    };

    AugmentedGraph g;
    std::vector<std::string> row_name(m.n);
    std::vector<int> row_level(m.n, -1);

    for (size_t pi = 0; pi < map.partitions.size(); ++pi) {
        const auto& part = map.partitions[pi];
        if (part.kind != Partition::Kind::Instance) continue;
        std::vector<int> live;
        for (int r = part.begin; r < part.end; ++r)
            if (degree(r) > 0) live.push_back(r);

        // Follow the chain if it orders all live rows.
        std::map<int, int> succ;
        std::set<int> has_pred;
        for (int r : live)
            for (int r2 : live)
                if (r != r2 && m.get(r, r2) && map.row_partition[r2] == static_cast<int>(pi)) {
                    succ[r] = r2;
                    has_pred.insert(r2);
                }
        std::vector<int> ordered;
        std::vector<int> starts;
        for (int r : live)
            if (!has_pred.count(r)) starts.push_back(r);
        if (starts.size() == 1 && succ.size() + 1 == live.size()) {
            int cur = starts[0];
            std::set<int> seen;
            while (seen.insert(cur).second) {
                ordered.push_back(cur);
                auto it = succ.find(cur);
                if (it == succ.end()) break;
                cur = it->second;
            }
        }
        if (ordered.size() != live.size()) ordered = live;

        std::vector<InstanceNode> nodes;
        for (size_t ci = 0; ci < ordered.size(); ++ci) {
            InstanceNode n;
            n.id = std::string(level_name(part.level)) + "_" + std::to_string(ci);
            n.level = part.level;
            n.chain_index = static_cast<int>(ci);
            n.has_interval = false;
            row_name[ordered[ci]] = n.id;
            row_level[ordered[ci]] = static_cast<int>(pi);
            nodes.push_back(std::move(n));
        }
        g.levels.emplace_back(part.level, std::move(nodes));
    }

    std::set<PrototypeNode> protos;
    for (const auto& part : map.partitions) {
        if (part.kind != Partition::Kind::Prototype) continue;
        for (int r = part.begin; r < part.end; ++r) {
            if (degree(r) == 0) continue;
            PrototypeNode p{part.level, part.feature_name, part.feature_values[r - part.begin]};
            row_name[r] = p.id();
            protos.insert(p);
        }
    }
    g.prototypes.assign(protos.begin(), protos.end());

    std::map<std::string, FeatureSet> features;
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) {
            if (!m.get(i, j) || row_name[i].empty() || row_name[j].empty()) continue;
            const auto& pi = map.of_row(i);
            const auto& pj = map.of_row(j);
            if (pi.kind == Partition::Kind::Prototype) {
                g.prototype_edges.insert({row_name[i], row_name[j]});
                features[row_name[j]][pi.feature_name] = pi.feature_values[i - pi.begin];
            } else if (&pi == &pj) {
                g.chain_edges.insert({row_name[i], row_name[j]});
            } else {
                g.hierarchy_edges.insert({row_name[i], row_name[j]});
            }
        }
    for (auto& [kind, nodes] : g.levels)
        for (auto& n : nodes)
            if (features.count(n.id)) n.features = features[n.id];
    return g;
}

}  // namespace stg
