#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "stg/model.hpp"
#include "stg/util.hpp"
#include "stg/validate.hpp"

namespace stg {

// Rewrite a compressed STG so node labels and intra-level order become
// explicit topology: one prototype node per distinct (level, feature name,
// feature value), prototype->instance edges, and a linear chain per level.
inline AugmentedGraph augment(const StructuralTemporalGraph& g) {
    auto rep = validate_stg(g);
    if (!rep.ok()) throw InputError("cannot augment an invalid STG:\n" + rep.to_string());

    AugmentedGraph a;
    a.levels = g.levels;
    a.hierarchy_edges = g.edges;

    std::set<PrototypeNode> protos;
    for (const auto& [kind, nodes] : a.levels) {
        for (size_t ci = 0; ci < nodes.size(); ++ci) {
            for (const auto& [name, value] : nodes[ci].features) {
                PrototypeNode p{kind, name, value};
                protos.insert(p);
                a.prototype_edges.insert({p.id(), nodes[ci].id});
            }
            if (ci + 1 < nodes.size()) a.chain_edges.insert({nodes[ci].id, nodes[ci + 1].id});
        }
    }
    a.prototypes.assign(protos.begin(), protos.end());
    return a;
}

// Fold prototype parents and chain topology back into node labels. Only valid
// augmented graphs compress; intervals are not reconstructed (a centroid has
// no timeline).
inline StructuralTemporalGraph compress(const AugmentedGraph& a) {
    auto rep = validate_augmented(a);
    if (!rep.ok())
        throw InputError("cannot compress an invalid augmented graph:\n" + rep.to_string());

    std::map<std::string, const PrototypeNode*> proto_by_id;
    for (const auto& p : a.prototypes) proto_by_id[p.id()] = &p;

    StructuralTemporalGraph g;
    std::map<std::string, std::string> rename;  // old instance id -> new id
    for (const auto& [kind, nodes] : a.levels) {
        std::vector<InstanceNode> out;
        for (size_t ci = 0; ci < nodes.size(); ++ci) {
            InstanceNode n;
            n.id = std::string(level_name(kind)) + "_" + std::to_string(ci);
            n.level = kind;
            n.chain_index = static_cast<int>(ci);
            n.has_interval = false;
            rename[nodes[ci].id] = n.id;
            out.push_back(std::move(n));
        }
        g.levels.emplace_back(kind, std::move(out));
    }
    for (const auto& [from, to] : a.prototype_edges) {
        const auto* p = proto_by_id.at(from);
        for (auto& [kind, nodes] : g.levels)
            for (auto& n : nodes)
                if (n.id == rename.at(to)) n.features[p->feature_name] = p->feature_value;
    }
    for (const auto& [from, to] : a.hierarchy_edges)
        g.edges.insert({rename.at(from), rename.at(to)});
    return g;
}

// Label-preserving isomorphism check on the instance subgraph, used by the
// round-trip property. Relies on both graphs being valid (chain order is then
// canonical), so equality up to id renaming reduces to positional equality.
inline bool stg_equivalent(const StructuralTemporalGraph& a, const StructuralTemporalGraph& b) {
    if (a.levels.size() != b.levels.size()) return false;
    std::map<std::string, std::pair<int, int>> pa, pb;
    for (size_t li = 0; li < a.levels.size(); ++li) {
        if (a.levels[li].first != b.levels[li].first) return false;
        const auto& na = a.levels[li].second;
        const auto& nb = b.levels[li].second;
        if (na.size() != nb.size()) return false;
        for (size_t ci = 0; ci < na.size(); ++ci) {
            if (na[ci].features != nb[ci].features) return false;
            pa[na[ci].id] = {static_cast<int>(li), static_cast<int>(ci)};
            pb[nb[ci].id] = {static_cast<int>(li), static_cast<int>(ci)};
        }
    }
    auto positional = [](const std::set<std::pair<std::string, std::string>>& edges,
                         std::map<std::string, std::pair<int, int>>& pos) {
        std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> out;
        for (const auto& [f, t] : edges) out.insert({pos.at(f), pos.at(t)});
        return out;
    };
    return positional(a.edges, pa) == positional(b.edges, pb);
}

}  // namespace stg
