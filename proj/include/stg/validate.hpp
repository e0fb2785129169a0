#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stg/model.hpp"

namespace stg {

// Structural rule identifiers.
// G1..G5: global edge rules. I1..I5: instance-level rules. P1..P2: prototype rules.
struct Violation {
    std::string rule;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(const std::string& rule) const {
        for (const auto& v : violations)
            if (v.rule == rule) return true;
        return false;
    }
    void add(std::string rule, std::string msg) {
        violations.push_back({std::move(rule), std::move(msg)});
    }
    std::string to_string() const {
        std::ostringstream os;
        for (const auto& v : violations) os << v.rule << ": " << v.message << "\n";
        return os.str();
    }
};

namespace detail {

// I4 applies between nodes of a non-overlapping level; I5 always.
// `parents_pos[i]` holds the sorted chain positions (previous level) of node i's parents.
inline void check_parent_ordering(LevelKind lower_kind, const std::string& level_tag,
                                  const std::vector<std::vector<int>>& parents_pos,
                                  int upper_size, ValidationReport& rep) {
    const int n = static_cast<int>(parents_pos.size());
    for (int i = 0; i < n; ++i) {
        if (parents_pos[i].empty() || parents_pos[i].size() > 2)
            rep.add("I1", level_tag + " node " + std::to_string(i) + " has " +
                              std::to_string(parents_pos[i].size()) + " parents");
    }
    if (n > 0 && upper_size > 0) {
        if (parents_pos.front().empty() || parents_pos.front().front() != 0)
            rep.add("I3", level_tag + " chain start lacks previous chain start as parent");
        if (parents_pos.back().empty() || parents_pos.back().back() != upper_size - 1)
            rep.add("I3", level_tag + " chain end lacks previous chain end as parent");
    }
    for (int i = 1; i < n; ++i) {
        if (parents_pos[i].empty() || parents_pos[i - 1].empty()) continue;
        int first_i = parents_pos[i].front();
        int first_prev = parents_pos[i - 1].front();
        int last_prev = parents_pos[i - 1].back();
        if (first_i < first_prev)
            rep.add("I5", level_tag + " node " + std::to_string(i) +
                              "'s first parent precedes node " + std::to_string(i - 1) +
                              "'s first parent");
        if (!level_may_overlap(lower_kind) && first_i < last_prev)
            rep.add("I4", level_tag + " node " + std::to_string(i) +
                              "'s first parent precedes node " + std::to_string(i - 1) +
                              "'s last parent");
    }
}

}  // namespace detail

// Validate a compressed STG. Chain and prototype rules are checked against the
// implicit encoding: chain_index ordering and FeatureSet completeness.
inline ValidationReport validate_stg(const StructuralTemporalGraph& g) {
    ValidationReport rep;

    std::map<std::string, std::pair<int, int>> pos;  // id -> (level pos, chain pos)
    for (size_t li = 0; li < g.levels.size(); ++li) {
        const auto& [kind, nodes] = g.levels[li];
        for (size_t ci = 0; ci < nodes.size(); ++ci) {
            const auto& node = nodes[ci];
            if (pos.count(node.id))
                rep.add("I2", "duplicate node id " + node.id);
            pos[node.id] = {static_cast<int>(li), static_cast<int>(ci)};
            if (node.chain_index != static_cast<int>(ci))
                rep.add("I2", "node " + node.id + " chain_index " +
                                  std::to_string(node.chain_index) + " != position " +
                                  std::to_string(ci));
            if (!feature_set_complete(kind, node.features))
                rep.add("P1", std::string("node ") + node.id + " has incomplete/illegal " +
                                  level_name(kind) + " feature set");
        }
        // P2: adjacent identical labels, for the levels that require distinctness.
        if (kind == LevelKind::Segmentation || kind == LevelKind::Key || kind == LevelKind::Chord) {
            for (size_t ci = 1; ci < nodes.size(); ++ci)
                if (nodes[ci].features == nodes[ci - 1].features)
                    rep.add("P2", std::string(level_name(kind)) + " nodes " + nodes[ci - 1].id +
                                      " and " + nodes[ci].id + " have identical feature sets");
        }
    }

    std::vector<std::vector<std::vector<int>>> parents_pos(g.levels.size());
    for (size_t li = 0; li < g.levels.size(); ++li)
        parents_pos[li].resize(g.levels[li].second.size());

    for (const auto& [from, to] : g.edges) {
        if (from == to) {
            rep.add("G1", "self-loop on " + from);
            continue;
        }
        auto itf = pos.find(from), itt = pos.find(to);
        if (itf == pos.end() || itt == pos.end()) {
            rep.add("G5", "edge references unknown node: " + from + " -> " + to);
            continue;
        }
        int lf = itf->second.first, lt = itt->second.first;
        if (lf > lt) {
            rep.add("G4", "upward edge " + from + " -> " + to);
        } else if (lt - lf != 1) {
            rep.add("G5", "edge between non-adjacent levels: " + from + " -> " + to);
        } else {
            parents_pos[lt][itt->second.second].push_back(itf->second.second);
        }
    }

    for (size_t li = 1; li < g.levels.size(); ++li) {
        for (auto& ps : parents_pos[li]) std::sort(ps.begin(), ps.end());
        detail::check_parent_ordering(g.levels[li].first,
                                      level_name(g.levels[li].first), parents_pos[li],
                                      static_cast<int>(g.levels[li - 1].second.size()), rep);
    }
    return rep;
}

// Validate an augmented graph: all structure is explicit topology here.
inline ValidationReport validate_augmented(const AugmentedGraph& g) {
    ValidationReport rep;

    std::map<std::string, std::pair<int, int>> ipos;  // instance id -> (level pos, index in list)
    for (size_t li = 0; li < g.levels.size(); ++li)
        for (size_t ci = 0; ci < g.levels[li].second.size(); ++ci)
            ipos[g.levels[li].second[ci].id] = {static_cast<int>(li), static_cast<int>(ci)};

    std::map<std::string, const PrototypeNode*> ppos;
    for (const auto& p : g.prototypes) ppos[p.id()] = &p;

    auto known = [&](const std::string& id) { return ipos.count(id) || ppos.count(id); };

    for (const auto& edges : {&g.hierarchy_edges, &g.prototype_edges, &g.chain_edges})
        for (const auto& [from, to] : *edges) {
            if (from == to) rep.add("G1", "self-loop on " + from);
            if (!known(from) || !known(to))
                rep.add("G5", "edge references unknown node: " + from + " -> " + to);
            if (ppos.count(to))
                rep.add("G2", "edge into prototype node: " + from + " -> " + to);
        }

    // Prototype edges: level and feature-name compatibility (G3).
    for (const auto& [from, to] : g.prototype_edges) {
        auto itp = ppos.find(from);
        auto iti = ipos.find(to);
        if (itp == ppos.end()) {
            rep.add("G2", "prototype edge from non-prototype node " + from);
            continue;
        }
        if (iti == ipos.end()) continue;
        LevelKind lk = g.levels[iti->second.first].first;
        const auto& names = level_feature_names(lk);
        bool name_ok = std::find(names.begin(), names.end(), itp->second->feature_name) != names.end();
        if (itp->second->level != lk || !name_ok)
            rep.add("G3", "prototype " + from + " cannot describe " + std::string(level_name(lk)) +
                              " instance " + to);
    }

    // Hierarchy edges: adjacency and direction.
    std::vector<std::vector<std::vector<int>>> parents_pos(g.levels.size());
    for (size_t li = 0; li < g.levels.size(); ++li)
        parents_pos[li].resize(g.levels[li].second.size());
    for (const auto& [from, to] : g.hierarchy_edges) {
        auto itf = ipos.find(from), itt = ipos.find(to);
        if (itf == ipos.end() || itt == ipos.end()) {
            rep.add("G2", "hierarchy edge touches prototype node: " + from + " -> " + to);
            continue;
        }
        int lf = itf->second.first, lt = itt->second.first;
        if (lf > lt)
            rep.add("G4", "upward edge " + from + " -> " + to);
        else if (lt - lf != 1)
            rep.add("G5", "edge between non-adjacent levels: " + from + " -> " + to);
        else
            parents_pos[lt][itt->second.second].push_back(itf->second.second);
    }

    // Chain edges: each level must form one directed path in stored node order (I2).
    for (size_t li = 0; li < g.levels.size(); ++li) {
        const auto& nodes = g.levels[li].second;
        std::set<std::pair<std::string, std::string>> expected;
        for (size_t ci = 0; ci + 1 < nodes.size(); ++ci)
            expected.insert({nodes[ci].id, nodes[ci + 1].id});
        for (const auto& e : expected)
            if (!g.chain_edges.count(e))
                rep.add("I2", std::string(level_name(g.levels[li].first)) +
                                  " chain is missing edge " + e.first + " -> " + e.second);
    }
    for (const auto& [from, to] : g.chain_edges) {
        auto itf = ipos.find(from), itt = ipos.find(to);
        if (itf == ipos.end() || itt == ipos.end()) {
            rep.add("G2", "chain edge touches prototype node: " + from + " -> " + to);
            continue;
        }
        if (itf->second.first != itt->second.first ||
            itt->second.second != itf->second.second + 1)
            rep.add("I2", "spurious chain edge " + from + " -> " + to);
    }

    for (size_t li = 1; li < g.levels.size(); ++li) {
        for (auto& ps : parents_pos[li]) std::sort(ps.begin(), ps.end());
        detail::check_parent_ordering(g.levels[li].first,
                                      level_name(g.levels[li].first), parents_pos[li],
                                      static_cast<int>(g.levels[li - 1].second.size()), rep);
    }

    // Prototype parent sets per instance (P1, P2).
    std::map<std::string, std::set<std::string>> proto_parents;  // instance id -> proto ids
    std::map<std::string, std::map<std::string, int>> per_feature;
    for (const auto& [from, to] : g.prototype_edges) {
        auto itp = ppos.find(from);
        if (itp == ppos.end() || !ipos.count(to)) continue;
        proto_parents[to].insert(from);
        per_feature[to][itp->second->feature_name]++;
    }
    for (size_t li = 0; li < g.levels.size(); ++li) {
        LevelKind kind = g.levels[li].first;
        for (const auto& node : g.levels[li].second) {
            const auto& have = per_feature[node.id];
            if (kind == LevelKind::Motif) {
                int total = 0;
                for (const auto& [n, c] : have) total += c;
                if (total != 1)
                    rep.add("P1", "motif node " + node.id + " has " + std::to_string(total) +
                                      " pattern/filler prototype parents");
            } else {
                for (const auto& name : level_feature_names(kind)) {
                    auto it = have.find(name);
                    int c = it == have.end() ? 0 : it->second;
                    if (c != 1)
                        rep.add("P1", "node " + node.id + " has " + std::to_string(c) + " '" +
                                          name + "' prototype parents");
                }
            }
        }
        if (kind == LevelKind::Segmentation || kind == LevelKind::Key || kind == LevelKind::Chord) {
            const auto& nodes = g.levels[li].second;
            for (size_t ci = 1; ci < nodes.size(); ++ci)
                if (proto_parents[nodes[ci].id] == proto_parents[nodes[ci - 1].id])
                    rep.add("P2", std::string(level_name(kind)) + " nodes " + nodes[ci - 1].id +
                                      " and " + nodes[ci].id + " share a prototype parent set");
        }
    }
    return rep;
}

}  // namespace stg
