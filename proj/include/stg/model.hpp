#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stg/util.hpp"

namespace stg {

// Hierarchy levels, top to bottom. The enum value is the rank.
enum class LevelKind : int { Segmentation = 0, Motif = 1, Key = 2, Chord = 3, Melody = 4 };

inline constexpr int kLevelKindCount = 5;

inline int rank_of(LevelKind k) { return static_cast<int>(k); }

inline const char* level_name(LevelKind k) {
    switch (k) {
        case LevelKind::Segmentation: return "segmentation";
        case LevelKind::Motif: return "motif";
        case LevelKind::Key: return "key";
        case LevelKind::Chord: return "chord";
        case LevelKind::Melody: return "melody";
    }
    return "?";
}

inline std::optional<LevelKind> level_from_name(const std::string& s) {
    for (int i = 0; i < kLevelKindCount; ++i) {
        auto k = static_cast<LevelKind>(i);
        if (s == level_name(k)) return k;
    }
    return std::nullopt;
}

// Motif instances may overlap in time; all other levels are disjoint.
inline bool level_may_overlap(LevelKind k) { return k == LevelKind::Motif; }

// Ordered feature-name -> feature-value mapping.
using FeatureSet = std::map<std::string, std::string>;

// Feature schema per level. Motif nodes carry either pattern_num or filler,
// never both; everywhere else the full name list is mandatory.
inline const std::vector<std::string>& level_feature_names(LevelKind k) {
    static const std::vector<std::string> seg{"section_num"};
    static const std::vector<std::string> motif{"pattern_num", "filler"};
    static const std::vector<std::string> key{"quality", "relative_key_num"};
    static const std::vector<std::string> chord{"degree1", "degree2", "quality"};
    static const std::vector<std::string> melody{"abs_interval", "interval_sign"};
    switch (k) {
        case LevelKind::Segmentation: return seg;
        case LevelKind::Motif: return motif;
        case LevelKind::Key: return key;
        case LevelKind::Chord: return chord;
        case LevelKind::Melody: return melody;
    }
    return seg;
}

inline bool is_nonneg_int(const std::string& v) {
    if (v.empty()) return false;
    return std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool is_int(const std::string& v) {
    if (v.empty()) return false;
    size_t i = (v[0] == '-' || v[0] == '+') ? 1 : 0;
    if (i == v.size()) return false;
    return std::all_of(v.begin() + i, v.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Legal value check for one feature of one level.
inline bool feature_value_legal(LevelKind k, const std::string& name, const std::string& value) {
    static const std::set<std::string> chord_quality{"M", "m", "d", "d7", "h7", "D7", "a", "a6", "a7"};
    switch (k) {
        case LevelKind::Segmentation:
            return name == "section_num" && is_nonneg_int(value);
        case LevelKind::Motif:
            if (name == "pattern_num") return is_nonneg_int(value);
            if (name == "filler") return value == "filler";
            return false;
        case LevelKind::Key:
            if (name == "relative_key_num") return is_nonneg_int(value);
            if (name == "quality") return value == "M" || value == "m";
            return false;
        case LevelKind::Chord:
            if (name == "quality") return chord_quality.count(value) > 0;
            if (name == "degree1" || name == "degree2") {
                if (!is_nonneg_int(value)) return false;
                int d = std::stoi(value);
                return d >= 1 && d <= 12;
            }
            return false;
        case LevelKind::Melody:
            if (name == "abs_interval") return is_int(value);
            if (name == "interval_sign") return value == "+" || value == "-";
            return false;
    }
    return false;
}

// True iff `features` is a complete, legal feature set for level `k`.
inline bool feature_set_complete(LevelKind k, const FeatureSet& features) {
    for (const auto& [n, v] : features)
        if (!feature_value_legal(k, n, v)) return false;
    if (k == LevelKind::Motif)
        return features.size() == 1 &&
               (features.count("pattern_num") || features.count("filler"));
    const auto& names = level_feature_names(k);
    if (features.size() != names.size()) return false;
    for (const auto& n : names)
        if (!features.count(n)) return false;
    return true;
}

struct InstanceNode {
    std::string id;
    LevelKind level = LevelKind::Segmentation;
    int chain_index = 0;
    double start = 0.0;
    double end = 0.0;
    bool has_interval = true;  // centroids carry no timeline
    FeatureSet features;
};

// Compressed STG: levels in rank order, hierarchy edges parent->child between
// adjacent levels only.
struct StructuralTemporalGraph {
    std::vector<std::pair<LevelKind, std::vector<InstanceNode>>> levels;
    std::set<std::pair<std::string, std::string>> edges;

    const InstanceNode* find(const std::string& id) const {
        for (const auto& [k, nodes] : levels)
            for (const auto& n : nodes)
                if (n.id == id) return &n;
        return nullptr;
    }
    std::optional<int> level_pos_of(const std::string& id) const {
        for (size_t i = 0; i < levels.size(); ++i)
            for (const auto& n : levels[i].second)
                if (n.id == id) return static_cast<int>(i);
        return std::nullopt;
    }
    size_t node_count() const {
        size_t c = 0;
        for (const auto& [k, nodes] : levels) c += nodes.size();
        return c;
    }
};

struct PrototypeNode {
    LevelKind level = LevelKind::Segmentation;
    std::string feature_name;
    std::string feature_value;

    std::string label() const { return feature_name + ":" + feature_value; }
    std::string id() const {
        return std::string("proto_") + level_name(level) + "_" + feature_name + "_" + feature_value;
    }
    auto key() const { return std::tuple(rank_of(level), feature_name, feature_value); }
    bool operator<(const PrototypeNode& o) const { return key() < o.key(); }
    bool operator==(const PrototypeNode& o) const { return key() == o.key(); }
};

enum class EdgeRole { Hierarchy, Prototype, Chain };

inline const char* edge_role_name(EdgeRole r) {
    switch (r) {
        case EdgeRole::Hierarchy: return "hierarchy";
        case EdgeRole::Prototype: return "prototype";
        case EdgeRole::Chain: return "chain";
    }
    return "?";
}

// Augmented STG: the instance subgraph plus prototype nodes, prototype->
// instance edges and intra-level chains. Instance nodes within a level are
// stored in chain order.
struct AugmentedGraph {
    std::vector<std::pair<LevelKind, std::vector<InstanceNode>>> levels;
    std::vector<PrototypeNode> prototypes;  // sorted by (rank, name, value)
    std::set<std::pair<std::string, std::string>> hierarchy_edges;
    std::set<std::pair<std::string, std::string>> prototype_edges;  // proto id -> instance id
    std::set<std::pair<std::string, std::string>> chain_edges;

    size_t node_count() const {
        size_t c = prototypes.size();
        for (const auto& [k, nodes] : levels) c += nodes.size();
        return c;
    }
    size_t edge_count() const {
        return hierarchy_edges.size() + prototype_edges.size() + chain_edges.size();
    }
    const InstanceNode* find_instance(const std::string& id) const {
        for (const auto& [k, nodes] : levels)
            for (const auto& n : nodes)
                if (n.id == id) return &n;
        return nullptr;
    }
    const PrototypeNode* find_prototype(const std::string& id) const {
        for (const auto& p : prototypes)
            if (p.id() == id) return &p;
        return nullptr;
    }
};

}  // namespace stg
