#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stg/model.hpp"
#include "stg/util.hpp"
#include "stg/validate.hpp"

namespace stg {

// Upstream analyzers emit slightly inconsistent boundaries; a child interval
// may exceed its covering parent's by this much before ingest errors out.
inline constexpr double kBoundaryTolerance = 0.010;  // seconds

namespace detail {

struct Span {
    double start = 0, end = 0;
    FeatureSet features;
};

inline std::vector<Span> parse_level(const nlohmann::json& arr, LevelKind kind) {
    std::vector<Span> spans;
    for (const auto& item : arr) {
        Span s;
        s.start = item.at("start").get<double>();
        s.end = item.at("end").get<double>();
        if (!(s.end > s.start))
            throw InputError(std::string("malformed span in level ") + level_name(kind) +
                             ": end <= start");
        switch (kind) {
            case LevelKind::Segmentation:
                s.features["section_num"] = std::to_string(item.at("label").get<int>());
                break;
            case LevelKind::Motif:
                if (item.at("pattern").is_string()) {
                    if (item.at("pattern").get<std::string>() != "filler")
                        throw InputError("motif pattern must be an integer or \"filler\"");
                    s.features["filler"] = "filler";
                } else {
                    s.features["pattern_num"] = std::to_string(item.at("pattern").get<int>());
                }
                break;
            case LevelKind::Key:
                s.features["relative_key_num"] =
                    std::to_string(item.at("relative_key_num").get<int>());
                s.features["quality"] = item.at("quality").get<std::string>();
                break;
            case LevelKind::Chord:
                s.features["quality"] = item.at("quality").get<std::string>();
                s.features["degree1"] = std::to_string(item.at("degree1").get<int>());
                s.features["degree2"] = std::to_string(item.at("degree2").get<int>());
                break;
            case LevelKind::Melody:
                s.features["abs_interval"] = std::to_string(item.at("abs_interval").get<int>());
                s.features["interval_sign"] = item.at("interval_sign").get<std::string>();
                break;
        }
        for (const auto& [n, v] : s.features)
            if (!feature_value_legal(kind, n, v))
                throw InputError("illegal feature value " + n + ":" + v + " at level " +
                                 level_name(kind));
        spans.push_back(std::move(s));
    }
    // Stable sort: start time, then end time; input order breaks exact ties.
    std::stable_sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    if (!level_may_overlap(kind)) {
        for (size_t i = 1; i < spans.size(); ++i)
            if (spans[i].start < spans[i - 1].end - kBoundaryTolerance)
                throw InputError(std::string("overlapping spans in non-overlap level ") +
                                 level_name(kind));
    }
    return spans;
}

// Index (within `parents`) of the parent whose interval contains time t.
// Half-open on the right so a point on a boundary belongs to the next span;
// the final span is closed so the piece end stays covered.
inline int parent_containing(const std::vector<InstanceNode>& parents, double t) {
    const double eps = kBoundaryTolerance;
    for (size_t i = 0; i < parents.size(); ++i) {
        bool last = i + 1 == parents.size();
        if (t >= parents[i].start - eps &&
            (t < parents[i].end - eps || (last && t <= parents[i].end + eps)))
            return static_cast<int>(i);
    }
    return -1;
}

}  // namespace detail

// Build an STG from an analysis-record JSON document. Requested levels must be
// present; edges realize temporal containment between consecutive requested
// levels (one parent if the child interval nests in it, two if it straddles).
inline StructuralTemporalGraph ingest(const nlohmann::json& record,
                                      const std::set<LevelKind>& levels_to_include) {
    if (!record.contains("levels")) throw InputError("record has no \"levels\" object");
    const auto& levels = record.at("levels");

    StructuralTemporalGraph g;
    for (int i = 0; i < kLevelKindCount; ++i) {
        auto kind = static_cast<LevelKind>(i);
        if (!levels_to_include.count(kind)) continue;
        if (!levels.contains(level_name(kind)))
            throw InputError(std::string("requested level missing from record: ") +
                             level_name(kind));
        auto spans = detail::parse_level(levels.at(level_name(kind)), kind);
        std::vector<InstanceNode> nodes;
        for (size_t ci = 0; ci < spans.size(); ++ci) {
            InstanceNode n;
            n.id = std::string(level_name(kind)) + "_" + std::to_string(ci);
            n.level = kind;
            n.chain_index = static_cast<int>(ci);
            n.start = spans[ci].start;
            n.end = spans[ci].end;
            n.features = std::move(spans[ci].features);
            nodes.push_back(std::move(n));
        }
        g.levels.emplace_back(kind, std::move(nodes));
    }
    if (g.levels.empty()) throw InputError("no levels requested");

    for (size_t li = 1; li < g.levels.size(); ++li) {
        const auto& parents = g.levels[li - 1].second;
        for (const auto& child : g.levels[li].second) {
            int ps = detail::parent_containing(parents, child.start);
            int pe = detail::parent_containing(parents, child.end);
            if (ps < 0 || pe < 0)
                throw InputError("child " + child.id +
                                 " is not covered by any parent interval at level " +
                                 level_name(g.levels[li - 1].first));
            g.edges.insert({parents[ps].id, child.id});
            if (pe != ps) g.edges.insert({parents[pe].id, child.id});
        }
    }
    return g;
}

// Keep only the top `keep_top_n` levels and the edges internal to them.
inline StructuralTemporalGraph levels_ablate(const StructuralTemporalGraph& g, int keep_top_n) {
    if (keep_top_n < 1 || keep_top_n > static_cast<int>(g.levels.size()))
        throw InputError("keep_top_n out of range: " + std::to_string(keep_top_n));
    StructuralTemporalGraph out;
    std::set<std::string> kept;
    for (int i = 0; i < keep_top_n; ++i) {
        out.levels.push_back(g.levels[i]);
        for (const auto& n : g.levels[i].second) kept.insert(n.id);
    }
    for (const auto& e : g.edges)
        if (kept.count(e.first) && kept.count(e.second)) out.edges.insert(e);
    return out;
}

}  // namespace stg
