#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "stg/model.hpp"
#include "stg/util.hpp"

namespace stg {

using nlohmann::json;

namespace detail {

inline json node_to_json(const InstanceNode& n) {
    json j;
    j["id"] = n.id;
    j["chain_index"] = n.chain_index;
    if (n.has_interval) {
        j["start"] = n.start;
        j["end"] = n.end;
    }
    j["features"] = json::object();
    for (const auto& [k, v] : n.features) j["features"][k] = v;
    return j;
}

inline InstanceNode node_from_json(const json& j, LevelKind kind) {
    InstanceNode n;
    n.id = j.at("id").get<std::string>();
    n.level = kind;
    n.chain_index = j.at("chain_index").get<int>();
    n.has_interval = j.contains("start");
    if (n.has_interval) {
        n.start = j.at("start").get<double>();
        n.end = j.at("end").get<double>();
    }
    for (const auto& [k, v] : j.at("features").items()) n.features[k] = v.get<std::string>();
    return n;
}

}  // namespace detail

inline json stg_to_json(const StructuralTemporalGraph& g) {
    json j;
    j["version"] = 1;
    j["type"] = "stg";
    j["levels"] = json::array();
    for (const auto& [kind, nodes] : g.levels) {
        json lj;
        lj["kind"] = level_name(kind);
        lj["nodes"] = json::array();
        for (const auto& n : nodes) lj["nodes"].push_back(detail::node_to_json(n));
        j["levels"].push_back(std::move(lj));
    }
    j["edges"] = json::array();
    for (const auto& [from, to] : g.edges)
        j["edges"].push_back({{"from", from}, {"to", to}, {"role", "hierarchy"}});
    return j;
}

inline StructuralTemporalGraph stg_from_json(const json& j) {
    if (j.value("type", "") != "stg") throw InputError("expected a compressed STG dump");
    StructuralTemporalGraph g;
    for (const auto& lj : j.at("levels")) {
        auto kind = level_from_name(lj.at("kind").get<std::string>());
        if (!kind) throw InputError("unknown level kind in graph dump");
        std::vector<InstanceNode> nodes;
        for (const auto& nj : lj.at("nodes")) nodes.push_back(detail::node_from_json(nj, *kind));
        g.levels.emplace_back(*kind, std::move(nodes));
    }
    for (const auto& ej : j.at("edges"))
        g.edges.insert({ej.at("from").get<std::string>(), ej.at("to").get<std::string>()});
    return g;
}

inline json augmented_to_json(const AugmentedGraph& g) {
    json j;
    j["version"] = 1;
    j["type"] = "augmented";
    j["levels"] = json::array();
    for (const auto& [kind, nodes] : g.levels) {
        json lj;
        lj["kind"] = level_name(kind);
        lj["nodes"] = json::array();
        for (const auto& n : nodes) lj["nodes"].push_back(detail::node_to_json(n));
        j["levels"].push_back(std::move(lj));
    }
    j["prototypes"] = json::array();
    for (const auto& p : g.prototypes)
        j["prototypes"].push_back({{"id", p.id()},
                                   {"level", level_name(p.level)},
                                   {"feature_name", p.feature_name},
                                   {"feature_value", p.feature_value}});
    j["edges"] = json::array();
    auto emit = [&](const std::set<std::pair<std::string, std::string>>& edges, EdgeRole role) {
        for (const auto& [from, to] : edges)
            j["edges"].push_back({{"from", from}, {"to", to}, {"role", edge_role_name(role)}});
    };
    emit(g.hierarchy_edges, EdgeRole::Hierarchy);
    emit(g.prototype_edges, EdgeRole::Prototype);
    emit(g.chain_edges, EdgeRole::Chain);
    return j;
}

inline AugmentedGraph augmented_from_json(const json& j) {
    if (j.value("type", "") != "augmented") throw InputError("expected an augmented graph dump");
    AugmentedGraph g;
    for (const auto& lj : j.at("levels")) {
        auto kind = level_from_name(lj.at("kind").get<std::string>());
        if (!kind) throw InputError("unknown level kind in graph dump");
        std::vector<InstanceNode> nodes;
        for (const auto& nj : lj.at("nodes")) nodes.push_back(detail::node_from_json(nj, *kind));
        g.levels.emplace_back(*kind, std::move(nodes));
    }
    for (const auto& pj : j.at("prototypes")) {
        PrototypeNode p;
        auto kind = level_from_name(pj.at("level").get<std::string>());
        if (!kind) throw InputError("unknown prototype level in graph dump");
        p.level = *kind;
        p.feature_name = pj.at("feature_name").get<std::string>();
        p.feature_value = pj.at("feature_value").get<std::string>();
        g.prototypes.push_back(std::move(p));
    }
    std::sort(g.prototypes.begin(), g.prototypes.end());
    for (const auto& ej : j.at("edges")) {
        auto from = ej.at("from").get<std::string>();
        auto to = ej.at("to").get<std::string>();
        auto role = ej.at("role").get<std::string>();
        if (role == "hierarchy")
            g.hierarchy_edges.insert({from, to});
        else if (role == "prototype")
            g.prototype_edges.insert({from, to});
        else if (role == "chain")
            g.chain_edges.insert({from, to});
        else
            throw InputError("unknown edge role: " + role);
    }
    return g;
}

// Load either graph form; augmented dumps are compressed on demand by callers.
inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError("cannot parse " + path + ": " + e.what());
    }
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
}

inline void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// Courtesy DOT export; layout is up to the viewer.
inline std::string augmented_to_dot(const AugmentedGraph& g, const std::string& name = "stg") {
    std::string dot = "digraph " + name + " {\n  rankdir=TB;\n";
    for (const auto& [kind, nodes] : g.levels)
        for (const auto& n : nodes) {
            std::string label(level_name(kind));
            label = label.substr(0, 1);
            dot += "  \"" + n.id + "\" [label=\"" + label + "\"];\n";
        }
    for (const auto& p : g.prototypes)
        dot += "  \"" + p.id() + "\" [label=\"" + p.label() + "\", shape=box, color=gold];\n";
    for (const auto& [f, t] : g.hierarchy_edges) dot += "  \"" + f + "\" -> \"" + t + "\";\n";
    for (const auto& [f, t] : g.prototype_edges)
        dot += "  \"" + f + "\" -> \"" + t + "\" [color=red];\n";
    for (const auto& [f, t] : g.chain_edges)
        dot += "  \"" + f + "\" -> \"" + t + "\" [color=green];\n";
    dot += "}\n";
    return dot;
}

}  // namespace stg
