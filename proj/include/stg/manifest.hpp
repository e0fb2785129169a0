#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stg/util.hpp"

namespace stg {

inline constexpr const char* kToolVersion = "0.1.0";

// Everything needed to reproduce one CLI run: the command, its effective
// configuration, the master seed, and content digests of every input read.
// Seeded commands re-run from a manifest's settings reproduce their outputs
// bit-exactly.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::map<std::string, std::string> config;
    uint64_t seed = 0;
    int workers = 1;
    std::map<std::string, std::string> input_digests;  // path -> fnv1a hex
    std::vector<std::string> outputs;
    std::string version = kToolVersion;
    std::string started_at;
    double wall_seconds = 0;

    void add_input(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        input_digests[path] = hex64(fnv1a(buf.str()));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = version;
        j["command"] = command;
        j["argv"] = argv;
        j["config"] = config;
        j["seed"] = seed;
        j["workers"] = workers;
        j["input_digests"] = input_digests;
        j["outputs"] = outputs;
        j["started_at"] = started_at;
        j["wall_seconds"] = wall_seconds;
        return j;
    }
};

inline std::string iso_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace stg
