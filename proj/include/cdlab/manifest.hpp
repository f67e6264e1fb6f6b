// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>

#include <json.hpp>

#include "cdlab/csv.hpp"
#include "cdlab/errors.hpp"

namespace cdlab::manifest {

using nlohmann::json;

struct RunManifest {
    std::string run_id;
    std::uint64_t config_digest = 0;
    std::string created; // ISO 8601 UTC
    std::string metrics_csv = "metrics.csv";
    std::string checkpoints_dir = "checkpoints";
    std::string status = "running"; // running | complete | diverged
};

inline std::string utc_now_iso8601() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string digest_hex(std::uint64_t digest) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

inline json to_json(const RunManifest& m) {
    return json{{"run_id", m.run_id},
                {"config_digest", digest_hex(m.config_digest)},
                {"created", m.created},
                {"metrics_csv", m.metrics_csv},
                {"checkpoints_dir", m.checkpoints_dir},
                {"status", m.status}};
}

inline RunManifest from_json(const json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        m.created = j.at("created").get<std::string>();
        m.metrics_csv = j.at("metrics_csv").get<std::string>();
        m.checkpoints_dir = j.at("checkpoints_dir").get<std::string>();
        m.status = j.at("status").get<std::string>();
        const std::string hex = j.at("config_digest").get<std::string>();
        m.config_digest = std::stoull(hex, nullptr, 16);
    } catch (const std::exception& e) {
        throw ConfigError("manifest", std::string("malformed manifest: ") + e.what());
    }
    return m;
}

inline void save_file(const std::string& path, const RunManifest& m) {
    csv::write_file(path, to_json(m).dump(2) + "\n");
}

inline RunManifest load_file(const std::string& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("manifest", std::string("parse error: ") + e.what());
    }
    return from_json(j);
}

} // namespace cdlab::manifest
