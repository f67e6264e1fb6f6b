// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdlab/config.hpp"
#include "cdlab/errors.hpp"
#include "cdlab/trainer.hpp"

namespace cdlab::checkpoint_io {

using nlohmann::json;

// File layout: "CDLB1" magic, one version byte, little-endian u64 parameter
// count, the parameters as raw 64-bit floats, then a little-endian u64 byte
// length followed by a JSON metadata document (step, schedule and the rest
// of the run config, optimizer state arrays, rng cursor, kind).
inline constexpr char kMagic[5] = {'C', 'D', 'L', 'B', '1'};
inline constexpr std::uint8_t kVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
    put_u64(out, std::bit_cast<std::uint64_t>(d));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw CheckpointError(std::string("checkpoint truncated reading ") + what);
        }
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

inline json meta_json(const trainer::Checkpoint& ck) {
    json meta;
    meta["step"] = ck.step;
    meta["kind"] = ck.kind;
    meta["rng_cursor"] = ck.rng_cursor;
    meta["config"] = config::dump_config(ck.config);
    meta["optimizer_state"] = json{{"m", ck.opt_state.m},
                                   {"v", ck.opt_state.v},
                                   {"step_count", ck.opt_state.step_count}};
    if (ck.swa) {
        meta["swa"] = json{{"window", ck.swa->window},
                           {"stride", ck.swa->stride},
                           {"count", ck.swa->count},
                           {"total_updates", ck.swa->total_updates},
                           {"mean", ck.swa->mean}};
    }
    return meta;
}

} // namespace detail

inline std::string serialize(const trainer::Checkpoint& ck) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    out.push_back(static_cast<char>(kVersion));
    detail::put_u64(out, ck.params.size());
    for (double p : ck.params) detail::put_f64(out, p);
    const std::string meta = detail::meta_json(ck).dump();
    detail::put_u64(out, meta.size());
    out.append(meta);
    return out;
}

inline trainer::Checkpoint deserialize(const std::string& buf) {
    if (buf.size() < sizeof(kMagic) + 1) throw CheckpointError("checkpoint too short");
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("bad checkpoint magic");
    }
    const auto version = static_cast<std::uint8_t>(buf[sizeof(kMagic)]);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    detail::Reader r{buf, sizeof(kMagic) + 1};
    const std::uint64_t n = r.u64("parameter count");
    if (n > (buf.size() - r.pos) / 8) throw CheckpointError("checkpoint truncated in payload");
    trainer::Checkpoint ck;
    ck.params.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) ck.params[i] = r.f64("parameters");
    const std::uint64_t meta_len = r.u64("metadata length");
    r.need(meta_len, "metadata");
    if (r.pos + meta_len != buf.size()) {
        throw CheckpointError("checkpoint has trailing garbage");
    }
    json meta;
    try {
        meta = json::parse(buf.substr(r.pos, meta_len));
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    try {
        ck.step = meta.at("step").get<std::int64_t>();
        ck.kind = meta.at("kind").get<std::string>();
        ck.rng_cursor = meta.at("rng_cursor").get<std::uint64_t>();
        ck.config = config::load_config(meta.at("config"));
        const json& opt = meta.at("optimizer_state");
        ck.opt_state.m = opt.at("m").get<std::vector<double>>();
        ck.opt_state.v = opt.at("v").get<std::vector<double>>();
        ck.opt_state.step_count = opt.at("step_count").get<std::int64_t>();
        if (meta.contains("swa")) {
            trainer::SwaSnapshot snap;
            const json& s = meta.at("swa");
            snap.window = s.at("window").get<std::int64_t>();
            snap.stride = s.at("stride").get<std::int64_t>();
            snap.count = s.at("count").get<std::int64_t>();
            snap.total_updates = s.at("total_updates").get<std::int64_t>();
            snap.mean = s.at("mean").get<std::vector<double>>();
            ck.swa = std::move(snap);
        }
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint metadata incomplete: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    if (ck.opt_state.m.size() != ck.params.size() || ck.opt_state.v.size() != ck.params.size()) {
        throw CheckpointError("checkpoint optimizer state does not match parameter count");
    }
    return ck;
}

inline void save_file(const std::string& path, const trainer::Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path);
    const std::string bytes = serialize(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write for checkpoint " + path);
}

inline trainer::Checkpoint load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(buf);
}

} // namespace cdlab::checkpoint_io
