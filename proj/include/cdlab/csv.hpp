// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cdlab/lawfit.hpp"
#include "cdlab/trainer.hpp"

namespace cdlab::csv {

/// Shortest round-trip decimal form, locale-independent ('.' separator).
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Plain decimal notation (no exponent) carrying at least `sig` significant
/// digits. Used where table consumers expect fixed-point columns.
inline std::string format_decimal(double v, int sig = 12) {
    if (v == 0.0) return "0";
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    const int exponent = static_cast<int>(std::floor(std::log10(std::abs(v))));
    int decimals = sig - 1 - exponent;
    if (decimals < 0) decimals = 0;
    if (decimals > 340) decimals = 340; // past double's subnormal range
    char buf[400];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    if (res.ec != std::errc()) throw std::logic_error("format_decimal: buffer too small");
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
    double out = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        throw std::runtime_error(what + ": cannot parse number '" + std::string(text) + "'");
    }
    return out;
}

inline std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline void write_schedule_csv(std::ostream& os,
                               const std::vector<std::pair<std::int64_t, double>>& table) {
    os << "step,lr\n";
    for (const auto& [step, lr] : table) {
        os << step << ',' << format_decimal(lr) << '\n';
    }
}

inline void write_metrics_csv(std::ostream& os, const trainer::RunRecord& record) {
    os << "step,samples,lr,train_loss,eval_loss,swa_eval_loss\n";
    for (const trainer::RunRow& row : record.rows) {
        os << row.step << ',' << row.samples << ',' << format_double(row.lr) << ','
           << format_double(row.train_loss) << ',' << format_double(row.eval_loss) << ',';
        if (row.swa_eval_loss) os << format_double(*row.swa_eval_loss);
        os << '\n';
    }
}

inline void write_interp_csv(std::ostream& os,
                             const std::vector<std::pair<double, double>>& probe) {
    os << "t,eval_loss\n";
    for (const auto& [t, loss] : probe) {
        os << format_double(t) << ',' << format_double(loss) << '\n';
    }
}

/// Reads scaling-law observations from a `n_params,tokens,loss` CSV.
inline std::vector<lawfit::DataPoint> read_datapoints_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("datapoints: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "n_params,tokens,loss") {
        throw std::runtime_error("datapoints: expected header 'n_params,tokens,loss', got '" +
                                 line + "'");
    }
    std::vector<lawfit::DataPoint> points;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != 3) {
            throw std::runtime_error("datapoints: line " + std::to_string(line_no) +
                                     " needs 3 fields");
        }
        lawfit::DataPoint p;
        p.n_params = parse_double(fields[0], "n_params");
        p.tokens = parse_double(fields[1], "tokens");
        p.loss = parse_double(fields[2], "loss");
        points.push_back(p);
    }
    return points;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

} // namespace cdlab::csv
