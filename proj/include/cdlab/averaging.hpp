// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cdlab::averaging {

/// Windowed stochastic weight averaging. Holds a single accumulator vector;
/// every `window_size` updates the finished mean is appended to
/// `completed_window_means` and the accumulator starts over.
struct SwaState {
    std::int64_t window_size = 500;
    std::int64_t count = 0; // samples accumulated in the current window
    std::vector<double> mean;
    std::vector<std::pair<std::int64_t, std::vector<double>>> completed_window_means;
    std::int64_t total_updates = 0;

    SwaState() = default;
    SwaState(std::int64_t window, std::size_t dim) : window_size(window), mean(dim, 0.0) {
        if (window < 1) throw std::domain_error("SwaState: window_size must be >= 1");
    }

    bool has_estimate() const {
        return count > 0 || !completed_window_means.empty();
    }

    /// Current running mean if the window has samples, else the latest
    /// completed window mean.
    const std::vector<double>& estimate() const {
        if (count > 0) return mean;
        if (!completed_window_means.empty()) return completed_window_means.back().second;
        throw std::logic_error("SwaState::estimate: no samples accumulated yet");
    }
};

/// Folds one parameter snapshot into the current window via the incremental
/// mean m' = m + (w - m)/(k+1). Completing a window appends (update_index,
/// mean) and resets the accumulator.
inline void swa_update(SwaState& state, std::span<const double> weights) {
    if (weights.size() != state.mean.size()) {
        throw std::invalid_argument("swa_update: dimension mismatch");
    }
    state.total_updates += 1;
    if (state.count == 0) {
        // Direct copy so a fresh window reproduces its first sample exactly.
        state.mean.assign(weights.begin(), weights.end());
        state.count = 1;
    } else {
        const double inv = 1.0 / static_cast<double>(state.count + 1);
        for (std::size_t i = 0; i < weights.size(); ++i) {
            state.mean[i] += (weights[i] - state.mean[i]) * inv;
        }
        state.count += 1;
    }
    if (state.count == state.window_size) {
        state.completed_window_means.emplace_back(state.total_updates, state.mean);
        state.count = 0;
    }
}

/// Unweighted mean of the last `j` window means (latest-weight averaging).
inline std::vector<double> lawa_average(
    const std::vector<std::vector<double>>& window_means, std::int64_t j) {
    if (j < 1 || j > static_cast<std::int64_t>(window_means.size())) {
        throw std::domain_error("lawa_average: j must lie in [1, window count]");
    }
    const std::size_t dim = window_means.back().size();
    std::vector<double> out(dim, 0.0);
    const std::size_t first = window_means.size() - static_cast<std::size_t>(j);
    for (std::size_t k = first; k < window_means.size(); ++k) {
        if (window_means[k].size() != dim) {
            throw std::invalid_argument("lawa_average: dimension mismatch across means");
        }
        for (std::size_t i = 0; i < dim; ++i) out[i] += window_means[k][i];
    }
    const double inv = 1.0 / static_cast<double>(j);
    for (double& v : out) v *= inv;
    return out;
}

struct EmaState {
    double decay = 0.002; // gamma; defaults to 1/h for the default SWA window
    std::vector<double> value;

    EmaState() = default;
    EmaState(double gamma, std::vector<double> init) : decay(gamma), value(std::move(init)) {
        if (!(gamma >= 0.0 && gamma <= 1.0)) {
            throw std::domain_error("EmaState: decay must lie in [0,1]");
        }
    }
};

inline void ema_update(EmaState& state, std::span<const double> weights) {
    if (weights.size() != state.value.size()) {
        throw std::invalid_argument("ema_update: dimension mismatch");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        state.value[i] = (1.0 - state.decay) * state.value[i] + state.decay * weights[i];
    }
}

/// Straight-line blend (1-t) w0 + t w1 in weight space.
inline std::vector<double> interpolate(std::span<const double> w0, std::span<const double> w1,
                                       double t) {
    if (w0.size() != w1.size()) throw std::invalid_argument("interpolate: dimension mismatch");
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("interpolate: t must lie in [0,1]");
    std::vector<double> out(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) {
        out[i] = (1.0 - t) * w0[i] + t * w1[i];
    }
    return out;
}

} // namespace cdlab::averaging
