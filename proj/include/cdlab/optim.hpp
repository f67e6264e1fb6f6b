// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cdlab::optim {

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::optional<double> clip_max = 1.0;
};

inline void check_optimizer_config(const OptimizerConfig& cfg) {
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw std::domain_error("optimizer: betas must lie in [0,1)");
    }
    if (!(cfg.eps > 0.0)) throw std::domain_error("optimizer: eps must be > 0");
    if (cfg.weight_decay < 0.0) throw std::domain_error("optimizer: weight_decay must be >= 0");
    if (cfg.clip_max && !(*cfg.clip_max > 0.0)) {
        throw std::domain_error("optimizer: clip_max must be > 0");
    }
}

/// AdamW moment buffers. One state drives one parameter vector.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step_count = 0;

    explicit OptimizerState(std::size_t dim = 0) : m(dim, 0.0), v(dim, 0.0) {}
};

inline double l2_norm(std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) s += xi * xi;
    return std::sqrt(s);
}

/// Scales the gradient to global L2 norm `clip_max` if it exceeds it.
inline std::vector<double> clip_global_norm(std::span<const double> grads, double clip_max) {
    if (!(clip_max > 0.0)) throw std::domain_error("clip_global_norm: clip_max must be > 0");
    std::vector<double> out(grads.begin(), grads.end());
    const double norm = l2_norm(grads);
    if (norm > clip_max) {
        const double scale = clip_max / norm;
        for (double& g : out) g *= scale;
    }
    return out;
}

/// In-place variant used by the training loop.
inline void clip_global_norm_inplace(std::span<double> grads, double clip_max) {
    if (!(clip_max > 0.0)) throw std::domain_error("clip_global_norm: clip_max must be > 0");
    const double norm = l2_norm(grads);
    if (norm > clip_max) {
        const double scale = clip_max / norm;
        for (double& g : grads) g *= scale;
    }
}

/// One AdamW update with bias correction and decoupled weight decay:
///   t' = t+1
///   m' = b1 m + (1-b1) g,  v' = b2 v + (1-b2) g^2
///   w' = w - lr * ( (m'/(1-b1^t')) / (sqrt(v'/(1-b2^t')) + eps) + wd * w )
/// Gradient clipping is the caller's concern and happens before this call.
inline void adamw_step(OptimizerState& state, std::span<double> params,
                       std::span<const double> grads, double lr, const OptimizerConfig& cfg) {
    const std::size_t n = params.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
        throw std::invalid_argument("adamw_step: dimension mismatch");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * params[i]);
    }
}

/// Schedule-free state: base iterate z, Polyak-style running average x, and
/// the AdamW moment buffers that precondition the z-update. `interp` selects
/// the gradient evaluation point between z (0) and x (1).
struct SfoState {
    std::vector<double> z;
    std::vector<double> x;
    OptimizerState inner;
    std::int64_t step_count = 0;
    double interp = 0.3;

    SfoState() = default;
    SfoState(std::vector<double> init, double interp_weight)
        : z(init), x(std::move(init)), inner(z.size()), interp(interp_weight) {}
};

using GradientOracle = std::function<void(std::span<const double> point, std::span<double> grad)>;

/// One schedule-free step: evaluate the gradient at y = (1-interp) z + interp x,
/// advance z by an AdamW-preconditioned step at the given (constant) rate, then
/// fold z into the running average with weight c = 1/(t+1).
inline void sfo_step(SfoState& state, const GradientOracle& loss_grad_at, double lr,
                     const OptimizerConfig& cfg) {
    const std::size_t n = state.z.size();
    if (state.x.size() != n) throw std::invalid_argument("sfo_step: dimension mismatch");
    if (!(state.interp >= 0.0 && state.interp <= 1.0)) {
        throw std::domain_error("sfo_step: interp must lie in [0,1]");
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (1.0 - state.interp) * state.z[i] + state.interp * state.x[i];
    }
    std::vector<double> grad(n, 0.0);
    loss_grad_at(y, grad);
    if (cfg.clip_max) clip_global_norm_inplace(grad, *cfg.clip_max);
    adamw_step(state.inner, state.z, grad, lr, cfg);
    const double c = 1.0 / static_cast<double>(state.step_count + 1);
    for (std::size_t i = 0; i < n; ++i) {
        state.x[i] = (1.0 - c) * state.x[i] + c * state.z[i];
    }
    state.step_count += 1;
}

} // namespace cdlab::optim
