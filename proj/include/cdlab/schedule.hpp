// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cdlab::schedule {

enum class ShapeKind {
    Linear,
    OneMinusSqrt,
    Cosine,
    MirrorCosine,
    OneMinusSquare,
    Power,
};

/// Cooldown decay shape: maps progress x in [0,1] to a multiplier that is 1
/// at x=0, 0 at x=1 and non-increasing in between.
struct CooldownShape {
    ShapeKind kind = ShapeKind::OneMinusSqrt;
    double power = 0.5; // exponent a for Power; must lie in (0, 1]

    static CooldownShape linear() { return {ShapeKind::Linear, 0.0}; }
    static CooldownShape one_minus_sqrt() { return {ShapeKind::OneMinusSqrt, 0.0}; }
    static CooldownShape cosine() { return {ShapeKind::Cosine, 0.0}; }
    static CooldownShape mirror_cosine() { return {ShapeKind::MirrorCosine, 0.0}; }
    static CooldownShape one_minus_square() { return {ShapeKind::OneMinusSquare, 0.0}; }
    static CooldownShape with_power(double a) { return {ShapeKind::Power, a}; }

    friend bool operator==(const CooldownShape& a, const CooldownShape& b) {
        if (a.kind != b.kind) return false;
        return a.kind != ShapeKind::Power || a.power == b.power;
    }
};

/// Decay multiplier at progress x in [0,1].
inline double shape_multiplier(const CooldownShape& shape, double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("shape_multiplier: progress must lie in [0,1], got " +
                                std::to_string(x));
    }
    switch (shape.kind) {
    case ShapeKind::Linear:
        return 1.0 - x;
    case ShapeKind::OneMinusSqrt:
        return 1.0 - std::sqrt(x);
    case ShapeKind::Cosine:
        return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
    case ShapeKind::MirrorCosine:
        // Reflection of the cosine shape about the linear decay.
        return 2.0 * (1.0 - x) - 0.5 * (1.0 + std::cos(std::numbers::pi * x));
    case ShapeKind::OneMinusSquare:
        return 1.0 - x * x;
    case ShapeKind::Power:
        if (shape.power == 0.5) return 1.0 - std::sqrt(x); // keep Power(1/2) bit-equal to 1-sqrt
        return 1.0 - std::pow(x, shape.power);
    }
    throw std::logic_error("shape_multiplier: unknown shape kind");
}

enum class ScheduleKind {
    Cosine,
    ConstantCooldown,
    Constant,
};

/// Full description of a learning-rate schedule. `decay_steps` and `shape`
/// apply to ConstantCooldown only; `final_lr_fraction` to Cosine only.
struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::ConstantCooldown;
    double peak_lr = 1e-3;
    std::int64_t total_steps = 5000;
    std::int64_t warmup_steps = 300;
    std::int64_t decay_steps = 1000;
    double final_lr_fraction = 0.1;
    CooldownShape shape = CooldownShape::one_minus_sqrt();

    static ScheduleSpec cosine(double peak, std::int64_t total, std::int64_t warmup,
                               double final_fraction = 0.1) {
        ScheduleSpec s;
        s.kind = ScheduleKind::Cosine;
        s.peak_lr = peak;
        s.total_steps = total;
        s.warmup_steps = warmup;
        s.decay_steps = 0;
        s.final_lr_fraction = final_fraction;
        return s;
    }

    static ScheduleSpec constant(double peak, std::int64_t total, std::int64_t warmup) {
        ScheduleSpec s;
        s.kind = ScheduleKind::Constant;
        s.peak_lr = peak;
        s.total_steps = total;
        s.warmup_steps = warmup;
        s.decay_steps = 0;
        return s;
    }

    static ScheduleSpec constant_cooldown(double peak, std::int64_t total, std::int64_t warmup,
                                          std::int64_t decay,
                                          CooldownShape shape = CooldownShape::one_minus_sqrt()) {
        ScheduleSpec s;
        s.kind = ScheduleKind::ConstantCooldown;
        s.peak_lr = peak;
        s.total_steps = total;
        s.warmup_steps = warmup;
        s.decay_steps = decay;
        s.shape = shape;
        return s;
    }
};

/// One violated invariant; `code` is stable and machine-readable.
struct Violation {
    std::string code;
    std::string message;
};

/// Collects every violated ScheduleSpec invariant. Never throws.
inline std::vector<Violation> validate(const ScheduleSpec& spec) {
    std::vector<Violation> out;
    if (!(spec.peak_lr > 0.0)) {
        out.push_back({"non_positive_peak", "peak_lr must be > 0"});
    }
    if (spec.total_steps < 1) {
        out.push_back({"non_positive_total", "total_steps must be >= 1"});
    }
    if (spec.warmup_steps < 0) {
        out.push_back({"negative_warmup", "warmup_steps must be >= 0"});
    }
    if (spec.warmup_steps >= spec.total_steps && spec.total_steps >= 1) {
        out.push_back({"warmup_exceeds_total", "warmup_steps must be < total_steps"});
    }
    if (spec.kind == ScheduleKind::ConstantCooldown) {
        if (spec.decay_steps < 0) {
            out.push_back({"negative_decay", "decay_steps must be >= 0"});
        } else if (spec.decay_steps > spec.total_steps - spec.warmup_steps) {
            out.push_back({"decay_exceeds_budget",
                           "decay_steps must be <= total_steps - warmup_steps"});
        }
        if (spec.shape.kind == ShapeKind::Power &&
            !(spec.shape.power > 0.0 && spec.shape.power <= 1.0)) {
            out.push_back({"power_out_of_range", "shape power must lie in (0,1]"});
        }
    }
    if (spec.kind == ScheduleKind::Cosine &&
        !(spec.final_lr_fraction >= 0.0 && spec.final_lr_fraction < 1.0)) {
        out.push_back({"final_fraction_out_of_range", "final_lr_fraction must lie in [0,1)"});
    }
    return out;
}

/// Learning rate for update `step` (0-based; the rate applied for update n).
/// `step` may equal total_steps, giving the schedule's terminal value.
inline double lr_at(const ScheduleSpec& spec, std::int64_t step) {
    if (step < 0 || step > spec.total_steps) {
        throw std::domain_error("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(spec.total_steps) + "]");
    }
    if (step < spec.warmup_steps) {
        return spec.peak_lr * static_cast<double>(step) / static_cast<double>(spec.warmup_steps);
    }
    // Phase boundaries evaluate to the peak exactly.
    if (step == spec.warmup_steps) {
        return spec.peak_lr;
    }
    switch (spec.kind) {
    case ScheduleKind::Constant:
        return spec.peak_lr;
    case ScheduleKind::Cosine: {
        const double t = static_cast<double>(step - spec.warmup_steps) /
                         static_cast<double>(spec.total_steps - spec.warmup_steps);
        const double lr_min = spec.final_lr_fraction * spec.peak_lr;
        return lr_min + 0.5 * (spec.peak_lr - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
    }
    case ScheduleKind::ConstantCooldown: {
        const std::int64_t decay_start = spec.total_steps - spec.decay_steps;
        if (step <= decay_start) {
            return spec.peak_lr;
        }
        const double x = static_cast<double>(step - decay_start) /
                         static_cast<double>(spec.decay_steps);
        return shape_multiplier(spec.shape, x) * spec.peak_lr;
    }
    }
    throw std::logic_error("lr_at: unknown schedule kind");
}

/// (step, lr) pairs at steps 0, stride, 2*stride, ..., with total_steps
/// always included as the last row.
inline std::vector<std::pair<std::int64_t, double>> schedule_table(const ScheduleSpec& spec,
                                                                   std::int64_t stride) {
    if (stride < 1) {
        throw std::domain_error("schedule_table: stride must be >= 1");
    }
    std::vector<std::pair<std::int64_t, double>> rows;
    for (std::int64_t step = 0; step < spec.total_steps; step += stride) {
        rows.emplace_back(step, lr_at(spec, step));
    }
    rows.emplace_back(spec.total_steps, lr_at(spec, spec.total_steps));
    return rows;
}

} // namespace cdlab::schedule
