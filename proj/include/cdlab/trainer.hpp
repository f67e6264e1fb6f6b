// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdlab/averaging.hpp"
#include "cdlab/errors.hpp"
#include "cdlab/optim.hpp"
#include "cdlab/rng.hpp"
#include "cdlab/schedule.hpp"
#include "cdlab/tasks.hpp"

namespace cdlab::trainer {

enum class OptimizerKind {
    AdamW,
    Sgd, // optimizer bypass: w -= lr * g
};

struct SwaOptions {
    std::int64_t window = 500;
    std::int64_t stride = 1; // parameter snapshots every `stride` optimizer steps

    friend bool operator==(const SwaOptions&, const SwaOptions&) = default;
};

struct TrainerConfig {
    tasks::TaskSpec task;
    schedule::ScheduleSpec schedule;
    optim::OptimizerConfig optimizer;
    OptimizerKind optimizer_kind = OptimizerKind::AdamW;
    std::int64_t batch_size = 1;
    std::int64_t eval_every = 50;
    std::int64_t checkpoint_every = 1000;
    std::optional<SwaOptions> swa;
};

struct RunRow {
    std::int64_t step = 0;    // optimizer updates completed
    std::int64_t samples = 0; // cumulative minibatch samples consumed
    double lr = 0.0;          // lr_at(schedule, step)
    double train_loss = 0.0;
    double eval_loss = 0.0;
    std::optional<double> swa_eval_loss;
};

struct RunSummary {
    std::int64_t total_steps = 0;
    double final_train_loss = 0.0;
    double final_eval_loss = 0.0;
    std::optional<double> final_swa_eval_loss;
    double wall_seconds = 0.0;
};

struct RunRecord {
    std::vector<RunRow> rows;
    RunSummary summary;
};

/// Portable SWA accumulator snapshot carried inside checkpoints.
struct SwaSnapshot {
    std::int64_t window = 500;
    std::int64_t stride = 1;
    std::int64_t count = 0;
    std::int64_t total_updates = 0;
    std::vector<double> mean;
};

struct Checkpoint {
    std::int64_t step = 0;
    std::vector<double> params;
    TrainerConfig config; // includes the task spec (and its seed)
    optim::OptimizerState opt_state;
    std::uint64_t rng_cursor = 0;
    std::string kind = "raw"; // "raw" or "swa_window"
    std::optional<SwaSnapshot> swa;
};

struct TrainResult {
    RunRecord record;
    std::vector<Checkpoint> checkpoints;
};

namespace detail {

inline void validate_config(const TrainerConfig& cfg) {
    auto violations = schedule::validate(cfg.schedule);
    // A zero peak rate is accepted here: it produces the degenerate frozen
    // run some diagnostics rely on, while validate() still reports it.
    std::erase_if(violations, [&](const schedule::Violation& v) {
        return v.code == "non_positive_peak" && cfg.schedule.peak_lr == 0.0;
    });
    if (!violations.empty()) {
        throw std::domain_error("train: invalid schedule: " + violations.front().message);
    }
    optim::check_optimizer_config(cfg.optimizer);
    if (cfg.batch_size < 1) throw std::domain_error("train: batch_size must be >= 1");
    if (cfg.eval_every < 1 || cfg.eval_every > cfg.schedule.total_steps) {
        throw std::domain_error("train: eval_every must lie in [1, total_steps]");
    }
    if (cfg.checkpoint_every < 1) {
        throw std::domain_error("train: checkpoint_every must be >= 1");
    }
    if (cfg.swa && (cfg.swa->window < 1 || cfg.swa->stride < 1)) {
        throw std::domain_error("train: swa window and stride must be >= 1");
    }
}

struct LoopState {
    std::vector<double> w;
    optim::OptimizerState opt;
    CounterRng rng;
    std::optional<averaging::SwaState> swa;
};

/// Runs updates [start_step, end_step) of `spec`, recording rows at
/// multiples of eval_every plus the final step, and checkpoints at multiples
/// of checkpoint_every, at phase boundaries, and at the final step.
inline TrainResult run_loop(const tasks::Task& task, const TrainerConfig& cfg,
                            const schedule::ScheduleSpec& spec, LoopState st,
                            std::int64_t start_step) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t n_total = spec.total_steps;
    const std::int64_t dim = task.dim();

    std::set<std::int64_t> checkpoint_steps;
    for (std::int64_t k = cfg.checkpoint_every; k <= n_total; k += cfg.checkpoint_every) {
        if (k > start_step) checkpoint_steps.insert(k);
    }
    if (spec.warmup_steps > start_step) checkpoint_steps.insert(spec.warmup_steps);
    if (spec.kind == schedule::ScheduleKind::ConstantCooldown && spec.decay_steps > 0) {
        const std::int64_t decay_start = n_total - spec.decay_steps;
        if (decay_start > start_step) checkpoint_steps.insert(decay_start);
    }
    checkpoint_steps.insert(n_total);

    TrainResult result;
    std::vector<double> grad(dim, 0.0);
    double last_train_loss = 0.0;
    bool have_train_loss = false;

    auto swa_estimate_loss = [&]() -> std::optional<double> {
        if (!st.swa || !st.swa->has_estimate()) return std::nullopt;
        return task.eval_loss(st.swa->estimate());
    };

    auto emit_row = [&](std::int64_t k) {
        RunRow row;
        row.step = k;
        row.samples = k * cfg.batch_size;
        row.lr = schedule::lr_at(spec, k);
        row.eval_loss = task.eval_loss(st.w);
        row.train_loss = have_train_loss ? last_train_loss : row.eval_loss;
        row.swa_eval_loss = swa_estimate_loss();
        if (!std::isfinite(row.eval_loss)) {
            throw DivergenceError("non-finite evaluation loss", k);
        }
        result.record.rows.push_back(std::move(row));
    };

    auto emit_checkpoint = [&](std::int64_t k) {
        Checkpoint ck;
        ck.step = k;
        ck.params = st.w;
        ck.config = cfg;
        ck.opt_state = st.opt;
        ck.rng_cursor = st.rng.cursor();
        ck.kind = "raw";
        if (st.swa) {
            SwaSnapshot snap;
            snap.window = st.swa->window_size;
            snap.stride = cfg.swa->stride;
            snap.count = st.swa->count;
            snap.total_updates = st.swa->total_updates;
            snap.mean = st.swa->mean;
            ck.swa = std::move(snap);
        }
        result.checkpoints.push_back(std::move(ck));
    };

    if (start_step % cfg.eval_every == 0) emit_row(start_step);

    for (std::int64_t i = start_step; i < n_total; ++i) {
        const double lr = schedule::lr_at(spec, i);
        last_train_loss = task.stochastic_gradient(st.w, cfg.batch_size, st.rng, grad);
        have_train_loss = true;
        if (!std::isfinite(last_train_loss)) {
            throw DivergenceError("non-finite training loss", i);
        }
        if (cfg.optimizer.clip_max) {
            optim::clip_global_norm_inplace(grad, *cfg.optimizer.clip_max);
        }
        if (cfg.optimizer_kind == OptimizerKind::AdamW) {
            optim::adamw_step(st.opt, st.w, grad, lr, cfg.optimizer);
        } else {
            for (std::int64_t j = 0; j < dim; ++j) st.w[j] -= lr * grad[j];
            st.opt.step_count += 1;
        }
        const std::int64_t k = i + 1;
        if (st.swa && k % cfg.swa->stride == 0) {
            const std::size_t completed_before = st.swa->completed_window_means.size();
            averaging::swa_update(*st.swa, st.w);
            if (st.swa->completed_window_means.size() > completed_before) {
                // A finished window becomes its own checkpoint.
                Checkpoint ck;
                ck.step = k;
                ck.params = st.swa->completed_window_means.back().second;
                ck.config = cfg;
                ck.opt_state = optim::OptimizerState(st.w.size());
                ck.rng_cursor = st.rng.cursor();
                ck.kind = "swa_window";
                result.checkpoints.push_back(std::move(ck));
            }
        }
        if (k % cfg.eval_every == 0 || k == n_total) emit_row(k);
        if (checkpoint_steps.count(k)) emit_checkpoint(k);
    }

    if (result.record.rows.empty() || result.record.rows.back().step != n_total) emit_row(n_total);

    const auto t1 = std::chrono::steady_clock::now();
    RunSummary& s = result.record.summary;
    s.total_steps = n_total;
    const RunRow& last = result.record.rows.back();
    s.final_train_loss = last.train_loss;
    s.final_eval_loss = last.eval_loss;
    s.final_swa_eval_loss = last.swa_eval_loss;
    s.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return result;
}

} // namespace detail

/// Trains from scratch: parameters are drawn from the task seed, then every
/// update applies clip -> optimizer step with lr_at(i). Deterministic given
/// the config; all randomness flows from the task seed through one counter
/// stream whose position checkpoints capture exactly.
inline TrainResult train(const TrainerConfig& cfg) {
    detail::validate_config(cfg);
    auto task = tasks::make_task(cfg.task);
    detail::LoopState st{
        {}, optim::OptimizerState(static_cast<std::size_t>(task->dim())),
        CounterRng(cfg.task.seed), std::nullopt};
    st.w = task->initial_params(st.rng);
    if (cfg.swa) {
        st.swa = averaging::SwaState(cfg.swa->window, st.w.size());
    }
    return detail::run_loop(*task, cfg, cfg.schedule, std::move(st), 0);
}

/// Branches a cooldown off a trunk checkpoint: continues for `decay_steps`
/// with `shape` taking the rate from the trunk peak down to zero. The RNG
/// cursor, parameters and moments come from the checkpoint, so rerunning the
/// planned schedule end-to-end produces a bit-identical tail.
inline TrainResult resume_with_cooldown(const Checkpoint& ckpt, std::int64_t decay_steps,
                                        const schedule::CooldownShape& shape) {
    if (decay_steps < 1) {
        throw std::domain_error("resume_with_cooldown: decay_steps must be >= 1");
    }
    if (ckpt.kind != "raw") {
        throw std::domain_error("resume_with_cooldown: need a raw parameter checkpoint");
    }
    const schedule::ScheduleSpec& trunk = ckpt.config.schedule;
    if (trunk.kind == schedule::ScheduleKind::Cosine) {
        throw std::domain_error("resume_with_cooldown: trunk must be constant or "
                                "constant+cooldown");
    }
    if (trunk.kind == schedule::ScheduleKind::ConstantCooldown &&
        ckpt.step > trunk.total_steps - trunk.decay_steps) {
        throw std::domain_error("resume_with_cooldown: checkpoint already inside a decay phase");
    }
    if (ckpt.step < 1) {
        throw std::domain_error("resume_with_cooldown: checkpoint precedes any training");
    }

    TrainerConfig cfg = ckpt.config;
    cfg.schedule = schedule::ScheduleSpec::constant_cooldown(
        trunk.peak_lr, ckpt.step + decay_steps, std::min(trunk.warmup_steps, ckpt.step),
        decay_steps, shape);
    detail::validate_config(cfg);

    auto task = tasks::make_task(cfg.task);
    if (static_cast<std::int64_t>(ckpt.params.size()) != task->dim()) {
        throw std::invalid_argument("resume_with_cooldown: checkpoint dimension mismatch");
    }
    detail::LoopState st{ckpt.params, ckpt.opt_state, CounterRng(cfg.task.seed, ckpt.rng_cursor),
                         std::nullopt};
    if (cfg.swa) {
        st.swa = averaging::SwaState(cfg.swa->window, st.w.size());
        if (ckpt.swa) {
            st.swa->count = ckpt.swa->count;
            st.swa->total_updates = ckpt.swa->total_updates;
            st.swa->mean = ckpt.swa->mean;
        }
    }
    return detail::run_loop(*task, cfg, cfg.schedule, std::move(st), ckpt.step);
}

/// Evaluation loss along the straight line between two checkpoints of the
/// same task, at n_points uniformly spaced blend weights in [0,1].
inline std::vector<std::pair<double, double>> interpolation_probe(const Checkpoint& a,
                                                                  const Checkpoint& b,
                                                                  std::int64_t n_points) {
    if (n_points < 2) throw std::domain_error("interpolation_probe: need n_points >= 2");
    if (a.params.size() != b.params.size()) {
        throw std::invalid_argument("interpolation_probe: dimension mismatch");
    }
    if (!(a.config.task == b.config.task)) {
        throw std::invalid_argument("interpolation_probe: checkpoints from different tasks");
    }
    auto task = tasks::make_task(a.config.task);
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (std::int64_t j = 0; j < n_points; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(n_points - 1);
        const std::vector<double> w = averaging::interpolate(a.params, b.params, t);
        out.emplace_back(t, task->eval_loss(w));
    }
    return out;
}

} // namespace cdlab::trainer
