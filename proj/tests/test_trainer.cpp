// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cdlab/checkpoint_io.hpp"
#include "cdlab/schedule.hpp"
#include "cdlab/tasks.hpp"
#include "cdlab/trainer.hpp"

using namespace cdlab;
using schedule::CooldownShape;
using schedule::ScheduleSpec;
using tasks::NoisyQuadraticSpec;
using trainer::TrainerConfig;
using trainer::TrainResult;

namespace {

TrainerConfig quad_config(std::uint64_t seed, double peak, std::int64_t total,
                          std::int64_t warmup, std::int64_t decay) {
    TrainerConfig cfg;
    cfg.task.kind = NoisyQuadraticSpec{.dim = 20, .eigen_min = 0.05, .eigen_max = 1.0,
                                       .noise_scale = 0.1};
    cfg.task.seed = seed;
    cfg.schedule = ScheduleSpec::constant_cooldown(peak, total, warmup, decay);
    cfg.optimizer.weight_decay = 0.0;
    cfg.batch_size = 1;
    cfg.eval_every = 25;
    cfg.checkpoint_every = 200;
    return cfg;
}

bool rows_equal(const trainer::RunRow& a, const trainer::RunRow& b) {
    return a.step == b.step && a.samples == b.samples && a.lr == b.lr &&
           a.train_loss == b.train_loss && a.eval_loss == b.eval_loss &&
           a.swa_eval_loss == b.swa_eval_loss;
}

} // namespace

TEST_CASE("plain gradient descent matches the closed-form linear recursion") {
    TrainerConfig cfg;
    cfg.task.kind = NoisyQuadraticSpec{.dim = 10, .eigen_min = 0.1, .eigen_max = 1.0,
                                       .noise_scale = 0.0};
    cfg.task.seed = 7;
    cfg.schedule = ScheduleSpec::constant(0.05, 400, 0);
    cfg.optimizer_kind = trainer::OptimizerKind::Sgd;
    cfg.optimizer.clip_max.reset();
    cfg.eval_every = 50;
    const TrainResult result = trainer::train(cfg);

    // Oracle: w_t = (I - lr H)^t w_0, evaluated independently.
    tasks::NoisyQuadraticTask task(std::get<NoisyQuadraticSpec>(cfg.task.kind));
    CounterRng rng(7);
    const std::vector<double> w0 = task.initial_params(rng);
    const auto& h = task.eigenvalues();
    for (const auto& row : result.record.rows) {
        double expected_loss = 0.0;
        for (std::size_t i = 0; i < w0.size(); ++i) {
            const double decay = std::pow(1.0 - 0.05 * h[i], static_cast<double>(row.step));
            const double wi = decay * w0[i];
            expected_loss += h[i] * wi * wi;
        }
        expected_loss *= 0.5;
        CAPTURE(row.step);
        REQUIRE_THAT(row.eval_loss, Catch::Matchers::WithinAbs(expected_loss, 1e-9));
    }
}

TEST_CASE("zero peak rate freezes the loss") {
    TrainerConfig cfg = quad_config(3, 0.0, 300, 100, 50);
    const TrainResult result = trainer::train(cfg);
    const double first = result.record.rows.front().eval_loss;
    for (const auto& row : result.record.rows) {
        REQUIRE(row.eval_loss == first);
    }
}

TEST_CASE("training is bit-deterministic given config and seed") {
    TrainerConfig cfg = quad_config(11, 0.01, 600, 100, 120);
    cfg.swa = trainer::SwaOptions{.window = 100, .stride = 1};
    const TrainResult a = trainer::train(cfg);
    const TrainResult b = trainer::train(cfg);
    REQUIRE(a.record.rows.size() == b.record.rows.size());
    for (std::size_t i = 0; i < a.record.rows.size(); ++i) {
        REQUIRE(rows_equal(a.record.rows[i], b.record.rows[i]));
    }
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        REQUIRE(a.checkpoints[i].params == b.checkpoints[i].params);
        REQUIRE(a.checkpoints[i].rng_cursor == b.checkpoints[i].rng_cursor);
    }
}

TEST_CASE("metrics rows satisfy the record invariants") {
    TrainerConfig cfg = quad_config(5, 0.01, 500, 100, 100);
    cfg.batch_size = 4;
    const TrainResult result = trainer::train(cfg);
    std::int64_t prev_step = -1;
    for (const auto& row : result.record.rows) {
        REQUIRE(row.step > prev_step);
        prev_step = row.step;
        REQUIRE(row.lr == schedule::lr_at(cfg.schedule, row.step));
        REQUIRE(row.samples == row.step * cfg.batch_size);
    }
    CHECK(result.record.rows.back().step == 500);
    CHECK(result.record.summary.total_steps == 500);
}

TEST_CASE("checkpoints appear at cadence steps and phase boundaries") {
    TrainerConfig cfg = quad_config(5, 0.01, 500, 70, 130);
    cfg.checkpoint_every = 150;
    const TrainResult result = trainer::train(cfg);
    std::vector<std::int64_t> steps;
    for (const auto& ck : result.checkpoints) steps.push_back(ck.step);
    for (std::int64_t expected : {70ll, 150ll, 300ll, 370ll, 450ll, 500ll}) {
        CAPTURE(expected);
        REQUIRE(std::count(steps.begin(), steps.end(), expected) == 1);
    }
}

TEST_CASE("decay-start checkpoint resume reproduces the tail bit-exactly") {
    TrainerConfig cfg = quad_config(21, 0.02, 800, 100, 160);
    cfg.checkpoint_every = 400;
    const TrainResult full = trainer::train(cfg);

    // The phase-boundary checkpoint at N - N_decay = 640.
    const trainer::Checkpoint* start = nullptr;
    for (const auto& ck : full.checkpoints) {
        if (ck.step == 640 && ck.kind == "raw") start = &ck;
    }
    REQUIRE(start != nullptr);

    // Branch with the planned decay length and shape: the tail must agree
    // with the uninterrupted run sample for sample.
    const TrainResult branch = trainer::resume_with_cooldown(*start, 160, cfg.schedule.shape);
    REQUIRE(branch.record.rows.back().step == 800);
    int matched = 0;
    for (const auto& row : branch.record.rows) {
        if (row.step <= 640) continue;
        bool found = false;
        for (const auto& orig : full.record.rows) {
            if (orig.step == row.step) {
                CAPTURE(row.step);
                REQUIRE(rows_equal(orig, row));
                found = true;
            }
        }
        REQUIRE(found);
        ++matched;
    }
    CHECK(matched >= 6);
    REQUIRE(branch.record.rows.back().eval_loss == full.record.rows.back().eval_loss);
}

TEST_CASE("mid-trunk checkpoint continues the trunk bit-exactly") {
    // Rerunning the same constant schedule from a mid-trunk checkpoint must
    // land on the same parameters as the uninterrupted run.
    TrainerConfig cfg = quad_config(22, 0.02, 800, 100, 0);
    cfg.schedule = ScheduleSpec::constant(0.02, 800, 100);
    cfg.checkpoint_every = 400;
    const TrainResult full = trainer::train(cfg);

    const trainer::Checkpoint* mid = nullptr;
    for (const auto& ck : full.checkpoints) {
        if (ck.step == 400 && ck.kind == "raw") mid = &ck;
    }
    REQUIRE(mid != nullptr);

    // Drive the continuation through the loop directly via a cooldown of the
    // remaining length with a constant-equivalent shape: instead, rebuild the
    // run from the checkpoint using the original schedule.
    tasks::TaskSpec task_spec = cfg.task;
    auto task = tasks::make_task(task_spec);
    std::vector<double> w = mid->params;
    optim::OptimizerState opt = mid->opt_state;
    CounterRng rng(cfg.task.seed, mid->rng_cursor);
    std::vector<double> grad(task->dim());
    for (std::int64_t i = 400; i < 800; ++i) {
        const double lr = schedule::lr_at(cfg.schedule, i);
        task->stochastic_gradient(w, cfg.batch_size, rng, grad);
        if (cfg.optimizer.clip_max) {
            optim::clip_global_norm_inplace(grad, *cfg.optimizer.clip_max);
        }
        optim::adamw_step(opt, w, grad, lr, cfg.optimizer);
    }
    const trainer::Checkpoint* final_ck = nullptr;
    for (const auto& ck : full.checkpoints) {
        if (ck.step == 800 && ck.kind == "raw") final_ck = &ck;
    }
    REQUIRE(final_ck != nullptr);
    REQUIRE(w == final_ck->params);
    REQUIRE(rng.cursor() == final_ck->rng_cursor);
}

TEST_CASE("resume_with_cooldown rejects invalid branch points") {
    TrainerConfig cfg = quad_config(4, 0.02, 400, 50, 100);
    cfg.checkpoint_every = 350;
    const TrainResult full = trainer::train(cfg);

    const trainer::Checkpoint* pre = nullptr;
    const trainer::Checkpoint* inside = nullptr;
    for (const auto& ck : full.checkpoints) {
        if (ck.step == 300) pre = &ck; // decay starts at 300
        if (ck.step == 350) inside = &ck;
    }
    REQUIRE(pre != nullptr);
    REQUIRE(inside != nullptr);

    CHECK_THROWS_AS(trainer::resume_with_cooldown(*pre, 0, CooldownShape::linear()),
                    std::domain_error);
    CHECK_THROWS_AS(trainer::resume_with_cooldown(*inside, 50, CooldownShape::linear()),
                    std::domain_error);
    CHECK_NOTHROW(trainer::resume_with_cooldown(*pre, 50, CooldownShape::linear()));
}

TEST_CASE("resume from a reloaded checkpoint matches the in-memory branch") {
    TrainerConfig cfg = quad_config(29, 0.02, 600, 80, 120);
    cfg.checkpoint_every = 10000;
    const TrainResult full = trainer::train(cfg);
    const trainer::Checkpoint* boundary = nullptr;
    for (const auto& ck : full.checkpoints) {
        if (ck.step == 480 && ck.kind == "raw") boundary = &ck;
    }
    REQUIRE(boundary != nullptr);

    const trainer::Checkpoint reloaded =
        checkpoint_io::deserialize(checkpoint_io::serialize(*boundary));
    const TrainResult a = trainer::resume_with_cooldown(*boundary, 120, cfg.schedule.shape);
    const TrainResult b = trainer::resume_with_cooldown(reloaded, 120, cfg.schedule.shape);
    REQUIRE(a.record.rows.size() == b.record.rows.size());
    for (std::size_t i = 0; i < a.record.rows.size(); ++i) {
        REQUIRE(rows_equal(a.record.rows[i], b.record.rows[i]));
    }
}

TEST_CASE("longer retroactive cooldowns reach lower expected loss") {
    int wins = 0;
    const int seeds = 10;
    for (int seed = 0; seed < seeds; ++seed) {
        TrainerConfig cfg = quad_config(static_cast<std::uint64_t>(seed), 0.05, 1500, 100, 0);
        cfg.task.kind = NoisyQuadraticSpec{.dim = 100, .eigen_min = 0.1, .eigen_max = 1.0,
                                           .noise_scale = 0.3};
        cfg.schedule = ScheduleSpec::constant(0.05, 1500, 100);
        cfg.checkpoint_every = 1000;
        const TrainResult trunk = trainer::train(cfg);
        const trainer::Checkpoint* ck = nullptr;
        for (const auto& c : trunk.checkpoints) {
            if (c.step == 1000 && c.kind == "raw") ck = &c;
        }
        REQUIRE(ck != nullptr);
        const auto short_cd =
            trainer::resume_with_cooldown(*ck, 100, CooldownShape::one_minus_sqrt());
        const auto long_cd =
            trainer::resume_with_cooldown(*ck, 500, CooldownShape::one_minus_sqrt());
        if (long_cd.record.summary.final_eval_loss <= short_cd.record.summary.final_eval_loss) {
            ++wins;
        }
    }
    REQUIRE(wins >= 9);
}

TEST_CASE("steady-state loss under a constant rate increases with the rate") {
    // Monte-Carlo mean of the tail losses over a few seeds per rate.
    const std::vector<double> rates = {0.01, 0.03, 0.09};
    std::vector<double> levels;
    for (const double rate : rates) {
        double acc = 0.0;
        int count = 0;
        for (int seed = 0; seed < 3; ++seed) {
            TrainerConfig cfg;
            cfg.task.kind = NoisyQuadraticSpec{.dim = 100, .eigen_min = 0.1, .eigen_max = 1.0,
                                               .noise_scale = 0.3};
            cfg.task.seed = 100 + static_cast<std::uint64_t>(seed);
            cfg.schedule = ScheduleSpec::constant(rate, 3000, 100);
            cfg.eval_every = 50;
            cfg.checkpoint_every = 5000;
            const TrainResult run = trainer::train(cfg);
            for (const auto& row : run.record.rows) {
                if (row.step > 1500) {
                    acc += row.eval_loss;
                    ++count;
                }
            }
        }
        levels.push_back(acc / count);
    }
    CAPTURE(levels[0], levels[1], levels[2]);
    REQUIRE(levels[0] < levels[1]);
    REQUIRE(levels[1] < levels[2]);
}

TEST_CASE("swa rows track the window average") {
    TrainerConfig cfg = quad_config(31, 0.02, 400, 50, 0);
    cfg.schedule = ScheduleSpec::constant(0.02, 400, 50);
    cfg.swa = trainer::SwaOptions{.window = 100, .stride = 1};
    const TrainResult result = trainer::train(cfg);
    bool saw_swa = false;
    for (const auto& row : result.record.rows) {
        if (row.step > 0) {
            REQUIRE(row.swa_eval_loss.has_value());
            saw_swa = true;
        }
    }
    CHECK(saw_swa);
    int window_checkpoints = 0;
    for (const auto& ck : result.checkpoints) {
        if (ck.kind == "swa_window") ++window_checkpoints;
    }
    CHECK(window_checkpoints == 4);
}

TEST_CASE("divergent runs abort with a diagnostic") {
    TrainerConfig cfg;
    cfg.task.kind = NoisyQuadraticSpec{.dim = 5, .eigen_min = 1.0, .eigen_max = 1.0,
                                       .noise_scale = 0.0};
    cfg.task.seed = 1;
    cfg.schedule = ScheduleSpec::constant(1e6, 2000, 0);
    cfg.optimizer_kind = trainer::OptimizerKind::Sgd;
    cfg.optimizer.clip_max.reset();
    cfg.eval_every = 10;
    CHECK_THROWS_AS(trainer::train(cfg), DivergenceError);
}

TEST_CASE("interpolation probe endpoints and quadratic convexity") {
    TrainerConfig cfg = quad_config(17, 0.02, 600, 100, 120);
    cfg.checkpoint_every = 300;
    const TrainResult run = trainer::train(cfg);
    const trainer::Checkpoint* a = nullptr;
    const trainer::Checkpoint* b = nullptr;
    for (const auto& ck : run.checkpoints) {
        if (ck.step == 300) a = &ck;
        if (ck.step == 600 && ck.kind == "raw") b = &ck;
    }
    REQUIRE(a != nullptr);
    REQUIRE(b != nullptr);

    const auto probe = trainer::interpolation_probe(*a, *b, 11);
    REQUIRE(probe.size() == 11);
    tasks::NoisyQuadraticTask task(std::get<NoisyQuadraticSpec>(cfg.task.kind));
    CHECK(probe.front().second == task.eval_loss(a->params));
    CHECK(probe.back().second == task.eval_loss(b->params));
    const double worst_end = std::max(probe.front().second, probe.back().second);
    for (const auto& [t, loss] : probe) {
        REQUIRE(loss <= worst_end * (1.0 + 1e-12));
    }

    CHECK_THROWS_AS(trainer::interpolation_probe(*a, *b, 1), std::domain_error);

    trainer::Checkpoint other = *b;
    other.params.resize(other.params.size() - 1);
    CHECK_THROWS_AS(trainer::interpolation_probe(*a, other, 5), std::invalid_argument);

    trainer::Checkpoint different_task = *b;
    different_task.config.task.seed += 1;
    CHECK_THROWS_AS(trainer::interpolation_probe(*a, different_task, 5),
                    std::invalid_argument);
}
