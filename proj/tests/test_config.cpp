// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "cdlab/cli.hpp"
#include "cdlab/config.hpp"

using namespace cdlab;
using nlohmann::json;

TEST_CASE("empty document yields the fully-defaulted config") {
    const auto cfg = config::load_config(json::object());
    CHECK(std::holds_alternative<tasks::NoisyQuadraticSpec>(cfg.task.kind));
    CHECK(cfg.schedule.kind == schedule::ScheduleKind::ConstantCooldown);
    CHECK(cfg.schedule.peak_lr == 1e-3);
    CHECK(cfg.schedule.total_steps == 5000);
    CHECK(cfg.schedule.warmup_steps == 300);
    CHECK(cfg.schedule.decay_steps == 1000);
    CHECK(cfg.optimizer.beta1 == 0.9);
    CHECK(cfg.optimizer.beta2 == 0.95);
    CHECK(cfg.optimizer.weight_decay == 0.0);
    REQUIRE(cfg.optimizer.clip_max.has_value());
    CHECK(*cfg.optimizer.clip_max == 1.0);
    CHECK(cfg.batch_size == 1);
    CHECK_FALSE(cfg.swa.has_value());

    // The dump echoes every resolved default.
    const json echoed = config::dump_config(cfg);
    CHECK(echoed["schedule"]["peak_lr"] == 1e-3);
    CHECK(echoed["optimizer"]["algorithm"] == "adamw");
    CHECK(echoed["task"]["kind"] == "noisy_quadratic");
}

TEST_CASE("strict mode rejects unknown and kind-mismatched keys") {
    CHECK_THROWS_AS(config::load_config(json::parse(R"({"bogus": 1})")), ConfigError);
    CHECK_THROWS_AS(
        config::load_config(json::parse(R"({"schedule": {"kind": "cosine", "decay_steps": 5}})")),
        ConfigError);
    CHECK_THROWS_AS(
        config::load_config(json::parse(R"({"schedule": {"kind": "constant_cooldown",
                                                         "final_lr_fraction": 0.1}})")),
        ConfigError);
    CHECK_THROWS_AS(
        config::load_config(json::parse(R"({"task": {"kind": "noisy_quadratic", "vocab": 4}})")),
        ConfigError);
    CHECK_THROWS_AS(
        config::load_config(
            json::parse(R"({"schedule": {"kind": "constant_cooldown", "shape_power": 0.4}})")),
        ConfigError);

    try {
        config::load_config(json::parse(R"({"schedule": {"kind": "cosine", "decay_steps": 5}})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key_path() == "schedule.decay_steps");
    }
}

TEST_CASE("config round trips through dump and load") {
    const json doc = json::parse(R"({
        "task": {"kind": "synthetic_lm", "vocab": 32, "hidden": 16, "seed": 99},
        "schedule": {"kind": "constant_cooldown", "peak_lr": 0.002, "total_steps": 4000,
                     "warmup_steps": 200, "decay_steps": 800,
                     "shape": "power", "shape_power": 0.4},
        "optimizer": {"beta1": 0.95, "beta2": 0.99, "clip_max": null},
        "batch_size": 16,
        "swa": {"window": 250}
    })");
    const auto cfg = config::load_config(doc);
    CHECK(cfg.schedule.shape.kind == schedule::ShapeKind::Power);
    CHECK(cfg.schedule.shape.power == 0.4);
    CHECK_FALSE(cfg.optimizer.clip_max.has_value());
    CHECK(cfg.optimizer.weight_decay == 0.1); // language-model default
    REQUIRE(cfg.swa.has_value());
    CHECK(cfg.swa->window == 250);
    CHECK(cfg.swa->stride == 1);

    const json dumped = config::dump_config(cfg);
    const auto reloaded = config::load_config(dumped);
    CHECK(config::dump_config(reloaded) == dumped);
}

TEST_CASE("config digest is stable under key reordering") {
    const auto a = config::load_config(json::parse(
        R"({"batch_size": 4, "schedule": {"kind": "constant", "peak_lr": 0.01}})"));
    const auto b = config::load_config(json::parse(
        R"({"schedule": {"peak_lr": 0.01, "kind": "constant"}, "batch_size": 4})"));
    CHECK(config::config_digest(a) == config::config_digest(b));

    const auto c = config::load_config(json::parse(R"({"batch_size": 5})"));
    CHECK(config::config_digest(a) != config::config_digest(c));
}

TEST_CASE("per-task weight decay defaults") {
    const auto quad = config::load_config(json::object());
    CHECK(quad.optimizer.weight_decay == 0.0);
    const auto lm =
        config::load_config(json::parse(R"({"task": {"kind": "synthetic_lm"}})"));
    CHECK(lm.optimizer.weight_decay == 0.1);
    const auto overridden = config::load_config(json::parse(
        R"({"task": {"kind": "synthetic_lm"}, "optimizer": {"weight_decay": 0.02}})"));
    CHECK(overridden.optimizer.weight_decay == 0.02);
}

TEST_CASE("schedule validation errors surface with their code") {
    try {
        config::load_config(json::parse(
            R"({"schedule": {"kind": "constant_cooldown", "total_steps": 100,
                             "warmup_steps": 100, "decay_steps": 0}})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("warmup_exceeds_total") != std::string::npos);
    }
}

TEST_CASE("model files parse one record per model") {
    const std::string path = "/tmp/cdlab_test_models.json";
    csv::write_file(path, R"({
        "33M": {"d_model": 384, "n_layers": 8, "ffw_size": 1024, "key_size": 64,
                 "n_heads": 6, "vocab_size": 50304, "seq_len": 512, "swiglu": true,
                 "param_count": 33000000},
        "124M": {"param_count": 124000000}
    })");
    const auto models = config::load_models_file(path);
    REQUIRE(models.size() == 2);
    CHECK(models[0].first == "124M"); // nlohmann objects iterate in key order
    CHECK(models[1].second.d_model == 384);

    csv::write_file(path, R"({"m": {"d_model": 0}})");
    CHECK_THROWS_AS(config::load_models_file(path), ConfigError);
    csv::write_file(path, R"({"m": {"bogus": 1}})");
    CHECK_THROWS_AS(config::load_models_file(path), ConfigError);
}

TEST_CASE("sweep expansion is deterministic and derives seeds") {
    const json doc = json::parse(R"({
        "base": {"schedule": {"kind": "constant", "peak_lr": 0.01, "total_steps": 100,
                               "warmup_steps": 10},
                  "task": {"kind": "noisy_quadratic", "seed": 7}, "eval_every": 50},
        "sweep": {"schedule.peak_lr": [0.01, 0.02], "batch_size": [1, 2, 4]}
    })");
    const auto runs = cli::detail::expand_sweep(doc);
    REQUIRE(runs.size() == 6);
    // Axes sorted by key: batch_size is the outer axis, peak_lr the inner.
    CHECK(runs[0].config.batch_size == 1);
    CHECK(runs[0].config.schedule.peak_lr == 0.01);
    CHECK(runs[1].config.schedule.peak_lr == 0.02);
    CHECK(runs[2].config.batch_size == 2);
    // Seeds derive from the base seed and the run index, all distinct.
    std::set<std::uint64_t> seeds;
    for (const auto& run : runs) seeds.insert(run.config.task.seed);
    CHECK(seeds.size() == 6);
    for (const auto& run : runs) CHECK(run.config.task.seed != 7);

    // Sweeping the seed explicitly keeps the listed values.
    const json explicit_doc = json::parse(R"({
        "base": {"schedule": {"kind": "constant", "peak_lr": 0.01, "total_steps": 100,
                               "warmup_steps": 10},
                  "eval_every": 100},
        "sweep": {"task.seed": [1, 2, 3]}
    })");
    const auto explicit_runs = cli::detail::expand_sweep(explicit_doc);
    REQUIRE(explicit_runs.size() == 3);
    CHECK(explicit_runs[0].config.task.seed == 1);
    CHECK(explicit_runs[2].config.task.seed == 3);
}
