// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cdlab/compute.hpp"
#include "cdlab/rng.hpp"

using namespace cdlab;
using compute::ModelConfig;
using compute::Strategy;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.seq_len = 1;
    cfg.vocab_size = 2;
    cfg.d_model = 1;
    cfg.key_size = 1;
    cfg.n_heads = 1;
    cfg.ffw_size = 1;
    cfg.n_layers = 1;
    cfg.swiglu = true;
    cfg.param_count = 1;
    return cfg;
}

ModelConfig gpt_124m() {
    ModelConfig cfg;
    cfg.d_model = 768;
    cfg.n_layers = 12;
    cfg.ffw_size = 2048;
    cfg.key_size = 64;
    cfg.n_heads = 12;
    cfg.vocab_size = 50304;
    cfg.seq_len = 512;
    cfg.swiglu = true;
    cfg.param_count = 124000000;
    return cfg;
}

ModelConfig random_config(CounterRng& rng) {
    ModelConfig cfg;
    cfg.d_model = 1 + static_cast<std::int64_t>(rng.next_below(512));
    cfg.n_layers = 1 + static_cast<std::int64_t>(rng.next_below(24));
    cfg.ffw_size = 1 + static_cast<std::int64_t>(rng.next_below(2048));
    cfg.key_size = 1 + static_cast<std::int64_t>(rng.next_below(128));
    cfg.n_heads = 1 + static_cast<std::int64_t>(rng.next_below(16));
    cfg.vocab_size = 2 + static_cast<std::int64_t>(rng.next_below(50000));
    cfg.seq_len = 1 + static_cast<std::int64_t>(rng.next_below(1024));
    cfg.swiglu = rng.next_below(2) == 0;
    cfg.param_count = 1 + static_cast<std::int64_t>(rng.next_below(1u << 30));
    return cfg;
}

} // namespace

TEST_CASE("tiny config reproduces the hand-computed component counts") {
    const auto b = compute::flops_per_sequence(tiny_config());
    CHECK(b.embedding == 4);
    CHECK(b.attention == 15);
    CHECK(b.dense == 6);
    CHECK(b.final_logits == 4);
    CHECK(b.single_forward == 29);
    CHECK(b.total == 87);
}

TEST_CASE("dense-only and embedding-only hand values") {
    ModelConfig cfg = tiny_config();
    cfg.d_model = 2;
    cfg.ffw_size = 4;
    cfg.swiglu = false;
    CHECK(compute::flops_per_sequence(cfg).dense == 32); // 2*1*(2*2*4)

    ModelConfig emb = tiny_config();
    CHECK(compute::flops_per_sequence(emb).embedding == 4); // 2*1*2*1
}

TEST_CASE("total is strictly monotone in every dimension") {
    CounterRng rng(7);
    const auto bump = [](ModelConfig cfg, int which) {
        switch (which) {
        case 0: cfg.d_model++; break;
        case 1: cfg.n_layers++; break;
        case 2: cfg.ffw_size++; break;
        case 3: cfg.key_size++; break;
        case 4: cfg.n_heads++; break;
        case 5: cfg.vocab_size++; break;
        case 6: cfg.seq_len++; break;
        }
        return cfg;
    };
    for (int trial = 0; trial < 30; ++trial) {
        const ModelConfig cfg = random_config(rng);
        const auto base = compute::flops_per_sequence(cfg).total;
        for (int dim = 0; dim < 7; ++dim) {
            CAPTURE(trial, dim);
            REQUIRE(compute::flops_per_sequence(bump(cfg, dim)).total > base);
        }
    }
}

TEST_CASE("flops_for_tokens is per-token linear and agrees at one sequence") {
    const ModelConfig cfg = gpt_124m();
    const auto b = compute::flops_per_sequence(cfg);
    CHECK(compute::flops_for_tokens(cfg, static_cast<double>(cfg.seq_len)) ==
          static_cast<double>(b.total));
    const double one = compute::flops_for_tokens(cfg, 1e9);
    const double two = compute::flops_for_tokens(cfg, 2e9);
    REQUIRE_THAT(two / one, Catch::Matchers::WithinRel(2.0, 1e-12));
    CHECK_THROWS_AS(compute::flops_for_tokens(cfg, 0.0), std::domain_error);
}

TEST_CASE("124M config lands within 25% of the 6ND heuristic") {
    const ModelConfig cfg = gpt_124m();
    const std::int64_t n = compute::param_count_from_dims(cfg);
    const double d = 20.0 * static_cast<double>(n);
    const double ours = compute::flops_for_tokens(cfg, d);
    const double heuristic = 6.0 * static_cast<double>(n) * d;
    const double rel = std::abs(ours - heuristic) / heuristic;
    CAPTURE(n, ours, heuristic, rel);
    CHECK(rel < 0.25);
}

TEST_CASE("dimension overflow raises instead of wrapping") {
    ModelConfig cfg = gpt_124m();
    cfg.seq_len = 1'000'000'000;
    cfg.vocab_size = 1'000'000'000;
    cfg.d_model = 1'000'000'000;
    CHECK_THROWS_AS(compute::flops_per_sequence(cfg), std::overflow_error);
}

TEST_CASE("suite token costs follow the strategy arithmetic") {
    const std::vector<ModelConfig> models = {gpt_124m()};

    SECTION("single ratio admits no reuse") {
        const auto cosine = compute::plan_suite(models, {20.0}, Strategy::CosinePerLength);
        const auto cooled =
            compute::plan_suite(models, {20.0}, Strategy::ConstantPlusCooldown, 0.2);
        REQUIRE_THAT(cooled.models[0].token_cost,
                     Catch::Matchers::WithinRel(cosine.models[0].token_cost, 1e-12));
        const auto rep = compute::savings(cosine, cooled);
        REQUIRE_THAT(rep.ratio, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("ratios 10/20/30 with a 20% cooldown give ratio 0.6") {
        const auto cosine =
            compute::plan_suite(models, {10.0, 20.0, 30.0}, Strategy::CosinePerLength);
        const auto cooled =
            compute::plan_suite(models, {10.0, 20.0, 30.0}, Strategy::ConstantPlusCooldown, 0.2);
        const auto rep = compute::savings(cosine, cooled);
        REQUIRE_THAT(rep.ratio, Catch::Matchers::WithinAbs(0.6, 1e-12));
    }
    SECTION("ratios 10/15/20/25 with a 10% cooldown give 29.5N vs 70N") {
        const auto cosine =
            compute::plan_suite(models, {10.0, 15.0, 20.0, 25.0}, Strategy::CosinePerLength);
        const auto cooled = compute::plan_suite(models, {10.0, 15.0, 20.0, 25.0},
                                                Strategy::ConstantPlusCooldown, 0.1);
        const double n = static_cast<double>(models[0].param_count);
        REQUIRE_THAT(cosine.models[0].token_cost, Catch::Matchers::WithinRel(70.0 * n, 1e-12));
        REQUIRE_THAT(cooled.models[0].token_cost, Catch::Matchers::WithinRel(29.5 * n, 1e-12));
        const auto rep = compute::savings(cosine, cooled);
        REQUIRE_THAT(rep.ratio, Catch::Matchers::WithinAbs(0.42142857142857143, 1e-12));
    }
    SECTION("swa cost is the longest run only") {
        const auto swa =
            compute::plan_suite(models, {10.0, 20.0, 30.0}, Strategy::ConstantPlusSwa);
        const double n = static_cast<double>(models[0].param_count);
        REQUIRE_THAT(swa.models[0].token_cost, Catch::Matchers::WithinRel(30.0 * n, 1e-12));
    }
}

TEST_CASE("savings ratio is invariant under uniform FLOPs scaling") {
    // Ratio depends only on token multiples, so swapping the model for a
    // bigger one (same ratios) leaves it unchanged.
    ModelConfig small = gpt_124m();
    ModelConfig big = gpt_124m();
    big.d_model = 1024;
    big.n_layers = 24;
    big.param_count = 360000000;
    const std::vector<double> ratios = {10.0, 15.0, 20.0, 25.0};
    for (const auto& m : {small, big}) {
        const auto cosine = compute::plan_suite({m}, ratios, Strategy::CosinePerLength);
        const auto cooled =
            compute::plan_suite({m}, ratios, Strategy::ConstantPlusCooldown, 0.1);
        const auto rep = compute::savings(cosine, cooled);
        REQUIRE_THAT(rep.ratio, Catch::Matchers::WithinAbs(0.42142857142857143, 1e-12));
    }
}

TEST_CASE("strategy ordering holds for randomized suites") {
    CounterRng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> ratios;
        double r = 1.0 + rng.next_uniform() * 10.0;
        const int k = 1 + static_cast<int>(rng.next_below(5));
        for (int i = 0; i < k; ++i) {
            ratios.push_back(r);
            r += 0.5 + rng.next_uniform() * 10.0;
        }
        const double frac = 0.01 + 0.98 * rng.next_uniform();
        const std::vector<ModelConfig> models = {gpt_124m()};
        const double swa =
            compute::plan_suite(models, ratios, Strategy::ConstantPlusSwa).total_flops;
        const double cool =
            compute::plan_suite(models, ratios, Strategy::ConstantPlusCooldown, frac).total_flops;
        const double cos =
            compute::plan_suite(models, ratios, Strategy::CosinePerLength).total_flops;
        CAPTURE(trial, frac, ratios.size());
        REQUIRE(swa <= cool * (1.0 + 1e-12));
        REQUIRE(cool <= cos * (1.0 + 1e-12));
    }
}

TEST_CASE("plan and savings validate their inputs") {
    const std::vector<ModelConfig> models = {gpt_124m()};
    CHECK_THROWS_AS(compute::plan_suite({}, {10.0}, Strategy::CosinePerLength),
                    std::domain_error);
    CHECK_THROWS_AS(compute::plan_suite(models, {}, Strategy::CosinePerLength),
                    std::domain_error);
    CHECK_THROWS_AS(compute::plan_suite(models, {10.0, 10.0}, Strategy::CosinePerLength),
                    std::domain_error);
    CHECK_THROWS_AS(
        compute::plan_suite(models, {10.0}, Strategy::ConstantPlusCooldown, 1.5),
        std::domain_error);

    const auto a = compute::plan_suite(models, {10.0, 20.0}, Strategy::CosinePerLength);
    const auto b = compute::plan_suite(models, {10.0, 30.0}, Strategy::CosinePerLength);
    CHECK_THROWS_AS(compute::savings(a, b), std::domain_error);
}

TEST_CASE("gpu-hour estimates derive from throughput and utilization") {
    const std::vector<ModelConfig> models = {gpt_124m()};
    const auto cosine = compute::plan_suite(models, {10.0, 20.0}, Strategy::CosinePerLength);
    const auto cooled =
        compute::plan_suite(models, {10.0, 20.0}, Strategy::ConstantPlusCooldown, 0.2);
    const auto rep =
        compute::savings(cosine, cooled, compute::ThroughputModel{1e15, 0.5});
    REQUIRE(rep.baseline_gpu_hours.has_value());
    REQUIRE_THAT(*rep.baseline_gpu_hours,
                 Catch::Matchers::WithinRel(rep.baseline_flops / 5e14 / 3600.0, 1e-12));
    const auto plain = compute::savings(cosine, cooled);
    CHECK_FALSE(plain.baseline_gpu_hours.has_value());
}
