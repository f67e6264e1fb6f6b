// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdlab::compute {

/// Decoder-transformer dimensions plus the parameter count used as the
/// tokens-per-parameter denominator when planning token budgets.
struct ModelConfig {
    std::int64_t d_model = 768;
    std::int64_t n_layers = 12;
    std::int64_t ffw_size = 2048;
    std::int64_t key_size = 64;
    std::int64_t n_heads = 12;
    std::int64_t vocab_size = 50304;
    std::int64_t seq_len = 512;
    bool swiglu = true;
    std::int64_t param_count = 124000000;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void check_model_config(const ModelConfig& cfg) {
    if (cfg.d_model < 1 || cfg.n_layers < 1 || cfg.ffw_size < 1 || cfg.key_size < 1 ||
        cfg.n_heads < 1 || cfg.vocab_size < 1 || cfg.seq_len < 1) {
        throw std::domain_error("ModelConfig: all dimensions must be >= 1");
    }
    if (cfg.param_count < 1) throw std::domain_error("ModelConfig: param_count must be >= 1");
}

/// Exact per-component FLOPs of one training step on one sequence.
/// total = 3 * single_forward (backward assumed to cost twice the forward).
struct FlopsBreakdown {
    std::uint64_t embedding = 0;
    std::uint64_t attention = 0; // one layer
    std::uint64_t dense = 0;     // one layer
    std::uint64_t final_logits = 0;
    std::uint64_t single_forward = 0;
    std::uint64_t total = 0;
};

namespace detail {

inline std::uint64_t checked_narrow(unsigned __int128 v, const char* what) {
    if (v > static_cast<unsigned __int128>(std::numeric_limits<std::uint64_t>::max())) {
        throw std::overflow_error(std::string("flops_per_sequence: ") + what +
                                  " exceeds 64-bit range");
    }
    return static_cast<std::uint64_t>(v);
}

} // namespace detail

/// Exact integer evaluation of the per-sequence FLOPs model. Intermediates
/// are computed in 128 bits; results wider than 64 bits raise overflow_error.
inline FlopsBreakdown flops_per_sequence(const ModelConfig& cfg) {
    check_model_config(cfg);
    using u128 = unsigned __int128;
    const u128 seq = static_cast<u128>(cfg.seq_len);
    const u128 d = static_cast<u128>(cfg.d_model);
    const u128 kh = static_cast<u128>(cfg.key_size) * static_cast<u128>(cfg.n_heads);
    const u128 vocab = static_cast<u128>(cfg.vocab_size);
    const u128 ffw = static_cast<u128>(cfg.ffw_size);
    const u128 heads = static_cast<u128>(cfg.n_heads);
    const u128 layers = static_cast<u128>(cfg.n_layers);

    const u128 embedding = 2 * seq * vocab * d;
    const u128 projections = 2 * 3 * seq * d * kh;
    const u128 attn_logits = 2 * seq * seq * kh;
    const u128 softmax = 3 * heads * seq * seq;
    const u128 softmax_query_reduction = 2 * seq * seq * kh;
    const u128 attn_final = 2 * seq * kh * d;
    const u128 attention = projections + attn_logits + softmax + softmax_query_reduction +
                           attn_final;
    const u128 dense = cfg.swiglu ? 2 * seq * (3 * d * ffw) : 2 * seq * (2 * d * ffw);
    const u128 final_logits = 2 * seq * d * vocab;
    const u128 single = embedding + layers * (attention + dense) + final_logits;
    const u128 total = 3 * single;

    FlopsBreakdown out;
    out.embedding = detail::checked_narrow(embedding, "embedding");
    out.attention = detail::checked_narrow(attention, "attention");
    out.dense = detail::checked_narrow(dense, "dense");
    out.final_logits = detail::checked_narrow(final_logits, "final_logits");
    out.single_forward = detail::checked_narrow(single, "single_forward");
    out.total = detail::checked_narrow(total, "total");
    return out;
}

/// Training FLOPs for a token budget: per-token cost times `tokens`.
inline double flops_for_tokens(const ModelConfig& cfg, double tokens) {
    if (!(tokens >= 1.0)) throw std::domain_error("flops_for_tokens: tokens must be >= 1");
    const FlopsBreakdown b = flops_per_sequence(cfg);
    return static_cast<double>(b.total) / static_cast<double>(cfg.seq_len) * tokens;
}

/// Exact parameter count implied by the dimensions (untied input and output
/// embeddings, matching the matrices the FLOPs model charges for).
inline std::int64_t param_count_from_dims(const ModelConfig& cfg) {
    check_model_config(cfg);
    const std::int64_t kh = cfg.key_size * cfg.n_heads;
    const std::int64_t attn = 3 * cfg.d_model * kh + kh * cfg.d_model;
    const std::int64_t mlp = (cfg.swiglu ? 3 : 2) * cfg.d_model * cfg.ffw_size;
    return cfg.vocab_size * cfg.d_model + cfg.n_layers * (attn + mlp) +
           cfg.d_model * cfg.vocab_size;
}

enum class Strategy {
    CosinePerLength,     // one full run per target length
    ConstantPlusCooldown, // shared trunk, one cooldown per target
    ConstantPlusSwa,      // shared trunk, averages evaluated along the way
};

/// Planned cost for one model across all target token counts.
struct ModelPlan {
    std::string name;
    ModelConfig config;
    std::vector<double> target_tokens; // D_i = ratio_i * param_count
    double token_cost = 0.0;           // tokens actually trained
    double flops = 0.0;
};

struct SuitePlan {
    Strategy strategy = Strategy::CosinePerLength;
    double cooldown_fraction = 0.2;
    std::vector<double> ratios;
    std::vector<ModelPlan> models;
    double total_flops = 0.0;
};

inline double token_cost_for(Strategy strategy, const std::vector<double>& targets,
                             double cooldown_fraction) {
    const double max_d = *std::max_element(targets.begin(), targets.end());
    double sum_d = 0.0;
    for (double d : targets) sum_d += d;
    switch (strategy) {
    case Strategy::CosinePerLength:
        return sum_d;
    case Strategy::ConstantPlusCooldown:
        return (1.0 - cooldown_fraction) * max_d + cooldown_fraction * sum_d;
    case Strategy::ConstantPlusSwa:
        return max_d;
    }
    throw std::logic_error("token_cost_for: unknown strategy");
}

/// Builds the token and FLOPs budget for a model suite under a strategy.
/// Ratios are tokens-per-parameter multipliers and must be strictly
/// increasing. Warmup tokens are excluded (identical across strategies).
inline SuitePlan plan_suite(const std::vector<ModelConfig>& models,
                            const std::vector<double>& ratios, Strategy strategy,
                            double cooldown_fraction = 0.2,
                            const std::vector<std::string>& names = {}) {
    if (models.empty()) throw std::domain_error("plan_suite: empty model list");
    if (ratios.empty()) throw std::domain_error("plan_suite: empty ratio list");
    for (std::size_t i = 1; i < ratios.size(); ++i) {
        if (!(ratios[i] > ratios[i - 1])) {
            throw std::domain_error("plan_suite: ratios must be strictly increasing");
        }
    }
    if (!(ratios.front() > 0.0)) throw std::domain_error("plan_suite: ratios must be positive");
    if (strategy == Strategy::ConstantPlusCooldown &&
        !(cooldown_fraction > 0.0 && cooldown_fraction < 1.0)) {
        throw std::domain_error("plan_suite: cooldown_fraction must lie in (0,1)");
    }
    if (!names.empty() && names.size() != models.size()) {
        throw std::invalid_argument("plan_suite: names/models size mismatch");
    }

    SuitePlan plan;
    plan.strategy = strategy;
    plan.cooldown_fraction = cooldown_fraction;
    plan.ratios = ratios;
    for (std::size_t i = 0; i < models.size(); ++i) {
        ModelPlan mp;
        mp.name = names.empty() ? "model" + std::to_string(i) : names[i];
        mp.config = models[i];
        check_model_config(models[i]);
        for (double r : ratios) {
            mp.target_tokens.push_back(r * static_cast<double>(models[i].param_count));
        }
        mp.token_cost = token_cost_for(strategy, mp.target_tokens, cooldown_fraction);
        mp.flops = flops_for_tokens(models[i], mp.token_cost);
        plan.total_flops += mp.flops;
        plan.models.push_back(std::move(mp));
    }
    return plan;
}

/// Optional wall-clock conversion inputs: sustained throughput in FLOPs/s
/// and a utilization factor in (0,1].
struct ThroughputModel {
    double flops_per_second = 0.0;
    double utilization = 1.0;
};

struct SavingsReport {
    double baseline_flops = 0.0;
    double alternative_flops = 0.0;
    double ratio = 1.0; // alternative / baseline
    std::optional<double> baseline_gpu_hours;
    std::optional<double> alternative_gpu_hours;
};

/// Compares two plans that cover the same models and ratios.
inline SavingsReport savings(const SuitePlan& baseline, const SuitePlan& alternative,
                             std::optional<ThroughputModel> throughput = std::nullopt) {
    if (baseline.models.size() != alternative.models.size() ||
        baseline.ratios != alternative.ratios) {
        throw std::domain_error("savings: plans cover different suites");
    }
    for (std::size_t i = 0; i < baseline.models.size(); ++i) {
        if (!(baseline.models[i].config == alternative.models[i].config)) {
            throw std::domain_error("savings: plans cover different models");
        }
    }
    SavingsReport rep;
    rep.baseline_flops = baseline.total_flops;
    rep.alternative_flops = alternative.total_flops;
    rep.ratio = rep.alternative_flops / rep.baseline_flops;
    if (throughput) {
        if (!(throughput->flops_per_second > 0.0) ||
            !(throughput->utilization > 0.0 && throughput->utilization <= 1.0)) {
            throw std::domain_error("savings: invalid throughput model");
        }
        const double eff = throughput->flops_per_second * throughput->utilization;
        rep.baseline_gpu_hours = rep.baseline_flops / eff / 3600.0;
        rep.alternative_gpu_hours = rep.alternative_flops / eff / 3600.0;
    }
    return rep;
}

} // namespace cdlab::compute
