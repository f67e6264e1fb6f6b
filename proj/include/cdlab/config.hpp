// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdlab/compute.hpp"
#include "cdlab/csv.hpp"
#include "cdlab/errors.hpp"
#include "cdlab/lawfit.hpp"
#include "cdlab/trainer.hpp"

namespace cdlab::config {

using nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

/// Strict-mode guard: every present key must be in the allowed set.
inline void check_keys(const json& j, const std::string& path,
                       const std::set<std::string>& allowed) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError(join_path(path, item.key()), "unknown key");
        }
    }
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t get_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<std::int64_t>();
}

inline std::uint64_t get_u64(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        const std::int64_t v = j.get<std::int64_t>();
        if (v < 0) throw ConfigError(path, "expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }
    throw ConfigError(path, "expected an integer");
}

inline std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
    return j.get<bool>();
}

} // namespace detail

inline std::string shape_name(const schedule::CooldownShape& s) {
    switch (s.kind) {
    case schedule::ShapeKind::Linear: return "linear";
    case schedule::ShapeKind::OneMinusSqrt: return "1-sqrt";
    case schedule::ShapeKind::Cosine: return "cosine";
    case schedule::ShapeKind::MirrorCosine: return "mirror-cosine";
    case schedule::ShapeKind::OneMinusSquare: return "1-square";
    case schedule::ShapeKind::Power: return "power";
    }
    return "?";
}

inline schedule::CooldownShape shape_from_name(const std::string& name, double power,
                                               const std::string& path) {
    using schedule::CooldownShape;
    if (name == "linear") return CooldownShape::linear();
    if (name == "1-sqrt") return CooldownShape::one_minus_sqrt();
    if (name == "cosine") return CooldownShape::cosine();
    if (name == "mirror-cosine") return CooldownShape::mirror_cosine();
    if (name == "1-square") return CooldownShape::one_minus_square();
    if (name == "power") return CooldownShape::with_power(power);
    throw ConfigError(path, "unknown shape '" + name + "'");
}

inline schedule::ScheduleSpec parse_schedule(const json& j, const std::string& path) {
    detail::require_object(j, path);
    schedule::ScheduleSpec spec; // constant_cooldown defaults
    std::string kind = "constant_cooldown";
    if (j.contains("kind")) kind = detail::get_string(j["kind"], detail::join_path(path, "kind"));
    if (kind == "cosine") {
        spec.kind = schedule::ScheduleKind::Cosine;
        detail::check_keys(j, path, {"kind", "peak_lr", "total_steps", "warmup_steps",
                                     "final_lr_fraction"});
        spec.decay_steps = 0;
    } else if (kind == "constant") {
        spec.kind = schedule::ScheduleKind::Constant;
        detail::check_keys(j, path, {"kind", "peak_lr", "total_steps", "warmup_steps"});
        spec.decay_steps = 0;
    } else if (kind == "constant_cooldown") {
        spec.kind = schedule::ScheduleKind::ConstantCooldown;
        detail::check_keys(j, path, {"kind", "peak_lr", "total_steps", "warmup_steps",
                                     "decay_steps", "shape", "shape_power"});
    } else {
        throw ConfigError(detail::join_path(path, "kind"), "unknown schedule kind '" + kind + "'");
    }
    if (j.contains("peak_lr")) {
        spec.peak_lr = detail::get_number(j["peak_lr"], detail::join_path(path, "peak_lr"));
    }
    if (j.contains("total_steps")) {
        spec.total_steps =
            detail::get_integer(j["total_steps"], detail::join_path(path, "total_steps"));
    }
    if (j.contains("warmup_steps")) {
        spec.warmup_steps =
            detail::get_integer(j["warmup_steps"], detail::join_path(path, "warmup_steps"));
    }
    if (j.contains("decay_steps")) {
        spec.decay_steps =
            detail::get_integer(j["decay_steps"], detail::join_path(path, "decay_steps"));
    }
    if (j.contains("final_lr_fraction")) {
        spec.final_lr_fraction = detail::get_number(j["final_lr_fraction"],
                                                    detail::join_path(path, "final_lr_fraction"));
    }
    if (spec.kind == schedule::ScheduleKind::ConstantCooldown) {
        double power = 0.5;
        if (j.contains("shape_power")) {
            if (!j.contains("shape") ||
                detail::get_string(j["shape"], detail::join_path(path, "shape")) != "power") {
                throw ConfigError(detail::join_path(path, "shape_power"),
                                  "only allowed when shape is 'power'");
            }
            power = detail::get_number(j["shape_power"], detail::join_path(path, "shape_power"));
        }
        if (j.contains("shape")) {
            spec.shape = shape_from_name(
                detail::get_string(j["shape"], detail::join_path(path, "shape")), power,
                detail::join_path(path, "shape"));
        }
    }
    const auto violations = schedule::validate(spec);
    if (!violations.empty()) {
        throw ConfigError(path, violations.front().code + ": " + violations.front().message);
    }
    return spec;
}

inline json dump_schedule(const schedule::ScheduleSpec& spec) {
    json j;
    switch (spec.kind) {
    case schedule::ScheduleKind::Cosine:
        j["kind"] = "cosine";
        j["final_lr_fraction"] = spec.final_lr_fraction;
        break;
    case schedule::ScheduleKind::Constant:
        j["kind"] = "constant";
        break;
    case schedule::ScheduleKind::ConstantCooldown:
        j["kind"] = "constant_cooldown";
        j["decay_steps"] = spec.decay_steps;
        j["shape"] = shape_name(spec.shape);
        if (spec.shape.kind == schedule::ShapeKind::Power) j["shape_power"] = spec.shape.power;
        break;
    }
    j["peak_lr"] = spec.peak_lr;
    j["total_steps"] = spec.total_steps;
    j["warmup_steps"] = spec.warmup_steps;
    return j;
}

inline tasks::TaskSpec parse_task(const json& j, const std::string& path) {
    detail::require_object(j, path);
    tasks::TaskSpec spec;
    std::string kind = "noisy_quadratic";
    if (j.contains("kind")) kind = detail::get_string(j["kind"], detail::join_path(path, "kind"));
    if (kind == "noisy_quadratic") {
        detail::check_keys(j, path,
                           {"kind", "dim", "eigen_min", "eigen_max", "noise_scale", "seed"});
        tasks::NoisyQuadraticSpec q;
        if (j.contains("dim")) q.dim = detail::get_integer(j["dim"], detail::join_path(path, "dim"));
        if (j.contains("eigen_min")) {
            q.eigen_min = detail::get_number(j["eigen_min"], detail::join_path(path, "eigen_min"));
        }
        if (j.contains("eigen_max")) {
            q.eigen_max = detail::get_number(j["eigen_max"], detail::join_path(path, "eigen_max"));
        }
        if (j.contains("noise_scale")) {
            q.noise_scale =
                detail::get_number(j["noise_scale"], detail::join_path(path, "noise_scale"));
        }
        if (!(q.eigen_min > 0.0)) {
            throw ConfigError(detail::join_path(path, "eigen_min"), "must be > 0");
        }
        if (q.noise_scale < 0.0) {
            throw ConfigError(detail::join_path(path, "noise_scale"), "must be >= 0");
        }
        spec.kind = q;
    } else if (kind == "synthetic_lm") {
        detail::check_keys(j, path, {"kind", "vocab", "context", "hidden", "corpus_seed",
                                     "corpus_len", "holdout_fraction", "seed"});
        tasks::SyntheticLmSpec lm;
        if (j.contains("vocab")) {
            lm.vocab = detail::get_integer(j["vocab"], detail::join_path(path, "vocab"));
        }
        if (j.contains("context")) {
            lm.context = detail::get_integer(j["context"], detail::join_path(path, "context"));
        }
        if (j.contains("hidden")) {
            lm.hidden = detail::get_integer(j["hidden"], detail::join_path(path, "hidden"));
        }
        if (j.contains("corpus_seed")) {
            lm.corpus_seed = detail::get_u64(j["corpus_seed"],
                                             detail::join_path(path, "corpus_seed"));
        }
        if (j.contains("corpus_len")) {
            lm.corpus_len =
                detail::get_integer(j["corpus_len"], detail::join_path(path, "corpus_len"));
        }
        if (j.contains("holdout_fraction")) {
            lm.holdout_fraction = detail::get_number(
                j["holdout_fraction"], detail::join_path(path, "holdout_fraction"));
        }
        if (lm.vocab < 2) throw ConfigError(detail::join_path(path, "vocab"), "must be >= 2");
        spec.kind = lm;
    } else {
        throw ConfigError(detail::join_path(path, "kind"), "unknown task kind '" + kind + "'");
    }
    if (j.contains("seed")) spec.seed = detail::get_u64(j["seed"], detail::join_path(path, "seed"));
    return spec;
}

inline json dump_task(const tasks::TaskSpec& spec) {
    json j;
    if (const auto* q = std::get_if<tasks::NoisyQuadraticSpec>(&spec.kind)) {
        j["kind"] = "noisy_quadratic";
        j["dim"] = q->dim;
        j["eigen_min"] = q->eigen_min;
        j["eigen_max"] = q->eigen_max;
        j["noise_scale"] = q->noise_scale;
    } else {
        const auto& lm = std::get<tasks::SyntheticLmSpec>(spec.kind);
        j["kind"] = "synthetic_lm";
        j["vocab"] = lm.vocab;
        j["context"] = lm.context;
        j["hidden"] = lm.hidden;
        j["corpus_seed"] = lm.corpus_seed;
        j["corpus_len"] = lm.corpus_len;
        j["holdout_fraction"] = lm.holdout_fraction;
    }
    j["seed"] = spec.seed;
    return j;
}

inline optim::OptimizerConfig parse_optimizer(const json& j, const std::string& path,
                                              trainer::OptimizerKind* kind_out,
                                              bool task_is_lm) {
    detail::require_object(j, path);
    detail::check_keys(j, path, {"algorithm", "beta1", "beta2", "eps", "weight_decay",
                                 "clip_max"});
    optim::OptimizerConfig cfg;
    // Per-task default: decoupled decay of 0.1 for the language-model task,
    // none for the quadratic.
    cfg.weight_decay = task_is_lm ? 0.1 : 0.0;
    trainer::OptimizerKind kind = trainer::OptimizerKind::AdamW;
    if (j.contains("algorithm")) {
        const std::string alg =
            detail::get_string(j["algorithm"], detail::join_path(path, "algorithm"));
        if (alg == "adamw") {
            kind = trainer::OptimizerKind::AdamW;
        } else if (alg == "sgd") {
            kind = trainer::OptimizerKind::Sgd;
        } else {
            throw ConfigError(detail::join_path(path, "algorithm"),
                              "unknown algorithm '" + alg + "'");
        }
    }
    if (j.contains("beta1")) {
        cfg.beta1 = detail::get_number(j["beta1"], detail::join_path(path, "beta1"));
    }
    if (j.contains("beta2")) {
        cfg.beta2 = detail::get_number(j["beta2"], detail::join_path(path, "beta2"));
    }
    if (j.contains("eps")) cfg.eps = detail::get_number(j["eps"], detail::join_path(path, "eps"));
    if (j.contains("weight_decay")) {
        cfg.weight_decay =
            detail::get_number(j["weight_decay"], detail::join_path(path, "weight_decay"));
    }
    if (j.contains("clip_max")) {
        if (j["clip_max"].is_null()) {
            cfg.clip_max = std::nullopt;
        } else {
            cfg.clip_max = detail::get_number(j["clip_max"], detail::join_path(path, "clip_max"));
        }
    }
    try {
        optim::check_optimizer_config(cfg);
    } catch (const std::domain_error& e) {
        throw ConfigError(path, e.what());
    }
    if (kind_out) *kind_out = kind;
    return cfg;
}

inline json dump_optimizer(const optim::OptimizerConfig& cfg, trainer::OptimizerKind kind) {
    json j;
    j["algorithm"] = kind == trainer::OptimizerKind::AdamW ? "adamw" : "sgd";
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["weight_decay"] = cfg.weight_decay;
    if (cfg.clip_max) {
        j["clip_max"] = *cfg.clip_max;
    } else {
        j["clip_max"] = nullptr;
    }
    return j;
}

/// Parses a full run configuration. An empty document yields the defaulted
/// config; unknown keys anywhere are errors.
inline trainer::TrainerConfig load_config(const json& j) {
    detail::require_object(j, "");
    detail::check_keys(j, "", {"task", "schedule", "optimizer", "batch_size", "eval_every",
                               "checkpoint_every", "swa"});
    trainer::TrainerConfig cfg;
    if (j.contains("task")) cfg.task = parse_task(j["task"], "task");
    if (j.contains("schedule")) cfg.schedule = parse_schedule(j["schedule"], "schedule");
    const bool is_lm = std::holds_alternative<tasks::SyntheticLmSpec>(cfg.task.kind);
    if (j.contains("optimizer")) {
        cfg.optimizer = parse_optimizer(j["optimizer"], "optimizer", &cfg.optimizer_kind, is_lm);
    } else {
        cfg.optimizer.weight_decay = is_lm ? 0.1 : 0.0;
    }
    if (j.contains("batch_size")) {
        cfg.batch_size = detail::get_integer(j["batch_size"], "batch_size");
    }
    if (j.contains("eval_every")) {
        cfg.eval_every = detail::get_integer(j["eval_every"], "eval_every");
    }
    if (j.contains("checkpoint_every")) {
        cfg.checkpoint_every = detail::get_integer(j["checkpoint_every"], "checkpoint_every");
    }
    if (j.contains("swa")) {
        detail::require_object(j["swa"], "swa");
        detail::check_keys(j["swa"], "swa", {"window", "stride"});
        trainer::SwaOptions swa;
        if (j["swa"].contains("window")) {
            swa.window = detail::get_integer(j["swa"]["window"], "swa.window");
        }
        if (j["swa"].contains("stride")) {
            swa.stride = detail::get_integer(j["swa"]["stride"], "swa.stride");
        }
        cfg.swa = swa;
    }
    if (cfg.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (cfg.eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
    if (cfg.eval_every > cfg.schedule.total_steps) {
        throw ConfigError("eval_every", "must be <= schedule.total_steps");
    }
    if (cfg.checkpoint_every < 1) throw ConfigError("checkpoint_every", "must be >= 1");
    if (cfg.swa && (cfg.swa->window < 1 || cfg.swa->stride < 1)) {
        throw ConfigError("swa", "window and stride must be >= 1");
    }
    return cfg;
}

inline json dump_config(const trainer::TrainerConfig& cfg) {
    json j;
    j["task"] = dump_task(cfg.task);
    j["schedule"] = dump_schedule(cfg.schedule);
    j["optimizer"] = dump_optimizer(cfg.optimizer, cfg.optimizer_kind);
    j["batch_size"] = cfg.batch_size;
    j["eval_every"] = cfg.eval_every;
    j["checkpoint_every"] = cfg.checkpoint_every;
    if (cfg.swa) {
        j["swa"] = json{{"window", cfg.swa->window}, {"stride", cfg.swa->stride}};
    }
    return j;
}

inline trainer::TrainerConfig load_config_file(const std::string& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("parse error in ") + path + ": " + e.what());
    }
    return load_config(j);
}

/// FNV-1a over the canonical (key-sorted) dump; stable under key reordering
/// in the source document.
inline std::uint64_t config_digest(const trainer::TrainerConfig& cfg) {
    const std::string canon = dump_config(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// ---- compute module documents ----

inline compute::ModelConfig parse_model(const json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::check_keys(j, path, {"d_model", "n_layers", "ffw_size", "key_size", "n_heads",
                                 "vocab_size", "seq_len", "swiglu", "param_count"});
    compute::ModelConfig m;
    auto geti = [&](const char* key, std::int64_t& out) {
        if (j.contains(key)) out = detail::get_integer(j[key], detail::join_path(path, key));
    };
    geti("d_model", m.d_model);
    geti("n_layers", m.n_layers);
    geti("ffw_size", m.ffw_size);
    geti("key_size", m.key_size);
    geti("n_heads", m.n_heads);
    geti("vocab_size", m.vocab_size);
    geti("seq_len", m.seq_len);
    geti("param_count", m.param_count);
    if (j.contains("swiglu")) {
        m.swiglu = detail::get_bool(j["swiglu"], detail::join_path(path, "swiglu"));
    }
    try {
        compute::check_model_config(m);
    } catch (const std::domain_error& e) {
        throw ConfigError(path, e.what());
    }
    return m;
}

/// Model file: one record per model, keyed by model name.
inline std::vector<std::pair<std::string, compute::ModelConfig>> load_models_file(
    const std::string& path) {
    json j;
    try {
        j = json::parse(csv::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("parse error in ") + path + ": " + e.what());
    }
    detail::require_object(j, "");
    std::vector<std::pair<std::string, compute::ModelConfig>> models;
    for (const auto& item : j.items()) {
        models.emplace_back(item.key(), parse_model(item.value(), item.key()));
    }
    if (models.empty()) throw ConfigError("", "model file contains no models");
    return models;
}

inline json dump_model(const compute::ModelConfig& m) {
    return json{{"d_model", m.d_model},       {"n_layers", m.n_layers},
                {"ffw_size", m.ffw_size},     {"key_size", m.key_size},
                {"n_heads", m.n_heads},       {"vocab_size", m.vocab_size},
                {"seq_len", m.seq_len},       {"swiglu", m.swiglu},
                {"param_count", m.param_count}};
}

inline const char* strategy_name(compute::Strategy s) {
    switch (s) {
    case compute::Strategy::CosinePerLength: return "cosine_per_length";
    case compute::Strategy::ConstantPlusCooldown: return "constant_plus_cooldown";
    case compute::Strategy::ConstantPlusSwa: return "constant_plus_swa";
    }
    return "?";
}

inline json dump_plan(const compute::SuitePlan& plan) {
    json j;
    j["strategy"] = strategy_name(plan.strategy);
    if (plan.strategy == compute::Strategy::ConstantPlusCooldown) {
        j["cooldown_fraction"] = plan.cooldown_fraction;
    }
    j["ratios"] = plan.ratios;
    j["total_flops"] = plan.total_flops;
    json models = json::object();
    for (const compute::ModelPlan& mp : plan.models) {
        json m;
        m["config"] = dump_model(mp.config);
        m["target_tokens"] = mp.target_tokens;
        m["token_cost"] = mp.token_cost;
        m["flops"] = mp.flops;
        models[mp.name] = m;
    }
    j["models"] = models;
    return j;
}

inline json dump_savings(const compute::SavingsReport& rep) {
    json j;
    j["baseline_flops"] = rep.baseline_flops;
    j["alternative_flops"] = rep.alternative_flops;
    j["ratio"] = rep.ratio;
    if (rep.baseline_gpu_hours) j["baseline_gpu_hours"] = *rep.baseline_gpu_hours;
    if (rep.alternative_gpu_hours) j["alternative_gpu_hours"] = *rep.alternative_gpu_hours;
    return j;
}

inline std::string plan_csv(const compute::SuitePlan& plan) {
    std::string out = "model,strategy,tokens,flops\n";
    for (const compute::ModelPlan& mp : plan.models) {
        out += mp.name;
        out += ',';
        out += strategy_name(plan.strategy);
        out += ',';
        out += csv::format_double(mp.token_cost);
        out += ',';
        out += csv::format_double(mp.flops);
        out += '\n';
    }
    return out;
}

inline json dump_fit_report(const lawfit::FitReport& rep) {
    json j;
    j["params"] = json{{"A", rep.params.A},
                       {"alpha", rep.params.alpha},
                       {"B", rep.params.B},
                       {"beta", rep.params.beta},
                       {"E", rep.params.E}};
    j["objective"] = rep.objective;
    j["residuals"] = rep.residuals;
    j["n_restarts_used"] = rep.n_restarts_used;
    j["degenerate_span"] = rep.degenerate_span;
    return j;
}

} // namespace cdlab::config
