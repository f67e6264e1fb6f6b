// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdlab/checkpoint_io.hpp"
#include "cdlab/compute.hpp"
#include "cdlab/config.hpp"
#include "cdlab/csv.hpp"
#include "cdlab/errors.hpp"
#include "cdlab/lawfit.hpp"
#include "cdlab/manifest.hpp"
#include "cdlab/schedule.hpp"
#include "cdlab/trainer.hpp"

namespace cdlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success, 2 usage error, 3 invalid configuration or refused
// operation, 4 corrupt checkpoint, 5 divergence, 1 anything else.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitCheckpoint = 4;
inline constexpr int kExitDivergence = 5;

namespace detail {

inline std::string default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CDLAB_OUT_DIR"); env && *env) return env;
    return "runs";
}

inline json parse_json_file(const std::string& path) {
    try {
        return json::parse(csv::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("", "parse error in " + path + ": " + e.what());
    }
}

inline schedule::CooldownShape shape_from_flags(const std::string& name, double power) {
    return config::shape_from_name(name, power, "shape");
}

inline compute::Strategy strategy_from_name(const std::string& name) {
    if (name == "cosine") return compute::Strategy::CosinePerLength;
    if (name == "cooldown") return compute::Strategy::ConstantPlusCooldown;
    if (name == "swa") return compute::Strategy::ConstantPlusSwa;
    throw ConfigError("strategy", "unknown strategy '" + name + "' (cosine|cooldown|swa)");
}

/// Creates the run directory, refusing to reuse an existing run_id unless
/// forced. Returns the directory path.
inline fs::path prepare_run_dir(const std::string& out_dir, const std::string& run_id,
                                bool force) {
    const fs::path dir = fs::path(out_dir) / run_id;
    const fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        if (!force) {
            const manifest::RunManifest existing = manifest::load_file(manifest_path.string());
            throw ConfigError("run_id", "run '" + run_id + "' already exists in " + out_dir +
                                            " with status '" + existing.status +
                                            "' (use --force to overwrite)");
        }
        fs::remove_all(dir);
    }
    fs::create_directories(dir / "checkpoints");
    return dir;
}

inline void write_run_outputs(const fs::path& dir, const trainer::TrainResult& result) {
    {
        std::ostringstream ss;
        csv::write_metrics_csv(ss, result.record);
        csv::write_file((dir / "metrics.csv").string(), ss.str());
    }
    for (const trainer::Checkpoint& ck : result.checkpoints) {
        const std::string name = (ck.kind == "swa_window" ? "swa_window_" : "step_") +
                                 std::to_string(ck.step) + ".cdlb";
        checkpoint_io::save_file((dir / "checkpoints" / name).string(), ck);
    }
}

/// Executes one configured run into out_dir/run_id. Returns the exit code.
inline int execute_run(const trainer::TrainerConfig& cfg, const std::string& out_dir,
                       const std::string& run_id, bool force, std::ostream& log) {
    const fs::path dir = prepare_run_dir(out_dir, run_id, force);
    manifest::RunManifest man;
    man.run_id = run_id;
    man.config_digest = config::config_digest(cfg);
    man.created = manifest::utc_now_iso8601();
    man.status = "running";
    manifest::save_file((dir / "manifest.json").string(), man);
    csv::write_file((dir / "config.json").string(), config::dump_config(cfg).dump(2) + "\n");
    try {
        const trainer::TrainResult result = trainer::train(cfg);
        write_run_outputs(dir, result);
        man.status = "complete";
        manifest::save_file((dir / "manifest.json").string(), man);
        const auto& s = result.record.summary;
        log << run_id << ": " << s.total_steps << " steps, final eval loss " << s.final_eval_loss
            << " (" << s.wall_seconds << " s)\n";
        return kExitOk;
    } catch (const DivergenceError& e) {
        man.status = "diverged";
        manifest::save_file((dir / "manifest.json").string(), man);
        log << run_id << ": diverged: " << e.what() << "\n";
        return kExitDivergence;
    }
}

struct SweepRun {
    std::string run_id;
    trainer::TrainerConfig config;
};

/// Expands a sweep document {"base": {...}, "sweep": {"dotted.key": [...]}}
/// into concrete runs. Axes iterate in sorted key order, last axis fastest;
/// unless "task.seed" is itself swept, each run's seed derives from the base
/// seed and the run index.
inline std::vector<SweepRun> expand_sweep(const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "sweep document must be an object");
    for (const auto& item : doc.items()) {
        if (item.key() != "base" && item.key() != "sweep" && item.key() != "run_id_prefix") {
            throw ConfigError(item.key(), "unknown key");
        }
    }
    const json base = doc.contains("base") ? doc.at("base") : json::object();
    std::string prefix = "run";
    if (doc.contains("run_id_prefix")) {
        prefix = config::detail::get_string(doc.at("run_id_prefix"), "run_id_prefix");
    }
    std::vector<std::pair<std::string, json>> axes;
    if (doc.contains("sweep")) {
        if (!doc.at("sweep").is_object()) throw ConfigError("sweep", "expected an object");
        for (const auto& item : doc.at("sweep").items()) {
            if (!item.value().is_array() || item.value().empty()) {
                throw ConfigError("sweep." + item.key(), "expected a non-empty array");
            }
            axes.emplace_back(item.key(), item.value());
        }
        std::sort(axes.begin(), axes.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    bool sweeps_seed = false;
    std::size_t total = 1;
    for (const auto& [key, values] : axes) {
        if (key == "task.seed") sweeps_seed = true;
        total *= values.size();
    }

    auto set_path = [](json& root, const std::string& dotted, const json& value) {
        json* node = &root;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = dotted.find('.', start);
            const std::string key = dotted.substr(start, pos - start);
            if (key.empty()) throw ConfigError(dotted, "empty path segment");
            if (pos == std::string::npos) {
                (*node)[key] = value;
                return;
            }
            node = &(*node)[key];
            if (!node->is_object() && !node->is_null()) {
                throw ConfigError(dotted, "path collides with a non-object value");
            }
            start = pos + 1;
        }
    };

    std::vector<SweepRun> runs;
    runs.reserve(total);
    const std::uint64_t base_seed =
        base.contains("task") && base.at("task").contains("seed")
            ? config::detail::get_u64(base.at("task").at("seed"), "task.seed")
            : tasks::TaskSpec{}.seed;
    for (std::size_t index = 0; index < total; ++index) {
        json combined = base;
        std::size_t rem = index;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& [key, values] = axes[a];
            set_path(combined, key, values[rem % values.size()]);
            rem /= values.size();
        }
        if (!sweeps_seed) {
            set_path(combined, "task.seed", json(derive_seed(base_seed, index)));
        }
        SweepRun run;
        run.run_id = prefix + "-" + std::to_string(index);
        try {
            run.config = config::load_config(combined);
        } catch (const ConfigError& e) {
            throw ConfigError("run " + std::to_string(index) + ": " + e.key_path(), e.what());
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

} // namespace detail

/// Entry point shared by the binary and the tests. `args` excludes argv[0].
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    CLI::App app{"constant-LR + cooldown training toolkit"};
    app.require_subcommand(1);

    // schedule
    auto* sched_cmd = app.add_subcommand("schedule", "dump a learning-rate table as CSV");
    std::string sched_config;
    std::int64_t sched_stride = 1;
    std::string sched_out;
    sched_cmd->add_option("--config", sched_config, "schedule spec JSON file")->required();
    sched_cmd->add_option("--stride", sched_stride, "step stride between rows");
    sched_cmd->add_option("--out", sched_out, "output CSV path (default: stdout)");

    // flops
    auto* flops_cmd = app.add_subcommand("flops", "per-model FLOPs report");
    std::string flops_models, flops_out;
    flops_cmd->add_option("--models", flops_models, "model configs JSON file")->required();
    flops_cmd->add_option("--out", flops_out, "output JSON path");

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "suite plan and savings vs cosine");
    std::string plan_models, plan_strategy = "cooldown", plan_out, plan_csv_path;
    std::vector<double> plan_ratios;
    double plan_fraction = 0.2, plan_throughput = 0.0, plan_util = 1.0;
    plan_cmd->add_option("--models", plan_models, "model configs JSON file")->required();
    plan_cmd->add_option("--ratios", plan_ratios, "tokens-per-parameter ratios")
        ->required()
        ->delimiter(',');
    plan_cmd->add_option("--strategy", plan_strategy, "cosine|cooldown|swa");
    plan_cmd->add_option("--cooldown-fraction", plan_fraction, "cooldown fraction in (0,1)");
    plan_cmd->add_option("--throughput", plan_throughput, "FLOPs/s for GPU-hour estimates");
    plan_cmd->add_option("--utilization", plan_util, "throughput utilization in (0,1]");
    plan_cmd->add_option("--out", plan_out, "output JSON path");
    plan_cmd->add_option("--csv", plan_csv_path, "output CSV path");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit the scaling law to observations");
    std::string fit_data, fit_out;
    lawfit::FitOptions fit_options;
    fit_cmd->add_option("--data", fit_data, "CSV with header n_params,tokens,loss")->required();
    fit_cmd->add_option("--restarts", fit_options.n_restarts, "grid starts to refine");
    fit_cmd->add_option("--huber", fit_options.huber_delta, "Huber delta on log-loss");
    fit_cmd->add_option("--max-iters", fit_options.max_iters, "refinement iterations");
    fit_cmd->add_option("--tol", fit_options.tolerance, "gradient tolerance");
    fit_cmd->add_option("--out", fit_out, "output JSON path");

    // train
    auto* train_cmd = app.add_subcommand("train", "execute one training run");
    std::string train_config, train_out_dir, train_run_id;
    bool train_force = false;
    train_cmd->add_option("--config", train_config, "run config JSON file")->required();
    train_cmd->add_option("--out-dir", train_out_dir, "output directory (env CDLAB_OUT_DIR)");
    train_cmd->add_option("--run-id", train_run_id, "run identifier");
    train_cmd->add_flag("--force", train_force, "overwrite an existing run directory");

    // cooldown
    auto* cool_cmd = app.add_subcommand("cooldown", "branch a cooldown off a trunk checkpoint");
    std::string cool_ckpt, cool_shape = "1-sqrt", cool_out_dir, cool_run_id;
    double cool_power = 0.5;
    std::int64_t cool_steps = 0;
    bool cool_force = false;
    cool_cmd->add_option("--checkpoint", cool_ckpt, "trunk checkpoint file")->required();
    cool_cmd->add_option("--decay-steps", cool_steps, "cooldown length in steps")->required();
    cool_cmd->add_option("--shape", cool_shape,
                         "linear|1-sqrt|cosine|mirror-cosine|1-square|power");
    cool_cmd->add_option("--shape-power", cool_power, "exponent for --shape power");
    cool_cmd->add_option("--out-dir", cool_out_dir, "output directory (env CDLAB_OUT_DIR)");
    cool_cmd->add_option("--run-id", cool_run_id, "run identifier");
    cool_cmd->add_flag("--force", cool_force, "overwrite an existing run directory");

    // swa
    auto* swa_cmd = app.add_subcommand("swa", "average the last j window checkpoints");
    std::vector<std::string> swa_ckpts;
    std::int64_t swa_last = 1;
    std::string swa_out;
    swa_cmd->add_option("--checkpoints", swa_ckpts, "window checkpoints, oldest first")
        ->required()
        ->expected(-1);
    swa_cmd->add_option("--last", swa_last, "how many trailing checkpoints to average");
    swa_cmd->add_option("--out", swa_out, "output checkpoint path")->required();

    // interp
    auto* interp_cmd = app.add_subcommand("interp", "loss along the line between checkpoints");
    std::string interp_a, interp_b, interp_out;
    std::int64_t interp_points = 11;
    interp_cmd->add_option("--checkpoint-a", interp_a, "first checkpoint")->required();
    interp_cmd->add_option("--checkpoint-b", interp_b, "second checkpoint")->required();
    interp_cmd->add_option("--points", interp_points, "number of blend points (>= 2)");
    interp_cmd->add_option("--out", interp_out, "output CSV path (default: stdout)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid of runs from one config");
    std::string sweep_config, sweep_out_dir;
    int sweep_jobs = 1;
    bool sweep_force = false;
    sweep_cmd->add_option("--config", sweep_config, "sweep JSON file")->required();
    sweep_cmd->add_option("--out-dir", sweep_out_dir, "output directory (env CDLAB_OUT_DIR)");
    sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent runs");
    sweep_cmd->add_flag("--force", sweep_force, "overwrite existing run directories");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (sched_cmd->parsed()) {
            json doc = detail::parse_json_file(sched_config);
            // Accept either a bare schedule spec or a full run config.
            if (doc.is_object() && doc.contains("schedule")) doc = doc.at("schedule");
            const schedule::ScheduleSpec spec = config::parse_schedule(doc, "schedule");
            const auto table = schedule::schedule_table(spec, sched_stride);
            if (sched_out.empty()) {
                csv::write_schedule_csv(out, table);
            } else {
                std::ostringstream ss;
                csv::write_schedule_csv(ss, table);
                csv::write_file(sched_out, ss.str());
                out << "wrote " << table.size() << " rows to " << sched_out << "\n";
            }
            return kExitOk;
        }

        if (flops_cmd->parsed()) {
            const auto models = config::load_models_file(flops_models);
            json report = json::object();
            for (const auto& [name, cfg] : models) {
                const compute::FlopsBreakdown b = compute::flops_per_sequence(cfg);
                json m;
                m["embedding"] = b.embedding;
                m["attention_per_layer"] = b.attention;
                m["dense_per_layer"] = b.dense;
                m["final_logits"] = b.final_logits;
                m["single_forward"] = b.single_forward;
                m["total_per_sequence"] = b.total;
                m["per_token"] = static_cast<double>(b.total) / static_cast<double>(cfg.seq_len);
                m["param_count_from_dims"] = compute::param_count_from_dims(cfg);
                report[name] = m;
                out << name << ": " << b.total << " FLOPs/sequence ("
                    << m["per_token"].get<double>() << " per token)\n";
            }
            if (!flops_out.empty()) csv::write_file(flops_out, report.dump(2) + "\n");
            return kExitOk;
        }

        if (plan_cmd->parsed()) {
            const auto named = config::load_models_file(plan_models);
            std::vector<compute::ModelConfig> models;
            std::vector<std::string> names;
            for (const auto& [name, cfg] : named) {
                names.push_back(name);
                models.push_back(cfg);
            }
            const compute::Strategy strategy = detail::strategy_from_name(plan_strategy);
            const auto baseline = compute::plan_suite(
                models, plan_ratios, compute::Strategy::CosinePerLength, plan_fraction, names);
            const auto alternative =
                compute::plan_suite(models, plan_ratios, strategy, plan_fraction, names);
            std::optional<compute::ThroughputModel> throughput;
            if (plan_throughput > 0.0) {
                throughput = compute::ThroughputModel{plan_throughput, plan_util};
            }
            const auto report = compute::savings(baseline, alternative, throughput);
            json doc;
            doc["baseline"] = config::dump_plan(baseline);
            doc["alternative"] = config::dump_plan(alternative);
            doc["savings"] = config::dump_savings(report);
            out << "baseline " << report.baseline_flops << " FLOPs, alternative "
                << report.alternative_flops << " FLOPs, ratio " << report.ratio << "\n";
            if (!plan_out.empty()) csv::write_file(plan_out, doc.dump(2) + "\n");
            if (!plan_csv_path.empty()) {
                csv::write_file(plan_csv_path,
                                config::plan_csv(baseline) + config::plan_csv(alternative));
            }
            return kExitOk;
        }

        if (fit_cmd->parsed()) {
            std::ifstream in(fit_data);
            if (!in) throw ConfigError("data", "cannot open " + fit_data);
            const auto points = csv::read_datapoints_csv(in);
            const lawfit::FitReport report = lawfit::fit(points, fit_options);
            out << "A=" << report.params.A << " alpha=" << report.params.alpha
                << " B=" << report.params.B << " beta=" << report.params.beta
                << " E=" << report.params.E << " objective=" << report.objective << "\n";
            if (report.degenerate_span) {
                err << "warning: observations span fewer than 2 distinct N or D values\n";
            }
            if (!fit_out.empty()) {
                csv::write_file(fit_out, config::dump_fit_report(report).dump(2) + "\n");
            }
            return kExitOk;
        }

        if (train_cmd->parsed()) {
            const trainer::TrainerConfig cfg = config::load_config_file(train_config);
            const std::string out_dir = detail::default_out_dir(train_out_dir);
            std::string run_id = train_run_id;
            if (run_id.empty()) {
                run_id = "run-" + manifest::digest_hex(config::config_digest(cfg)).substr(2, 8);
            }
            return detail::execute_run(cfg, out_dir, run_id, train_force, out);
        }

        if (cool_cmd->parsed()) {
            const trainer::Checkpoint ckpt = checkpoint_io::load_file(cool_ckpt);
            const schedule::CooldownShape shape = detail::shape_from_flags(cool_shape, cool_power);
            const std::string out_dir = detail::default_out_dir(cool_out_dir);
            std::string run_id = cool_run_id;
            if (run_id.empty()) {
                run_id = "cooldown-" + std::to_string(ckpt.step) + "-" +
                         std::to_string(cool_steps);
            }
            manifest::RunManifest man;
            man.run_id = run_id;
            man.config_digest = config::config_digest(ckpt.config);
            man.created = manifest::utc_now_iso8601();
            // Run before touching the output directory so precondition
            // failures leave no half-written run behind.
            try {
                const trainer::TrainResult result =
                    trainer::resume_with_cooldown(ckpt, cool_steps, shape);
                const fs::path dir = detail::prepare_run_dir(out_dir, run_id, cool_force);
                man.status = "complete";
                manifest::save_file((dir / "manifest.json").string(), man);
                detail::write_run_outputs(dir, result);
                out << run_id << ": final eval loss "
                    << result.record.summary.final_eval_loss << "\n";
                return kExitOk;
            } catch (const DivergenceError& e) {
                const fs::path dir = detail::prepare_run_dir(out_dir, run_id, cool_force);
                man.status = "diverged";
                manifest::save_file((dir / "manifest.json").string(), man);
                err << "diverged: " << e.what() << "\n";
                return kExitDivergence;
            }
        }

        if (swa_cmd->parsed()) {
            std::vector<trainer::Checkpoint> ckpts;
            for (const std::string& path : swa_ckpts) {
                ckpts.push_back(checkpoint_io::load_file(path));
            }
            std::vector<std::vector<double>> means;
            for (const auto& ck : ckpts) means.push_back(ck.params);
            const std::vector<double> avg = averaging::lawa_average(means, swa_last);
            trainer::Checkpoint result = ckpts.back();
            result.params = avg;
            result.kind = "swa_window";
            result.opt_state = optim::OptimizerState(avg.size());
            result.swa.reset();
            checkpoint_io::save_file(swa_out, result);
            out << "averaged last " << swa_last << " of " << ckpts.size()
                << " checkpoints into " << swa_out << "\n";
            return kExitOk;
        }

        if (interp_cmd->parsed()) {
            const trainer::Checkpoint a = checkpoint_io::load_file(interp_a);
            const trainer::Checkpoint b = checkpoint_io::load_file(interp_b);
            const auto probe = trainer::interpolation_probe(a, b, interp_points);
            if (interp_out.empty()) {
                csv::write_interp_csv(out, probe);
            } else {
                std::ostringstream ss;
                csv::write_interp_csv(ss, probe);
                csv::write_file(interp_out, ss.str());
                out << "wrote " << probe.size() << " points to " << interp_out << "\n";
            }
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            const json doc = detail::parse_json_file(sweep_config);
            const auto runs = detail::expand_sweep(doc);
            const std::string out_dir = detail::default_out_dir(sweep_out_dir);
            if (sweep_jobs < 1) throw ConfigError("jobs", "must be >= 1");
            std::atomic<std::size_t> next{0};
            std::atomic<int> worst{kExitOk};
            std::mutex log_mutex;
            auto worker = [&]() {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= runs.size()) break;
                    std::ostringstream log;
                    int code = kExitOk;
                    try {
                        code = detail::execute_run(runs[i].config, out_dir, runs[i].run_id,
                                                   sweep_force, log);
                    } catch (const std::exception& e) {
                        log << runs[i].run_id << ": failed: " << e.what() << "\n";
                        code = kExitConfig;
                    }
                    std::lock_guard<std::mutex> lock(log_mutex);
                    out << log.str();
                    int cur = worst.load();
                    while (code > cur && !worst.compare_exchange_weak(cur, code)) {
                    }
                }
            };
            std::vector<std::thread> threads;
            const int n_threads = std::min<int>(sweep_jobs, static_cast<int>(runs.size()));
            threads.reserve(static_cast<std::size_t>(n_threads));
            for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
            out << runs.size() << " runs complete\n";
            return worst.load();
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

} // namespace cdlab::cli
