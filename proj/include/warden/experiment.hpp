// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "warden/checkpoint.hpp"
#include "warden/config.hpp"
#include "warden/synthetic_task.hpp"
#include "warden/trainer.hpp"

namespace warden {

inline constexpr const char* kLogHeader =
    "step,lambda,agg_loss,utility_loss,p50,p90,max,weights_entropy";

/// One CSV row; an absent utility loss leaves its field empty.
inline void write_log_row(std::ostream& os, const ExperimentRecord& r) {
  using detail::format_g17;
  os << r.step << ',' << format_g17(r.lambda) << ',' << format_g17(r.agg_loss) << ',';
  if (r.utility_loss) os << format_g17(*r.utility_loss);
  os << ',' << format_g17(r.p50) << ',' << format_g17(r.p90) << ',' << format_g17(r.max) << ','
     << format_g17(r.weights_entropy) << '\n';
}

inline void write_log(std::ostream& os, const std::vector<ExperimentRecord>& records) {
  os << kLogHeader << '\n';
  for (const auto& r : records) write_log_row(os, r);
}

struct ExperimentOutcome {
  TrainResult result;
  Evaluation final_eval;
  double wall_seconds;
};

/// Generates the task from the config seed and trains on it.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const TrainHooks& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticTask task = make_heavy_tail_task(cfg.task, cfg.train.seed);
  TrainResult result = train(task.init, task.adversarial, task.utility, cfg.train, hooks);
  const ReferenceParams ref(task.init);
  const Evaluation ev = evaluate(result.params, ref, task.adversarial, task.utility, cfg.train);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(result), ev, wall};
}

/**
 * Runs one experiment and writes into out_dir:
 *   log.csv              one row per step
 *   checkpoint_<k>.ckpt  every checkpoint_every steps
 *   final_params.ckpt    final parameters
 *   summary.json         final metrics, final lambda, wall time
 * `log_name` overrides the log file name (the ablation driver uses it).
 */
inline ExperimentOutcome run_experiment_to_dir(const ExperimentConfig& cfg,
                                               const std::filesystem::path& out_dir,
                                               const std::string& log_name = "log.csv",
                                               bool write_artifacts = true) {
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / log_name);
  if (!log) throw std::runtime_error("cannot write '" + (out_dir / log_name).string() + "'");
  log << kLogHeader << '\n';

  TrainHooks hooks;
  hooks.on_record = [&](const ExperimentRecord& r) { write_log_row(log, r); };
  if (write_artifacts) {
    hooks.on_checkpoint = [&](std::size_t steps, const ToyModelParams& p) {
      if (steps == cfg.train.iterations) return;
      save_checkpoint((out_dir / ("checkpoint_" + std::to_string(steps) + ".ckpt")).string(), p);
    };
  }
  ExperimentOutcome outcome = run_experiment(cfg, hooks);
  log.close();

  if (write_artifacts) {
    save_checkpoint((out_dir / "final_params.ckpt").string(), outcome.result.params);
    const auto& last = outcome.result.records.back();
    nlohmann::json summary = {
        {"final_lambda", last.lambda},
        {"final_eval",
         {{"p50_adv_loss", outcome.final_eval.p50_adv_loss},
          {"p90_adv_loss", outcome.final_eval.p90_adv_loss},
          {"max_adv_loss", outcome.final_eval.max_adv_loss},
          {"mean_adv_loss", outcome.final_eval.mean_adv_loss},
          {"utility_loss", outcome.final_eval.utility_loss}}},
        {"final_batch_quantiles", {{"p50", last.p50}, {"p90", last.p90}, {"max", last.max}}},
        {"wall_time_seconds", outcome.wall_seconds},
        {"config", experiment_config_to_json(cfg)},
    };
    std::ofstream os(out_dir / "summary.json");
    os << summary.dump(2) << '\n';
  }
  return outcome;
}

}  // namespace warden
