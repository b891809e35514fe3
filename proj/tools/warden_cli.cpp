// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// warden: train, ablate and verify from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "warden/ablation.hpp"
#include "warden/config.hpp"
#include "warden/experiment.hpp"
#include "warden/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = warden::load_experiment_config(config_path);
  const auto outcome = warden::run_experiment_to_dir(cfg, out_dir);
  const auto& ev = outcome.final_eval;
  std::cout << "trained " << cfg.train.iterations << " steps in " << outcome.wall_seconds
            << " s; final p90 adversarial loss " << ev.p90_adv_loss << ", utility loss "
            << ev.utility_loss << ", lambda " << outcome.result.records.back().lambda << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& spec_path, const std::string& out_dir, unsigned parallel) {
  const auto spec = warden::load_ablation_spec(spec_path);
  const auto rows = warden::run_ablation(spec, out_dir, parallel);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.eval) {
      ++failed;
      std::cerr << "run value=" << r.value << " seed=" << r.seed << " failed: " << r.error << "\n";
    }
  }
  std::cout << rows.size() << " runs, " << failed << " failed; summary in "
            << (std::filesystem::path(out_dir) / "ablation_summary.csv").string() << "\n";
  return failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_verify(std::size_t trials, std::uint64_t seed, bool corrupt) {
  warden::VerifyOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  opt.corrupt_derivative = corrupt;
  const auto results = warden::run_verification(opt);
  warden::print_verification_table(std::cout, results);
  double gap = 0.0;
  bool ok = true;
  for (const auto& r : results) {
    if (r.name.rfind("duality_gap", 0) == 0) gap = std::max(gap, r.worst);
    if (!r.passed) {
      ok = false;
      std::cerr << "FAILED check '" << r.name << "' on instance seed " << r.failing_seed << "\n";
    }
  }
  std::cout << "max duality gap: " << gap << " (tolerance " << warden::kDualityGapTolerance << ")\n";
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust adversarial training on a toy preference model"};
  app.require_subcommand(1);

  std::string config_path, out_dir, spec_path;
  std::size_t trials = 50;
  std::uint64_t seed = 0;
  unsigned parallel = 1;
  bool corrupt = false;

  auto* train = app.add_subcommand("train", "Train one model; writes log.csv, final_params.ckpt, summary.json");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* ablate = app.add_subcommand(
      "ablate",
      "Sweep epsilon or the lambda treatment over seeds.\n"
      "Writes log_<value>_<seed>.csv per run and ablation_summary.csv with columns\n"
      "  parameter,value,seed,final_p90_adv_loss,final_mean_adv_loss,final_utility_loss,status\n"
      "sorted by (value, seed). Metrics are measured on the full task after training;\n"
      "status is 'ok' or 'failed' (failed rows have empty metrics).");
  ablate->add_option("--spec", spec_path, "Ablation spec (JSON)")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--parallel", parallel, "Runs executed concurrently")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the oracle suite and print a pass/fail table");
  verify->add_option("--trials", trials, "Random instances per duality check")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Base seed for instance generation");
  verify->add_flag("--corrupt-derivative", corrupt, "Test hook: perturb the lambda derivative")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(config_path, out_dir);
    if (*ablate) return cmd_ablate(spec_path, out_dir, parallel);
    if (*verify) return cmd_verify(trials, seed, corrupt);
  } catch (const warden::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
