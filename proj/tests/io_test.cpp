// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "warden/ablation.hpp"
#include "warden/checkpoint.hpp"
#include "warden/config.hpp"
#include "warden/experiment.hpp"

namespace warden {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("warden_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    experiment_config_from_json(parse_json_text(text, "cfg"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = experiment_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.train.iterations, 500u);
  EXPECT_EQ(c.train.dro.lambda_mode, LambdaMode::Optimized);
  EXPECT_EQ(c.task.vocab_size, 16u);
  EXPECT_TRUE(c.train.use_utility);
  const auto capo = experiment_config_from_json(nlohmann::json{{"loss_kind", "capo"}});
  EXPECT_FALSE(capo.train.use_utility);
  const auto forced =
      experiment_config_from_json(nlohmann::json{{"loss_kind", "capo"}, {"use_utility", true}});
  EXPECT_TRUE(forced.train.use_utility);
}

TEST(Config, RoundTripsThroughJson) {
  auto c = experiment_config_from_json(nlohmann::json::object());
  c.train.iterations = 7;
  c.train.loss_kind = BaseMethod::Capo;
  c.train.dro.epsilon = 0.37;
  c.train.dro.lambda_mode = LambdaMode::Learnable;
  c.task.margin = 2.5;
  const auto back = experiment_config_from_json(experiment_config_to_json(c));
  EXPECT_EQ(experiment_config_to_json(back), experiment_config_to_json(c));
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error(R"({"dro": {"kappa": "x"}})").find("dro.kappa"), std::string::npos);
  EXPECT_NE(config_error(R"({"dro": {"kappa": -1}})").find("kappa"), std::string::npos);
  EXPECT_NE(config_error(R"({"attack": {"radius": 1}})").find("attack.radius"), std::string::npos);
  EXPECT_NE(config_error(R"({"dro": {"lambda_mode": "auto"}})").find("lambda_mode"),
            std::string::npos);
  EXPECT_NE(config_error("{\n  \"iterations\": ,\n}").find("line 2"), std::string::npos);
  EXPECT_THROW(load_experiment_config("/nonexistent/cfg.json"), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto p = ToyModelParams::random(5, 3, 11, 0.9);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const auto q = read_checkpoint(ss);
  EXPECT_EQ(p.embed, q.embed);
  EXPECT_EQ(p.out, q.out);
}

TEST(Checkpoint, RejectsMalformed) {
  std::stringstream bad(R"({"format":"other","version":1})");
  EXPECT_ANY_THROW(read_checkpoint(bad));
  std::stringstream wrong_size(
      R"({"format":"warden-toy-model","version":1,"vocab_size":2,"embed_dim":1,"embed":[1],"out":[1,2]})");
  EXPECT_ANY_THROW(read_checkpoint(wrong_size));
}

TEST(Log, RowFormat) {
  std::ostringstream os;
  write_log(os, {{0, 0.5, 1.25, std::nullopt, 1.0, 2.0, 3.0, 0.1},
                 {1, 0.0, -1.0, 0.75, 1.0, 2.0, 3.0, 0.0}});
  EXPECT_EQ(os.str(),
            "step,lambda,agg_loss,utility_loss,p50,p90,max,weights_entropy\n"
            "0,0.5,1.25,,1,2,3,0.10000000000000001\n"
            "1,0,-1,0.75,1,2,3,0\n");
}

ExperimentConfig tiny_experiment() {
  auto c = experiment_config_from_json(nlohmann::json::object());
  c.train.iterations = 6;
  c.train.batch_size = 4;
  c.train.checkpoint_every = 2;
  c.task.num_adversarial = 20;
  c.task.num_utility = 8;
  return c;
}

TEST(Experiment, WritesArtifacts) {
  const auto dir = fresh_dir("experiment");
  const auto outcome = run_experiment_to_dir(tiny_experiment(), dir);
  EXPECT_TRUE(fs::exists(dir / "log.csv"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_2.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_4.ckpt"));
  EXPECT_FALSE(fs::exists(dir / "checkpoint_6.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "final_params.ckpt"));
  const auto final = load_checkpoint((dir / "final_params.ckpt").string());
  EXPECT_EQ(final.embed, outcome.result.params.embed);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["final_lambda"].get<double>(), outcome.result.records.back().lambda);
  EXPECT_TRUE(summary.contains("wall_time_seconds"));
  const std::string log = slurp(dir / "log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 7);
}

TEST(Experiment, LogsAreByteIdentical) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  run_experiment_to_dir(tiny_experiment(), a);
  run_experiment_to_dir(tiny_experiment(), b);
  EXPECT_EQ(slurp(a / "log.csv"), slurp(b / "log.csv"));
  EXPECT_EQ(slurp(a / "final_params.ckpt"), slurp(b / "final_params.ckpt"));
}

TEST(Ablation, SpecParsing) {
  const auto spec = ablation_spec_from_json(nlohmann::json::parse(
      R"({"parameter":"lambda_treatment","values":["fixed","optimized"],"seeds":[1]})"));
  EXPECT_EQ(spec.num_values(), 2u);
  EXPECT_THROW(ablation_spec_from_json(nlohmann::json::parse(
                   R"({"parameter":"kappa","values":[1],"seeds":[1]})")),
               ConfigError);
  EXPECT_THROW(ablation_spec_from_json(nlohmann::json::parse(
                   R"({"parameter":"epsilon","values":[-1],"seeds":[1]})")),
               ConfigError);
  EXPECT_THROW(ablation_spec_from_json(nlohmann::json::parse(
                   R"({"parameter":"epsilon","values":[0.1],"seeds":[]})")),
               ConfigError);
}

TEST(Ablation, ParallelMatchesSerialAndIsSorted) {
  AblationSpec spec;
  spec.parameter = AblationParameter::Epsilon;
  spec.epsilons = {0.5, 0.05};
  spec.seeds = {3, 1};
  spec.base_config = tiny_experiment();
  const auto serial = fresh_dir("abl_serial"), par = fresh_dir("abl_par");
  const auto rows = run_ablation(spec, serial, 1);
  run_ablation(spec, par, 3);
  const std::string summary = slurp(serial / "ablation_summary.csv");
  EXPECT_EQ(summary, slurp(par / "ablation_summary.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].value, "0.05");
  EXPECT_EQ(rows[0].seed, 1u);
  EXPECT_EQ(rows[3].value, "0.5");
  EXPECT_EQ(rows[3].seed, 3u);
  EXPECT_EQ(summary.rfind(kAblationSummaryHeader, 0), 0u);
  for (const auto& r : rows) {
    const auto log = "log_" + r.value + "_" + std::to_string(r.seed) + ".csv";
    EXPECT_TRUE(fs::exists(serial / log)) << log;
    EXPECT_EQ(slurp(serial / log), slurp(par / log));
  }
}

TEST(Ablation, FailedRunIsReported) {
  AblationSpec spec;
  spec.parameter = AblationParameter::LambdaTreatment;
  spec.modes = {LambdaMode::Fixed};
  spec.seeds = {0};
  spec.base_config = tiny_experiment();
  spec.base_config.train.dro.lambda_init = 2e3;  // outside the default bounds
  const auto dir = fresh_dir("abl_fail");
  const auto rows = run_ablation(spec, dir, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].eval.has_value());
  EXPECT_NE(slurp(dir / "ablation_summary.csv").find("fixed,0,,,,failed"), std::string::npos);
}

}  // namespace
}  // namespace warden
