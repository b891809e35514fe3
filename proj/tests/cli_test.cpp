// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run run_cli(const std::string& args) {
  const std::string cmd = std::string(WARDEN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("warden_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

constexpr const char* kTinyConfig = R"({
  "iterations": 6, "batch_size": 4, "checkpoint_every": 3,
  "task": {"num_adversarial": 20, "num_utility": 8}
})";

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("train --out /tmp/x").code, 1);
  const auto help = run_cli("ablate --help");
  EXPECT_NE(help.output.find("final_p90_adv_loss"), std::string::npos);
}

TEST(Cli, TrainWritesArtifacts) {
  const auto dir = fresh_dir("train");
  write(dir / "cfg.json", kTinyConfig);
  const auto r = run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                         (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "log.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint_3.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "final_params.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
}

TEST(Cli, MinimalConfigRerunsByteIdentically) {
  const auto dir = fresh_dir("minimal");
  write(dir / "cfg.json", R"({"iterations": 2, "batch_size": 2})");
  const std::string args = "train --config " + (dir / "cfg.json").string() + " --out ";
  ASSERT_EQ(run_cli(args + (dir / "a").string()).code, 0);
  ASSERT_EQ(run_cli(args + (dir / "b").string()).code, 0);
  for (const char* f : {"log.csv", "final_params.ckpt", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "a" / "log.csv"), slurp(dir / "b" / "log.csv"));
}

TEST(Cli, BadConfigIsUsageError) {
  const auto dir = fresh_dir("badcfg");
  write(dir / "cfg.json", R"({"dro": {"kappa": -1}})");
  const auto r = run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                         (dir / "out").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("kappa"), std::string::npos) << r.output;
  const auto missing = run_cli("train --config " + (dir / "none.json").string() + " --out " +
                               (dir / "out").string());
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.output.find("none.json"), std::string::npos);
}

TEST(Cli, AblateProducesOneLogAndRowPerRun) {
  const auto dir = fresh_dir("ablate");
  write(dir / "spec.json", std::string(R"({"parameter": "lambda_treatment",
    "values": ["fixed", "learnable", "optimized"], "seeds": [0, 1], "base_config": )") +
                               kTinyConfig + "}");
  const auto r = run_cli("ablate --spec " + (dir / "spec.json").string() + " --out " +
                         (dir / "out").string() + " --parallel 2");
  ASSERT_EQ(r.code, 0) << r.output;
  int logs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) {
    if (e.path().filename().string().rfind("log_", 0) == 0) ++logs;
  }
  EXPECT_EQ(logs, 6);
  const std::string summary = slurp(dir / "out" / "ablation_summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 7);
  EXPECT_EQ(summary.find("failed"), std::string::npos);
}

TEST(Cli, VerifyPassesAndCorruptionFails) {
  const auto ok = run_cli("verify --trials 2 --seed 1");
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("max duality gap"), std::string::npos);
  const auto bad = run_cli("verify --trials 2 --corrupt-derivative");
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.output.find("bisection"), std::string::npos);
  EXPECT_NE(bad.output.find("FAILED"), std::string::npos);
}

}  // namespace
