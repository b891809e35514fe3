// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// Parameter sweeps over the KL radius or the lambda treatment.
//
// Spec file (JSON):
//   {"parameter": "epsilon" | "lambda_treatment",
//    "values": [0.05, 0.1] | ["fixed", "learnable", "optimized"],
//    "seeds": [1, 2],
//    "base_config": { ...experiment config... }}
//
// Output: log_<value>_<seed>.csv per run and ablation_summary.csv with columns
//   parameter,value,seed,final_p90_adv_loss,final_mean_adv_loss,final_utility_loss,status
// sorted by (value, seed). Metrics are measured on the full task after
// training; a failed run has empty metrics and status "failed".

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "warden/config.hpp"
#include "warden/experiment.hpp"

namespace warden {

enum class AblationParameter { Epsilon, LambdaTreatment };

inline constexpr const char* kAblationSummaryHeader =
    "parameter,value,seed,final_p90_adv_loss,final_mean_adv_loss,final_utility_loss,status";

struct AblationSpec {
  AblationParameter parameter = AblationParameter::Epsilon;
  std::vector<double> epsilons;
  std::vector<LambdaMode> modes;
  std::vector<std::uint64_t> seeds;
  ExperimentConfig base_config;

  std::size_t num_values() const {
    return parameter == AblationParameter::Epsilon ? epsilons.size() : modes.size();
  }
};

inline std::string_view to_string(AblationParameter p) {
  return p == AblationParameter::Epsilon ? "epsilon" : "lambda_treatment";
}

inline AblationSpec ablation_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("ablation spec root must be an object");
  detail::reject_unknown(doc, {"parameter", "values", "seeds", "base_config"}, "");
  AblationSpec spec;
  const std::string param = doc.value("parameter", std::string{});
  if (param == "epsilon") {
    spec.parameter = AblationParameter::Epsilon;
  } else if (param == "lambda_treatment") {
    spec.parameter = AblationParameter::LambdaTreatment;
  } else {
    throw ConfigError("field 'parameter' must be 'epsilon' or 'lambda_treatment'");
  }
  if (!doc.contains("values") || !doc["values"].is_array() || doc["values"].empty()) {
    throw ConfigError("field 'values' must be a nonempty array");
  }
  for (const auto& v : doc["values"]) {
    if (spec.parameter == AblationParameter::Epsilon) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw ConfigError("field 'values' must hold positive numbers for epsilon");
      }
      spec.epsilons.push_back(v.get<double>());
    } else {
      if (!v.is_string()) throw ConfigError("field 'values' must hold lambda mode names");
      try {
        spec.modes.push_back(parse_lambda_mode(v.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("field 'values': ") + e.what());
      }
    }
  }
  if (!doc.contains("seeds") || !doc["seeds"].is_array() || doc["seeds"].empty()) {
    throw ConfigError("field 'seeds' must be a nonempty array");
  }
  for (const auto& s : doc["seeds"]) {
    if (!s.is_number_unsigned()) throw ConfigError("field 'seeds' must hold unsigned integers");
    spec.seeds.push_back(s.get<std::uint64_t>());
  }
  try {
    spec.base_config = experiment_config_from_json(doc.value("base_config", nlohmann::json::object()));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("base_config: ") + e.what());
  }
  return spec;
}

inline AblationSpec load_ablation_spec(const std::string& path) {
  const auto doc = parse_json_text(read_text_file(path), path);
  try {
    return ablation_spec_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct AblationRow {
  std::string value;
  double sort_key;
  std::uint64_t seed;
  std::optional<Evaluation> eval;
  std::string error;
};

namespace detail {

inline std::string format_short(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace detail

/// Runs every (value, seed) pair, `parallel` at a time, and writes the logs
/// and the summary. Returns the summary rows in output order.
inline std::vector<AblationRow> run_ablation(const AblationSpec& spec,
                                             const std::filesystem::path& out_dir,
                                             unsigned parallel = 1) {
  std::filesystem::create_directories(out_dir);
  struct Job {
    ExperimentConfig cfg;
    AblationRow row;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < spec.num_values(); ++v) {
    for (auto seed : spec.seeds) {
      Job job{spec.base_config, {}};
      job.cfg.train.seed = seed;
      if (spec.parameter == AblationParameter::Epsilon) {
        job.cfg.train.dro.epsilon = spec.epsilons[v];
        job.row.value = detail::format_short(spec.epsilons[v]);
        job.row.sort_key = spec.epsilons[v];
      } else {
        job.cfg.train.dro.lambda_mode = spec.modes[v];
        job.row.value = std::string(to_string(spec.modes[v]));
        job.row.sort_key = 0.0;
      }
      job.row.seed = seed;
      jobs.push_back(std::move(job));
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      Job& job = jobs[i];
      const std::string log_name =
          "log_" + job.row.value + "_" + std::to_string(job.row.seed) + ".csv";
      try {
        job.row.eval = run_experiment_to_dir(job.cfg, out_dir, log_name, false).final_eval;
      } catch (const std::exception& e) {
        job.row.error = e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<AblationRow> rows;
  for (auto& j : jobs) rows.push_back(std::move(j.row));
  std::sort(rows.begin(), rows.end(), [&](const AblationRow& a, const AblationRow& b) {
    if (spec.parameter == AblationParameter::Epsilon) {
      if (a.sort_key != b.sort_key) return a.sort_key < b.sort_key;
    } else if (a.value != b.value) {
      return a.value < b.value;
    }
    return a.seed < b.seed;
  });

  std::ofstream os(out_dir / "ablation_summary.csv");
  os << kAblationSummaryHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(spec.parameter) << ',' << r.value << ',' << r.seed << ',';
    if (r.eval) {
      os << detail::format_g17(r.eval->p90_adv_loss) << ','
         << detail::format_g17(r.eval->mean_adv_loss) << ','
         << detail::format_g17(r.eval->utility_loss) << ",ok\n";
    } else {
      os << ",,,failed\n";
    }
  }
  return rows;
}

}  // namespace warden
