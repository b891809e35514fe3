// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// JSON experiment configuration. Keys mirror the TrainConfig field names;
// DRO, attack and task settings sit in nested sections:
//
//   {
//     "iterations": 500, "batch_size": 16, "loss_kind": "cat",
//     "use_utility": true, "utility_weight": 1.0, "model_lr": 0.05,
//     "beta": 0.25, "seed": 1, "aggregation": "dro", "checkpoint_every": 100,
//     "dro":    {"epsilon": 0.1, "kappa": 0.1, "lambda_mode": "optimized",
//                "lambda_init": 5, "lambda_lr": 0.01, "lambda_min": 0,
//                "lambda_max": 1000, "solver_tol": 1e-8},
//     "attack": {"budget": 0.5, "steps": 10, "step_size": 0.05},
//     "task":   {"vocab_size": 16, "embed_dim": 8, "num_adversarial": 200,
//                "num_utility": 64, "hard_fraction": 0.1, "margin": 3.0,
//                "init_scale": 0.1}
//   }
//
// Every key is optional; omitted keys keep their defaults. Unknown keys are
// rejected.

#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "warden/synthetic_task.hpp"
#include "warden/trainer.hpp"

namespace warden {

struct ExperimentConfig {
  TrainConfig train;
  TaskConfig task;
};

/// Parse or validation failure; the message names the line or field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& known,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("unknown field '" + where + it.key() + "'");
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& target, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + where + key + "' has the wrong type");
  }
}

inline const json& section(const json& obj, const char* key, const std::string& where) {
  static const json empty = json::object();
  auto it = obj.find(key);
  if (it == obj.end()) return empty;
  if (!it->is_object()) throw ConfigError("field '" + where + key + "' must be an object");
  return *it;
}

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& doc) {
  using detail::read_field;
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  detail::reject_unknown(doc,
                         {"iterations", "batch_size", "loss_kind", "use_utility", "utility_weight",
                          "model_lr", "beta", "seed", "aggregation", "checkpoint_every", "dro",
                          "attack", "task"},
                         "");
  ExperimentConfig c;
  TrainConfig& t = c.train;
  read_field(doc, "iterations", t.iterations, "");
  read_field(doc, "batch_size", t.batch_size, "");
  read_field(doc, "use_utility", t.use_utility, "");
  read_field(doc, "utility_weight", t.utility_weight, "");
  read_field(doc, "model_lr", t.model_lr, "");
  read_field(doc, "beta", t.beta, "");
  read_field(doc, "seed", t.seed, "");
  read_field(doc, "checkpoint_every", t.checkpoint_every, "");
  try {
    std::string s;
    read_field(doc, "loss_kind", s, "");
    if (!s.empty()) t.loss_kind = parse_base_method(s);
    s.clear();
    read_field(doc, "aggregation", s, "");
    if (!s.empty()) t.aggregation = parse_aggregation(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  // CAPO trains without a utility set unless asked to.
  if (!doc.contains("use_utility")) t.use_utility = t.loss_kind == BaseMethod::Cat;

  const auto& dro = detail::section(doc, "dro", "");
  detail::reject_unknown(dro,
                         {"epsilon", "kappa", "lambda_mode", "lambda_init", "lambda_lr",
                          "lambda_min", "lambda_max", "solver_tol"},
                         "dro.");
  read_field(dro, "epsilon", t.dro.epsilon, "dro.");
  read_field(dro, "kappa", t.dro.kappa, "dro.");
  read_field(dro, "lambda_init", t.dro.lambda_init, "dro.");
  read_field(dro, "lambda_lr", t.dro.lambda_lr, "dro.");
  read_field(dro, "lambda_min", t.dro.lambda_bounds.first, "dro.");
  read_field(dro, "lambda_max", t.dro.lambda_bounds.second, "dro.");
  read_field(dro, "solver_tol", t.dro.solver_tol, "dro.");
  {
    std::string s;
    read_field(dro, "lambda_mode", s, "dro.");
    try {
      if (!s.empty()) t.dro.lambda_mode = parse_lambda_mode(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("field 'dro.lambda_mode': ") + e.what());
    }
  }

  const auto& atk = detail::section(doc, "attack", "");
  detail::reject_unknown(atk, {"budget", "steps", "step_size"}, "attack.");
  read_field(atk, "budget", t.attack.budget, "attack.");
  read_field(atk, "steps", t.attack.steps, "attack.");
  read_field(atk, "step_size", t.attack.step_size, "attack.");

  const auto& task = detail::section(doc, "task", "");
  detail::reject_unknown(task,
                         {"vocab_size", "embed_dim", "num_adversarial", "num_utility",
                          "hard_fraction", "margin", "init_scale"},
                         "task.");
  read_field(task, "vocab_size", c.task.vocab_size, "task.");
  read_field(task, "embed_dim", c.task.embed_dim, "task.");
  read_field(task, "num_adversarial", c.task.num_adversarial, "task.");
  read_field(task, "num_utility", c.task.num_utility, "task.");
  read_field(task, "hard_fraction", c.task.hard_fraction, "task.");
  read_field(task, "margin", c.task.margin, "task.");
  read_field(task, "init_scale", c.task.init_scale, "task.");

  try {
    t.validate();
    c.task.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  const TrainConfig& t = c.train;
  return {
      {"iterations", t.iterations},
      {"batch_size", t.batch_size},
      {"loss_kind", std::string(to_string(t.loss_kind))},
      {"use_utility", t.use_utility},
      {"utility_weight", t.utility_weight},
      {"model_lr", t.model_lr},
      {"beta", t.beta},
      {"seed", t.seed},
      {"aggregation", std::string(to_string(t.aggregation))},
      {"checkpoint_every", t.checkpoint_every},
      {"dro",
       {{"epsilon", t.dro.epsilon},
        {"kappa", t.dro.kappa},
        {"lambda_mode", std::string(to_string(t.dro.lambda_mode))},
        {"lambda_init", t.dro.lambda_init},
        {"lambda_lr", t.dro.lambda_lr},
        {"lambda_min", t.dro.lambda_bounds.first},
        {"lambda_max", t.dro.lambda_bounds.second},
        {"solver_tol", t.dro.solver_tol}}},
      {"attack",
       {{"budget", t.attack.budget}, {"steps", t.attack.steps}, {"step_size", t.attack.step_size}}},
      {"task",
       {{"vocab_size", c.task.vocab_size},
        {"embed_dim", c.task.embed_dim},
        {"num_adversarial", c.task.num_adversarial},
        {"num_utility", c.task.num_utility},
        {"hard_fraction", c.task.hard_fraction},
        {"margin", c.task.margin},
        {"init_scale", c.task.init_scale}}},
  };
}

/// Parses JSON text; syntax errors report line and column.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": parse error at " + detail::line_column(text, e.byte) + ": " +
                      e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const auto doc = parse_json_text(read_text_file(path), path);
  try {
    return experiment_config_from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace warden
