// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "warden/toy_model.hpp"

namespace warden {

struct TaskConfig {
  std::size_t vocab_size = 16;
  std::size_t embed_dim = 8;
  std::size_t num_adversarial = 200;
  std::size_t num_utility = 64;
  double hard_fraction = 0.1;
  // Initial logit gap between the favoured and the disfavoured response.
  double margin = 3.0;
  double init_scale = 0.1;

  void validate() const {
    if (vocab_size < 16) throw std::invalid_argument("TaskConfig: vocab_size must be >= 16");
    if (embed_dim < 2) throw std::invalid_argument("TaskConfig: embed_dim must be >= 2");
    if (num_adversarial == 0) throw std::invalid_argument("TaskConfig: num_adversarial must be > 0");
    if (num_utility == 0) throw std::invalid_argument("TaskConfig: num_utility must be > 0");
    if (hard_fraction < 0.0 || hard_fraction > 1.0) {
      throw std::invalid_argument("TaskConfig: hard_fraction must lie in [0, 1]");
    }
    if (!(margin > 0.0)) throw std::invalid_argument("TaskConfig: margin must be > 0");
    if (!(init_scale > 0.0)) throw std::invalid_argument("TaskConfig: init_scale must be > 0");
  }
};

struct SyntheticTask {
  ToyModelParams init;
  std::vector<PreferenceSample> adversarial;
  std::vector<UtilitySample> utility;
  std::vector<bool> is_hard;
};

/**
 * Heavy-tailed preference task on a 16-token layout:
 *
 *   0-1    refusals (desired responses)
 *   2-5    harmful completions (undesired responses)
 *   6-7    benign answers (utility targets)
 *   8-11   easy adversarial prompt tokens
 *   12-13  hard adversarial prompt tokens
 *   14-15  benign prompt tokens (utility prompts, adversarial context)
 *
 * Every adversarial prompt token t carries a fixed (desired, undesired) pair.
 * Its initial embedding is the random draw plus a component along
 * out[:, desired] - out[:, undesired], sized so the logit gap is +margin for
 * easy tokens and -margin for hard ones. Hard samples therefore start with the
 * undesired response strongly favoured.
 *
 * Tokens past 15 exist in the model but are never used.
 */
inline SyntheticTask make_heavy_tail_task(const TaskConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticTask task;
  task.init = ToyModelParams::random(cfg.vocab_size, cfg.embed_dim, seed, cfg.init_scale);
  auto& embed = task.init.embed;
  const auto& out = task.init.out;

  auto desired_of = [](std::size_t t) -> std::size_t { return t % 2; };
  auto undesired_of = [](std::size_t t) -> std::size_t {
    return t < 12 ? 2 + (t - 8) : 4 + (t - 12);
  };

  for (std::size_t t = 8; t < 14; ++t) {
    const double target = t < 12 ? cfg.margin : -cfg.margin;
    const Vector u = out.col(static_cast<Eigen::Index>(desired_of(t))) -
                     out.col(static_cast<Eigen::Index>(undesired_of(t)));
    const Vector e = embed.row(static_cast<Eigen::Index>(t)).transpose();
    const double a = (target - e.dot(u)) / u.squaredNorm();
    embed.row(static_cast<Eigen::Index>(t)) += a * u.transpose();
  }

  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  auto pick = [&](std::size_t lo, std::size_t count) {
    return lo + static_cast<std::size_t>(rng() % count);
  };

  const auto num_hard = static_cast<std::size_t>(
      std::llround(cfg.hard_fraction * static_cast<double>(cfg.num_adversarial)));
  task.is_hard.assign(cfg.num_adversarial, false);
  std::fill_n(task.is_hard.begin(), num_hard, true);
  for (std::size_t i = task.is_hard.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    const bool tmp = task.is_hard[i - 1];
    task.is_hard[i - 1] = task.is_hard[j];
    task.is_hard[j] = tmp;
  }

  for (std::size_t i = 0; i < cfg.num_adversarial; ++i) {
    const std::size_t t = task.is_hard[i] ? pick(12, 2) : pick(8, 4);
    PreferenceSample s{{t, t}, desired_of(t), undesired_of(t)};
    if (rng() % 2 == 0) s.prompt.push_back(pick(14, 2));
    task.adversarial.push_back(std::move(s));
  }

  for (std::size_t i = 0; i < cfg.num_utility; ++i) {
    const std::size_t b = pick(14, 2);
    UtilitySample s{{b}, 6 + (b - 14)};
    if (rng() % 2 == 0) s.prompt.push_back(b);
    task.utility.push_back(std::move(s));
  }
  return task;
}

}  // namespace warden
