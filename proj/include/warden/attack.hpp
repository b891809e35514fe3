// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>

#include "warden/toy_model.hpp"

namespace warden {

/// Embedding-space attack: M projected ascent steps on a Euclidean ball.
struct AttackConfig {
  double budget = 0.5;
  std::size_t steps = 10;
  double step_size = 0.05;

  void validate() const {
    if (!(budget > 0.0)) throw std::invalid_argument("AttackConfig: budget must be > 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("AttackConfig: step_size must be > 0");
  }
};

/// Euclidean projection onto the ball of radius `budget`.
inline Vector project(const Vector& delta, double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("project: budget must be > 0");
  const double n = delta.norm();
  if (n <= budget) return delta;
  return delta * (budget / n);
}

/// Starts at delta = 0 and ascends log p(undesired | x + delta).
inline Vector run_attack(const ToyModelParams& params, const ReferenceParams& ref,
                         const PreferenceSample& sample, const AttackConfig& cfg) {
  cfg.validate();
  Vector delta = Vector::Zero(params.embed.cols());
  for (std::size_t m = 0; m < cfg.steps; ++m) {
    const Vector g = loss_grad_delta(LossKind::Attack, params, ref, sample, delta, 1.0);
    delta = project(delta + cfg.step_size * g, cfg.budget);
  }
  return delta;
}

}  // namespace warden
