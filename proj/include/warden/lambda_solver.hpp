// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "warden/dro_core.hpp"

namespace warden {

/// Dual variable together with the trajectory of values it has taken.
struct DualState {
  double lambda = 0.0;
  LambdaMode mode = LambdaMode::Optimized;
  std::vector<std::pair<std::size_t, double>> history;

  static DualState initial(const DroConfig& cfg) { return DualState{cfg.lambda_init, cfg.lambda_mode, {}}; }

  void record(std::size_t step, double value) {
    if (!history.empty() && step <= history.back().first) {
      throw std::logic_error("DualState: history steps must be strictly increasing");
    }
    history.emplace_back(step, value);
  }
};

inline constexpr int kMaxBracketDoublings = 60;

/// Default derivative used by solve_optimized.
struct KlDerivative {
  double operator()(const LossBatch& batch, double lambda, const DroConfig& cfg) const {
    return kl_dual_derivative(batch, lambda, cfg);
  }
};

/**
 * argmin_{lambda >= 0} kl_dual_objective by the sign-check + bisection
 * procedure on the derivative:
 *
 *   derivative(0) >= 0  ->  the objective is non-decreasing, lambda* = 0.
 *   derivative(0) <  0  ->  double lambda_r from 1 until derivative(lambda_r) > 0,
 *                           then bisect [0, lambda_r] for the root.
 *
 * Bisection stops when |derivative| <= solver_tol, or when the bracket has
 * shrunk to floating-point resolution (64 ulp of 1 + lambda_r); a looser width
 * test lets steep derivatives exit with |derivative| far above solver_tol.
 * The derivative is a template parameter so the verification suite can inject
 * a perturbed one.
 */
template <typename Derivative = KlDerivative>
double solve_optimized(const LossBatch& batch, const DroConfig& cfg, Derivative&& derivative = {}) {
  if (!(cfg.kappa > 0.0)) throw std::invalid_argument("solve_optimized: kappa must be > 0");
  const double d0 = derivative(batch, 0.0, cfg);
  if (!std::isfinite(d0)) throw std::runtime_error("solve_optimized: non-finite derivative at 0");
  if (d0 >= 0.0) return 0.0;

  double right = 1.0;
  int doublings = 0;
  while (!(derivative(batch, right, cfg) > 0.0)) {
    if (++doublings > kMaxBracketDoublings) {
      throw std::runtime_error("solve_optimized: no sign change after 60 bracket doublings");
    }
    right *= 2.0;
  }

  const double width_tol = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + right);
  double lo = 0.0, hi = right;
  double mid = 0.5 * (lo + hi);
  while (true) {
    mid = 0.5 * (lo + hi);
    const double d = derivative(batch, mid, cfg);
    if (std::abs(d) <= cfg.solver_tol || hi - lo <= width_tol) break;
    if (d < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

/// Projected gradient step on lambda for the learnable treatment.
inline DualState learnable_step(DualState state, const LossBatch& batch, const DroConfig& cfg,
                                std::size_t step) {
  if (state.mode != LambdaMode::Learnable) {
    throw std::invalid_argument("learnable_step: state is not in learnable mode");
  }
  const double g = kl_dual_derivative(batch, state.lambda, cfg);
  state.lambda = std::clamp(state.lambda - cfg.lambda_lr * g, cfg.lambda_bounds.first,
                            cfg.lambda_bounds.second);
  state.record(step, state.lambda);
  return state;
}

/// Convenience overload that numbers the step after the last recorded one.
inline DualState learnable_step(DualState state, const LossBatch& batch, const DroConfig& cfg) {
  const std::size_t step = state.history.empty() ? 0 : state.history.back().first + 1;
  return learnable_step(std::move(state), batch, cfg, step);
}

struct LambdaResolution {
  double lambda;
  DualState next_state;
};

/// Dispatch over the three dual-variable treatments for one training step.
inline LambdaResolution resolve_lambda(DualState state, const LossBatch& batch,
                                       const DroConfig& cfg, std::size_t step) {
  switch (state.mode) {
    case LambdaMode::Fixed:
      state.record(step, cfg.lambda_init);
      return {cfg.lambda_init, std::move(state)};
    case LambdaMode::Learnable: {
      DualState next = learnable_step(std::move(state), batch, cfg, step);
      const double l = next.lambda;
      return {l, std::move(next)};
    }
    case LambdaMode::Optimized: {
      const double l = solve_optimized(batch, cfg);
      state.lambda = l;
      state.record(step, l);
      return {l, std::move(state)};
    }
  }
  throw std::logic_error("resolve_lambda: unknown mode");
}

}  // namespace warden
