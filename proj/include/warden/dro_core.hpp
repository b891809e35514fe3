// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "warden/divergence.hpp"

namespace warden {

/// Per-sample adversarial losses of one minibatch. Non-empty, all finite.
class LossBatch {
 public:
  explicit LossBatch(std::vector<double> losses) : losses_(std::move(losses)) {
    if (losses_.empty()) throw std::invalid_argument("LossBatch: empty batch");
    for (std::size_t i = 0; i < losses_.size(); ++i) {
      if (!std::isfinite(losses_[i])) {
        throw std::invalid_argument("LossBatch: non-finite loss at index " + std::to_string(i));
      }
    }
  }

  LossBatch(std::initializer_list<double> losses) : LossBatch(std::vector<double>(losses)) {}

  std::span<const double> values() const { return losses_; }
  std::size_t size() const { return losses_.size(); }
  double operator[](std::size_t i) const { return losses_[i]; }

  double max() const { return *std::max_element(losses_.begin(), losses_.end()); }
  double min() const { return *std::min_element(losses_.begin(), losses_.end()); }
  double mean() const {
    return std::accumulate(losses_.begin(), losses_.end(), 0.0) / static_cast<double>(size());
  }

 private:
  std::vector<double> losses_;
};

enum class LambdaMode { Fixed, Learnable, Optimized };

inline std::string_view to_string(LambdaMode mode) {
  switch (mode) {
    case LambdaMode::Fixed: return "fixed";
    case LambdaMode::Learnable: return "learnable";
    case LambdaMode::Optimized: return "optimized";
  }
  return "unknown";
}

inline LambdaMode parse_lambda_mode(std::string_view s) {
  if (s == "fixed") return LambdaMode::Fixed;
  if (s == "learnable") return LambdaMode::Learnable;
  if (s == "optimized") return LambdaMode::Optimized;
  throw std::invalid_argument("unknown lambda mode '" + std::string(s) +
                              "' (expected fixed, learnable or optimized)");
}

/**
 * Parameters of the KL ambiguity set and of the dual-variable treatment.
 *
 * The learnable-mode bounds default to [0, 1e3]; they are wide enough that
 * the projection stays inactive unless the objective pushes lambda hard.
 */
struct DroConfig {
  double epsilon = 0.1;
  double kappa = 0.1;
  LambdaMode lambda_mode = LambdaMode::Optimized;
  double lambda_init = 5.0;
  double lambda_lr = 0.01;
  std::pair<double, double> lambda_bounds{0.0, 1e3};
  double solver_tol = 1e-8;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("DroConfig: epsilon must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("DroConfig: kappa must be > 0");
    if (!(lambda_lr > 0.0)) throw std::invalid_argument("DroConfig: lambda_lr must be > 0");
    if (!(lambda_bounds.first >= 0.0 && lambda_bounds.first < lambda_bounds.second)) {
      throw std::invalid_argument("DroConfig: lambda_bounds must satisfy 0 <= min < max");
    }
    if (lambda_init < lambda_bounds.first || lambda_init > lambda_bounds.second) {
      throw std::invalid_argument("DroConfig: lambda_init outside lambda_bounds");
    }
    if (!(solver_tol > 0.0)) throw std::invalid_argument("DroConfig: solver_tol must be > 0");
  }
};

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
}

// Stabilized sums at temperature T = lambda + kappa. With m = max L:
//   scaled_mean = (1/B) sum exp((L_i - m)/T)          in (0, 1]
//   tilt_gap    = sum w_i (m - L_i) / T               >= 0, w = softmax(L/T)
struct TiltedMoments {
  double max_loss;
  double temperature;
  double log_scaled_mean;
  double tilt_gap;
};

inline TiltedMoments tilted_moments(const LossBatch& batch, double temperature) {
  const double m = batch.max();
  double s = 0.0, gap = 0.0;
  for (double l : batch.values()) {
    const double e = std::exp((l - m) / temperature);
    s += e;
    gap += e * (m - l);
  }
  gap /= (s * temperature);
  return {m, temperature, std::log(s / static_cast<double>(batch.size())), gap};
}

}  // namespace detail

/// A(lambda) = lambda eps + (lambda + kappa) log mean exp(L_i / (lambda + kappa)).
inline double kl_dual_objective(const LossBatch& batch, double lambda, const DroConfig& cfg) {
  detail::check_lambda(lambda);
  const auto mo = detail::tilted_moments(batch, lambda + cfg.kappa);
  return lambda * cfg.epsilon + mo.max_loss + mo.temperature * mo.log_scaled_mean;
}

/**
 * dA/dlambda = eps + log mean exp(L/T) - (1/T) E_w[L], T = lambda + kappa,
 * w the softmax tilt. Rewritten around max L so that both remaining terms are
 * bounded: eps + log mean exp((L - m)/T) + E_w[m - L] / T.
 */
inline double kl_dual_derivative(const LossBatch& batch, double lambda, const DroConfig& cfg) {
  detail::check_lambda(lambda);
  const auto mo = detail::tilted_moments(batch, lambda + cfg.kappa);
  return cfg.epsilon + mo.log_scaled_mean + mo.tilt_gap;
}

/// Softmax tilt w_i proportional to exp(L_i / (lambda + kappa)): the gradient of
/// the dual objective with respect to the losses.
inline std::vector<double> kl_weights(const LossBatch& batch, double lambda, const DroConfig& cfg) {
  detail::check_lambda(lambda);
  const double t = lambda + cfg.kappa;
  const double m = batch.max();
  std::vector<double> w(batch.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((batch[i] - m) / t);
    s += w[i];
  }
  for (double& x : w) x /= s;
  return w;
}

/// lambda eps + rho + (lambda + kappa) mean f*((L_i - rho)/(lambda + kappa)).
inline ExtendedReal general_dual_objective(const LossBatch& batch, double lambda, double rho,
                                           const DroConfig& cfg, const DivergenceSpec& spec) {
  detail::check_lambda(lambda);
  const double t = lambda + cfg.kappa;
  double acc = 0.0;
  for (double l : batch.values()) {
    const ExtendedReal v = spec.f_star((l - rho) / t);
    if (v.is_infinite()) return ExtendedReal::infinity();
    acc += v.value();
  }
  return ExtendedReal(lambda * cfg.epsilon + rho + t * acc / static_cast<double>(batch.size()));
}

struct GeneralDualSolution {
  double lambda_star;
  double rho_star;
  double value;
  int iterations;
};

namespace detail {

inline constexpr double kInvPhi = 0.6180339887498948482;

// Golden-section minimization of a unimodal function on [lo, hi] down to an
// interval of width tol. Returns the best abscissa seen.
template <typename F>
double golden_section(F&& fn, double lo, double hi, double tol) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = fn(c), fd = fn(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = fn(d);
    }
  }
  // Endpoints are candidates too: the minimizer may sit on the boundary.
  double best = (fc <= fd) ? c : d;
  double fbest = std::min(fc, fd);
  for (double x : {lo, hi}) {
    if (x >= a - tol && x <= b + tol) {
      const double fx = fn(x);
      if (fx < fbest) {
        fbest = fx;
        best = x;
      }
    }
  }
  return best;
}

}  // namespace detail

inline constexpr int kGeneralDualMaxIterations = 200;

/**
 * Joint minimization of general_dual_objective over lambda in [0, lambda_hi]
 * and rho by alternating golden-section searches, one coordinate at a time,
 * until a full sweep lowers the objective by less than cfg.solver_tol.
 *
 * lambda_hi is cfg.lambda_bounds.second. The rho bracket starts at
 * [min L - 1, max L + 1] and doubles its width toward whichever side the
 * minimizer lands on.
 */
inline GeneralDualSolution general_dual_solve(const LossBatch& batch, const DroConfig& cfg,
                                              const DivergenceSpec& spec) {
  const double lambda_hi = cfg.lambda_bounds.second;
  const double coord_tol = cfg.solver_tol / 10.0;
  double rho_lo = batch.min() - 1.0;
  double rho_hi = batch.max() + 1.0;

  auto objective = [&](double lambda, double rho) {
    return general_dual_objective(batch, lambda, rho, cfg, spec).to_double();
  };

  auto minimize_rho = [&](double lambda) {
    for (int widen = 0; widen < 64; ++widen) {
      const double tol = coord_tol * std::max(1.0, rho_hi - rho_lo);
      const double r =
          detail::golden_section([&](double x) { return objective(lambda, x); }, rho_lo, rho_hi,
                                 tol);
      const double width = rho_hi - rho_lo;
      if (r - rho_lo <= 2.0 * tol) {
        rho_lo -= width;
      } else if (rho_hi - r <= 2.0 * tol) {
        rho_hi += width;
      } else {
        return r;
      }
    }
    throw std::runtime_error("general_dual_solve: rho bracket did not contain a minimizer");
  };

  double lambda = std::clamp(cfg.lambda_init, 0.0, lambda_hi);
  double rho = minimize_rho(lambda);
  double value = objective(lambda, rho);

  for (int it = 1; it <= kGeneralDualMaxIterations; ++it) {
    lambda = detail::golden_section([&](double x) { return objective(x, rho); }, 0.0, lambda_hi,
                                    coord_tol * std::max(1.0, lambda_hi));
    rho = minimize_rho(lambda);
    const double next = objective(lambda, rho);
    if (!std::isfinite(next)) {
      throw std::runtime_error("general_dual_solve: objective infinite at the iterate");
    }
    const double decrease = value - next;
    value = std::min(value, next);
    if (decrease < cfg.solver_tol) return {lambda, rho, value, it};
  }
  throw std::runtime_error("general_dual_solve: no convergence within " +
                           std::to_string(kGeneralDualMaxIterations) + " sweeps");
}

}  // namespace warden
