// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// Oracle suite behind `warden verify`: duality certificates against the
// brute-force primal, bisection postconditions, finite-difference checks of
// every analytic derivative, and the randomized invariants of the dual
// objective. Every instance is generated from its own seed so a failure can
// be replayed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "warden/divergence.hpp"
#include "warden/dro_core.hpp"
#include "warden/lambda_solver.hpp"
#include "warden/primal_oracle.hpp"
#include "warden/toy_model.hpp"
#include "warden/trainer.hpp"

namespace warden {

inline constexpr double kDualityGapTolerance = 2e-4;
inline constexpr double kWeakDualitySlack = 1e-6;
inline constexpr double kDerivativeRelTolerance = 1e-6;
inline constexpr double kGradientRelTolerance = 1e-4;
inline constexpr double kMinimizerSlack = 1e-6;

struct VerifyOptions {
  std::size_t trials = 50;
  std::uint64_t seed = 0;
  std::size_t primal_trials = 20000;
  /// Test hook: scales the loss-dependent part of the derivative handed to
  /// the bisection solver and the derivative check by 1.01.
  bool corrupt_derivative = false;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  std::uint64_t worst_seed = 0;
  std::uint64_t failing_seed = 0;
  std::string note;
};

/// Mixes a base seed with a check id and an instance index.
inline std::uint64_t instance_seed(std::uint64_t base, std::uint64_t check, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (check * 1000003ULL + index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// A random batch with DRO settings drawn from the tabulated ranges.
struct DualInstance {
  LossBatch batch;
  DroConfig cfg;
};

inline DualInstance random_dual_instance(std::uint64_t seed, std::size_t min_n, std::size_t max_n,
                                         double loss_scale = 3.0, double min_spread = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(min_n, max_n);
  std::uniform_real_distribution<double> loss(-loss_scale, loss_scale);
  static constexpr double kEps[] = {0.05, 0.1, 0.5};
  static constexpr double kKappa[] = {0.08, 0.1, 0.5};
  DroConfig cfg;
  cfg.epsilon = kEps[rng() % 3];
  cfg.kappa = kKappa[rng() % 3];
  const std::size_t n = size(rng);
  std::vector<double> l(n);
  do {
    for (auto& x : l) x = loss(rng);
  } while (*std::max_element(l.begin(), l.end()) - *std::min_element(l.begin(), l.end()) <
           min_spread);
  return {LossBatch(std::move(l)), cfg};
}

/// Derivative implementation under test, optionally corrupted.
struct VerifiedDerivative {
  bool corrupt = false;
  double operator()(const LossBatch& batch, double lambda, const DroConfig& cfg) const {
    const double d = kl_dual_derivative(batch, lambda, cfg);
    if (!corrupt) return d;
    return cfg.epsilon + 1.01 * (d - cfg.epsilon);
  }
};

/// |a - b| / max(|a|, |b|, floor).
inline double relative_difference(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

namespace detail {

class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, double tolerance) {
    r_.name = std::move(name);
    r_.tolerance = tolerance;
  }

  // Records a measured error; the instance fails when error > tolerance.
  void measure(double error, std::uint64_t seed) { observe(error, seed, error <= r_.tolerance); }

  void observe(double error, std::uint64_t seed, bool ok) {
    ++r_.instances;
    if (error > r_.worst || r_.instances == 1) {
      r_.worst = error;
      r_.worst_seed = seed;
    }
    if (!ok && r_.passed) {
      r_.passed = false;
      r_.failing_seed = seed;
    }
  }

  void fail(std::uint64_t seed, std::string note) {
    ++r_.instances;
    if (r_.passed) {
      r_.passed = false;
      r_.failing_seed = seed;
      r_.note = std::move(note);
    }
  }

  CheckResult done() { return r_; }

 private:
  CheckResult r_;
};

struct GradientInstance {
  ToyModelParams params;
  ReferenceParams ref;
  PreferenceSample sample;
  UtilitySample utility;
  Vector delta;
  double beta;
};

inline GradientInstance random_gradient_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t v = (rng() % 2 == 0) ? 4 : 16;
  const std::size_t d = (rng() % 2 == 0) ? 2 : 8;
  ToyModelParams params = ToyModelParams::random(v, d, rng(), 0.5);
  ReferenceParams ref(ToyModelParams::random(v, d, rng(), 0.5));
  const std::size_t len = 1 + rng() % 3;
  TokenSequence prompt;
  for (std::size_t i = 0; i < len; ++i) prompt.push_back(rng() % v);
  const std::size_t y = rng() % v;
  const std::size_t yh = (y + 1 + rng() % (v - 1)) % v;
  std::normal_distribution<double> normal(0.0, 0.3);
  Vector delta(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < delta.size(); ++i) delta(i) = normal(rng);
  const double beta = 0.1 + 0.9 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  UtilitySample u{prompt, rng() % v};
  return {std::move(params), std::move(ref), PreferenceSample{prompt, y, yh}, std::move(u), delta, beta};
}

inline double preference_loss_value(LossKind kind, const ToyModelParams& p, const GradientInstance& g,
                                    const Vector& delta) {
  switch (kind) {
    case LossKind::Cat: return cat_loss(p, g.ref, g.sample, delta);
    case LossKind::Capo: return capo_loss(p, g.ref, g.sample, delta, g.beta);
    case LossKind::Attack: return attack_objective(p, g.sample, delta);
  }
  return 0.0;
}

inline double vector_relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

inline Vector finite_difference_delta(const std::function<double(const Vector&)>& fn,
                                      const Vector& delta, double h) {
  Vector g(delta.size());
  Vector d = delta;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double orig = d(i);
    d(i) = orig + h;
    const double fp = fn(d);
    d(i) = orig - h;
    const double fm = fn(d);
    d(i) = orig;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

inline CheckResult check_duality(const DivergenceSpec& spec, const VerifyOptions& opt,
                                 std::uint64_t check_id) {
  detail::CheckAccumulator acc("duality_gap_" + spec.name, kDualityGapTolerance);
  const bool is_kl = spec.name == "kl";
  for (std::size_t i = 0; i < opt.trials; ++i) {
    const std::uint64_t s = instance_seed(opt.seed, check_id, i);
    const auto inst = random_dual_instance(s, 2, 4);
    const double dual =
        is_kl ? kl_dual_objective(inst.batch, solve_optimized(inst.batch, inst.cfg), inst.cfg)
              : general_dual_solve(inst.batch, inst.cfg, spec).value;
    const auto primal = primal_solve(inst.batch, inst.cfg, spec, opt.primal_trials, s);
    const double gap = std::abs(primal.value - dual);
    const bool weak = primal.value <= dual + kWeakDualitySlack;
    const bool feasible = primal.divergence <= inst.cfg.epsilon + 1e-8;
    acc.observe(gap, s, gap <= kDualityGapTolerance && weak && feasible);
  }
  return acc.done();
}

inline CheckResult check_bisection(const VerifyOptions& opt, std::uint64_t check_id) {
  detail::CheckAccumulator acc("bisection", 1e-8);
  const VerifiedDerivative deriv{opt.corrupt_derivative};
  for (std::size_t i = 0; i < 4 * opt.trials; ++i) {
    const std::uint64_t s = instance_seed(opt.seed, check_id, i);
    auto inst = random_dual_instance(s, 1, 16);
    inst.cfg.solver_tol = 1e-8;
    const double lambda = solve_optimized(inst.batch, inst.cfg, deriv);
    const double d = kl_dual_derivative(inst.batch, lambda, inst.cfg);
    bool ok = lambda == 0.0 ? d >= 0.0 : std::abs(d) <= 1e-8;
    const double a_star = kl_dual_objective(inst.batch, lambda, inst.cfg);
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> unif(0.0, 100.0);
    for (int k = 0; k < 100; ++k) {
      if (a_star > kl_dual_objective(inst.batch, unif(rng), inst.cfg) + kMinimizerSlack) ok = false;
    }
    acc.observe(lambda == 0.0 ? std::max(0.0, -d) : std::abs(d), s, ok);
  }
  return acc.done();
}

inline CheckResult check_derivative(const VerifyOptions& opt, std::uint64_t check_id) {
  detail::CheckAccumulator acc("derivative_fd", kDerivativeRelTolerance);
  const VerifiedDerivative deriv{opt.corrupt_derivative};
  constexpr double h = 1e-6;
  for (std::size_t i = 0; i < 4 * opt.trials; ++i) {
    const std::uint64_t s = instance_seed(opt.seed, check_id, i);
    const auto inst = random_dual_instance(s, 1, 16);
    std::mt19937_64 rng(s);
    const double lambda = std::uniform_real_distribution<double>(h, 10.0)(rng);
    const double fd = (kl_dual_objective(inst.batch, lambda + h, inst.cfg) -
                       kl_dual_objective(inst.batch, lambda - h, inst.cfg)) /
                      (2.0 * h);
    acc.measure(relative_difference(deriv(inst.batch, lambda, inst.cfg), fd, 1e-3), s);
  }
  return acc.done();
}

inline std::vector<CheckResult> check_gradients(const VerifyOptions& opt, std::uint64_t check_id) {
  const std::size_t n = std::min<std::size_t>(opt.trials, 20);
  detail::CheckAccumulator params_acc("grad_params_fd", kGradientRelTolerance);
  detail::CheckAccumulator delta_acc("grad_delta_fd", kGradientRelTolerance);
  detail::CheckAccumulator chain_acc("chain_rule", kGradientRelTolerance);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = instance_seed(opt.seed, check_id, i);
    const auto g = detail::random_gradient_instance(s);
    double worst_p = 0.0, worst_d = 0.0;
    for (LossKind kind : {LossKind::Cat, LossKind::Capo, LossKind::Attack}) {
      const auto analytic = loss_grad_params(kind, g.params, g.ref, g.sample, g.delta, g.beta);
      const auto numeric = detail::finite_difference_gradient(
          g.params,
          [&](const ToyModelParams& p) { return detail::preference_loss_value(kind, p, g, g.delta); },
          1e-5);
      worst_p = std::max(worst_p, detail::relative_error(analytic, numeric));
      const Vector ad = loss_grad_delta(kind, g.params, g.ref, g.sample, g.delta, g.beta);
      const Vector nd = detail::finite_difference_delta(
          [&](const Vector& d) { return detail::preference_loss_value(kind, g.params, g, d); },
          g.delta, 1e-5);
      worst_d = std::max(worst_d, detail::vector_relative_error(ad, nd));
    }
    const auto ua = loss_grad_params(g.params, g.utility);
    const auto un = detail::finite_difference_gradient(
        g.params, [&](const ToyModelParams& p) { return utility_loss(p, g.utility); }, 1e-5);
    worst_p = std::max(worst_p, detail::relative_error(ua, un));
    params_acc.measure(worst_p, s);
    delta_acc.measure(worst_d, s);

    TrainConfig cfg;
    std::mt19937_64 lrng(s);
    cfg.dro.lambda_init = std::uniform_real_distribution<double>(0.0, 5.0)(lrng);
    double worst_c = 0.0;
    for (BaseMethod m : {BaseMethod::Cat, BaseMethod::Capo}) {
      cfg.loss_kind = m;
      worst_c = std::max(worst_c, chain_rule_check(cfg, s).max_relative_error);
    }
    chain_acc.measure(worst_c, s);
  }
  return {params_acc.done(), delta_acc.done(), chain_acc.done()};
}

/// Sandwich, shift equivariance, monotonicity, convexity in lambda, weight
/// ordering, joint convexity of the general dual, and the two temperature
/// limits. The limits are asserted on batches with spread >= 1: at a fixed
/// temperature T both limits need spread >> T log B.
inline std::vector<CheckResult> check_invariants(std::size_t instances, std::uint64_t seed,
                                                 std::uint64_t check_id) {
  detail::CheckAccumulator sandwich("sandwich", 1e-10);
  detail::CheckAccumulator shift("shift_equivariance", 1e-10);
  detail::CheckAccumulator mono("monotonicity", 1e-12);
  detail::CheckAccumulator convex("convexity_lambda", 1e-10);
  detail::CheckAccumulator order("weights_order", 0.0);
  detail::CheckAccumulator joint("joint_convexity", 1e-10);
  detail::CheckAccumulator lim_mean("limit_mean", 1e-2);
  detail::CheckAccumulator lim_max("limit_max", 1e-2);
  const auto kl = kl_spec();
  const auto chi2 = chi2_spec();
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = instance_seed(seed, check_id, i);
    const auto inst = random_dual_instance(s, 1, 16);
    const auto& L = inst.batch;
    const auto& cfg = inst.cfg;
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> lam(0.0, 20.0);
    const double l1 = lam(rng), l2 = lam(rng);

    const double a1 = kl_dual_objective(L, l1, cfg) - l1 * cfg.epsilon;
    sandwich.measure(std::max({0.0, L.mean() - a1, a1 - L.max()}), s);

    const double c = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    std::vector<double> shifted(L.values().begin(), L.values().end());
    for (double& x : shifted) x += c;
    shift.measure(std::abs(kl_dual_objective(LossBatch(shifted), l1, cfg) -
                           (kl_dual_objective(L, l1, cfg) + c)),
                  s);

    const std::size_t j = rng() % L.size();
    std::vector<double> bumped(L.values().begin(), L.values().end());
    bumped[j] += 1e-3;
    const double diff = kl_dual_objective(LossBatch(bumped), l1, cfg) - kl_dual_objective(L, l1, cfg);
    mono.measure(std::max(0.0, -diff), s);

    const double mid = kl_dual_objective(L, 0.5 * (l1 + l2), cfg);
    const double chord = 0.5 * (kl_dual_objective(L, l1, cfg) + kl_dual_objective(L, l2, cfg));
    convex.measure(std::max(0.0, mid - chord), s);

    const auto w = kl_weights(L, l1, cfg);
    double violation = 0.0;
    for (std::size_t a = 0; a < L.size(); ++a) {
      for (std::size_t b = 0; b < L.size(); ++b) {
        if (L[a] >= L[b]) violation = std::max(violation, w[b] - w[a]);
      }
    }
    order.measure(violation, s);

    std::uniform_real_distribution<double> rho(L.min() - 2.0, L.max() + 2.0);
    const double r1 = rho(rng), r2 = rho(rng);
    double jv = 0.0;
    for (const auto* spec : {&kl, &chi2}) {
      const double m = general_dual_objective(L, 0.5 * (l1 + l2), 0.5 * (r1 + r2), cfg, *spec).value();
      const double ch = 0.5 * (general_dual_objective(L, l1, r1, cfg, *spec).value() +
                               general_dual_objective(L, l2, r2, cfg, *spec).value());
      // Relative slack: chi2 values grow quadratically in the loss scale.
      jv = std::max(jv, (m - ch) / std::max(1.0, std::abs(ch)));
    }
    joint.measure(std::max(0.0, jv), s);

    const auto wide = random_dual_instance(s ^ 0x5555ULL, 2, 16, 3.0, 1.0);
    const double spread = wide.batch.max() - wide.batch.min();
    DroConfig hot = wide.cfg;
    hot.kappa = 0.1;
    const double big = 1e3 - hot.kappa;
    lim_mean.measure(std::abs(kl_dual_objective(wide.batch, big, hot) - big * hot.epsilon -
                              wide.batch.mean()) / spread,
                     s);
    DroConfig cold = wide.cfg;
    cold.kappa = 1e-3;
    lim_max.measure(std::abs(kl_dual_objective(wide.batch, 0.0, cold) - wide.batch.max()) / spread, s);
  }
  return {sandwich.done(), shift.done(), mono.done(), convex.done(),
          order.done(),    joint.done(), lim_mean.done(), lim_max.done()};
}

inline std::vector<CheckResult> run_verification(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  out.push_back(check_duality(kl_spec(), opt, 1));
  out.push_back(check_duality(chi2_spec(), opt, 2));
  out.push_back(check_bisection(opt, 3));
  out.push_back(check_derivative(opt, 4));
  for (auto& r : check_gradients(opt, 5)) out.push_back(std::move(r));
  for (auto& r : check_invariants(10 * opt.trials, opt.seed, 6)) out.push_back(std::move(r));
  return out;
}

inline void print_verification_table(std::ostream& os, const std::vector<CheckResult>& results) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %-6s %9s %12s %12s  %s\n", "check", "status", "instances",
                "worst", "tolerance", "seed");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-20s %-6s %9zu %12.3e %12.3e  %llu\n", r.name.c_str(),
                  r.passed ? "PASS" : "FAIL", r.instances, r.worst, r.tolerance,
                  static_cast<unsigned long long>(r.passed ? r.worst_seed : r.failing_seed));
    os << line;
    if (!r.note.empty()) os << "  note: " << r.note << '\n';
  }
}

}  // namespace warden
