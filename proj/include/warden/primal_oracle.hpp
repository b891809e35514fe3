// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

// Brute-force solvers for the primal robust problem
//
//   sup_q  sum_i q_i L_i - kappa D_f(q || uniform)   s.t.  D_f(q || uniform) <= eps
//
// on batches of at most six samples. They never touch the dual objective and
// exist to certify it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "warden/divergence.hpp"
#include "warden/dro_core.hpp"

namespace warden {

struct PrimalSolution {
  std::vector<double> q;
  double value;
  double divergence;
};

inline constexpr std::size_t kPrimalMaxSamples = 6;
inline constexpr std::size_t kPrimalMinTrials = 10000;

namespace detail {

class PrimalProblem {
 public:
  PrimalProblem(const LossBatch& batch, const DroConfig& cfg, const DivergenceSpec& spec)
      : batch_(batch), cfg_(cfg), spec_(spec),
        uniform_(batch.size(), 1.0 / static_cast<double>(batch.size())) {}

  std::size_t size() const { return uniform_.size(); }
  const std::vector<double>& uniform() const { return uniform_; }

  // Against a strictly positive reference the divergence is always finite;
  // renormalize to absorb rounding drift from the moves.
  double divergence(const std::vector<double>& q) const {
    double s = 0.0;
    for (double x : q) s += x;
    double d = 0.0;
    const double p = uniform_[0];
    for (double x : q) d += p * spec_.f((x / s) / p);
    return d;
  }

  double objective(const std::vector<double>& q, double div) const {
    double e = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) e += q[i] * batch_[i];
    return e - cfg_.kappa * div;
  }

  bool feasible(double div) const { return div <= cfg_.epsilon; }

  // Pulls an infeasible q back along the segment toward the uniform
  // reference, to the largest s with D(u + s (q - u)) <= eps. D is convex in s
  // and zero at s = 0, so the feasible s form an interval [0, s*].
  std::vector<double> retract(const std::vector<double>& q) const {
    auto at = [&](double s) {
      std::vector<double> r(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) r[i] = uniform_[i] + s * (q[i] - uniform_[i]);
      return r;
    };
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(divergence(at(mid)))) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return at(lo);
  }

 private:
  const LossBatch& batch_;
  const DroConfig& cfg_;
  const DivergenceSpec& spec_;
  std::vector<double> uniform_;
};

struct Candidate {
  std::vector<double> q;
  double value;
  double divergence;
};

// Pairwise mass-transfer hill climb. A move shifts up to `step` mass from
// coordinate j to coordinate i; moves that leave the feasible set are
// retracted onto its boundary. The step halves whenever a full sweep over
// ordered pairs yields no improvement.
inline Candidate hill_climb(const PrimalProblem& prob, Candidate c, double min_step) {
  const std::size_t n = prob.size();
  double step = 0.1;
  while (step > min_step) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double amount = std::min(step, c.q[j]);
        if (amount <= 0.0) continue;
        std::vector<double> q = c.q;
        q[i] += amount;
        q[j] -= amount;
        double div = prob.divergence(q);
        if (!prob.feasible(div)) {
          q = prob.retract(q);
          div = prob.divergence(q);
        }
        const double v = prob.objective(q, div);
        if (v > c.value) {
          c = Candidate{std::move(q), v, div};
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return c;
}

}  // namespace detail

/**
 * Random search over the simplex followed by local refinement.
 *
 * `trials` points are drawn by normalizing i.i.d. exponential variates (the
 * flat Dirichlet distribution); infeasible draws are discarded and the uniform
 * point is always a candidate. The ten best feasible points seed a pairwise
 * transfer hill climb.
 */
inline PrimalSolution primal_solve(const LossBatch& batch, const DroConfig& cfg,
                                   const DivergenceSpec& spec, std::size_t trials,
                                   std::uint64_t seed = 0) {
  if (batch.size() > kPrimalMaxSamples) {
    throw std::invalid_argument("primal_solve: batch has more than 6 samples");
  }
  if (trials < kPrimalMinTrials) {
    throw std::invalid_argument("primal_solve: at least 10000 trials required");
  }
  const detail::PrimalProblem prob(batch, cfg, spec);
  const std::size_t n = prob.size();
  constexpr std::size_t kSeeds = 10;

  std::vector<detail::Candidate> best;
  auto offer = [&](std::vector<double> q) {
    const double div = prob.divergence(q);
    if (!prob.feasible(div)) return;
    best.push_back({std::move(q), 0.0, div});
    best.back().value = prob.objective(best.back().q, div);
    std::sort(best.begin(), best.end(),
              [](const auto& a, const auto& b) { return a.value > b.value; });
    if (best.size() > kSeeds) best.pop_back();
  };

  offer(prob.uniform());
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> q(n);
  for (std::size_t t = 0; t < trials; ++t) {
    double s = 0.0;
    for (auto& x : q) {
      x = expo(rng);
      s += x;
    }
    for (auto& x : q) x /= s;
    offer(q);
  }
  if (best.empty()) throw std::runtime_error("primal_solve: no feasible point found");

  detail::Candidate winner = best.front();
  for (auto& c : best) {
    auto refined = detail::hill_climb(prob, c, 1e-12);
    if (refined.value > winner.value) winner = std::move(refined);
  }
  double s = 0.0;
  for (double x : winner.q) s += x;
  for (double& x : winner.q) x /= s;
  return {std::move(winner.q), winner.value, winner.divergence};
}

/**
 * Scans the exponential-tilt family q(t) proportional to exp(L / t) over
 * t in [kappa, kappa + 100] on a uniform grid of `grid_points`, keeping the
 * best feasible member of the penalized KL objective.
 *
 * KL(q(t) || uniform) decreases in t, so feasibility starts at some t_b. The
 * grid result is refined by bisecting for t_b and by a golden-section search
 * between the neighbours of the best grid point.
 */
inline double kl_tilt_crosscheck(const LossBatch& batch, const DroConfig& cfg,
                                 std::size_t grid_points = 100000) {
  if (batch.size() > kPrimalMaxSamples) {
    throw std::invalid_argument("kl_tilt_crosscheck: batch has more than 6 samples");
  }
  if (grid_points < 2) throw std::invalid_argument("kl_tilt_crosscheck: grid too small");
  const DivergenceSpec kl = kl_spec();
  const detail::PrimalProblem prob(batch, cfg, kl);
  const double m = batch.max();
  std::vector<double> q(batch.size());

  struct Eval {
    bool feasible;
    double value;
  };
  auto eval = [&](double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = std::exp((batch[i] - m) / t);
      s += q[i];
    }
    for (double& x : q) x /= s;
    const double div = prob.divergence(q);
    return Eval{prob.feasible(div), prob.objective(q, div)};
  };

  const double t0 = cfg.kappa;
  const double h = 100.0 / static_cast<double>(grid_points - 1);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  std::size_t first_feasible = grid_points;
  for (std::size_t k = 0; k < grid_points; ++k) {
    const Eval e = eval(t0 + h * static_cast<double>(k));
    if (!e.feasible) continue;
    if (first_feasible == grid_points) first_feasible = k;
    if (e.value > best) {
      best = e.value;
      best_k = k;
    }
  }
  if (first_feasible == grid_points) {
    throw std::runtime_error("kl_tilt_crosscheck: no feasible tilt in the scanned range");
  }

  if (first_feasible > 0) {
    double lo = t0 + h * static_cast<double>(first_feasible - 1);
    double hi = t0 + h * static_cast<double>(first_feasible);
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (eval(mid).feasible) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    best = std::max(best, eval(hi).value);
  }

  const double lo = t0 + h * static_cast<double>(best_k == 0 ? 0 : best_k - 1);
  const double hi = t0 + h * static_cast<double>(std::min(best_k + 1, grid_points - 1));
  auto neg = [&](double t) {
    const Eval e = eval(t);
    return e.feasible ? -e.value : std::numeric_limits<double>::infinity();
  };
  const double t_star = detail::golden_section(neg, lo, hi, 1e-12 * (1.0 + hi));
  const Eval e = eval(t_star);
  if (e.feasible) best = std::max(best, e.value);
  return best;
}

}  // namespace warden
