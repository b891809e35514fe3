// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "warden/attack.hpp"
#include "warden/dro_core.hpp"
#include "warden/lambda_solver.hpp"
#include "warden/toy_model.hpp"

namespace warden {

enum class Aggregation { Mean, Dro };

inline std::string_view to_string(Aggregation a) { return a == Aggregation::Mean ? "mean" : "dro"; }

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "dro") return Aggregation::Dro;
  throw std::invalid_argument("unknown aggregation '" + std::string(s) + "' (expected mean or dro)");
}

/// Base adversarial pipeline whose per-sample losses are aggregated.
enum class BaseMethod { Cat, Capo };

inline std::string_view to_string(BaseMethod m) { return m == BaseMethod::Cat ? "cat" : "capo"; }

inline BaseMethod parse_base_method(std::string_view s) {
  if (s == "cat") return BaseMethod::Cat;
  if (s == "capo") return BaseMethod::Capo;
  throw std::invalid_argument("unknown loss_kind '" + std::string(s) + "' (expected cat or capo)");
}

struct TrainConfig {
  std::size_t iterations = 500;
  std::size_t batch_size = 16;
  BaseMethod loss_kind = BaseMethod::Cat;
  bool use_utility = true;
  double utility_weight = 1.0;
  double model_lr = 0.05;
  DroConfig dro;
  AttackConfig attack;
  double beta = 0.25;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::Dro;
  std::size_t checkpoint_every = 100;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (utility_weight < 0.0) throw std::invalid_argument("TrainConfig: utility_weight must be >= 0");
    if (!(model_lr > 0.0)) throw std::invalid_argument("TrainConfig: model_lr must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("TrainConfig: beta must be > 0");
    dro.validate();
    attack.validate();
  }
};

struct ExperimentRecord {
  std::size_t step;
  double lambda;
  double agg_loss;
  std::optional<double> utility_loss;
  double p50;
  double p90;
  double max;
  double weights_entropy;

  bool operator==(const ExperimentRecord&) const = default;
};

/// Raised when a per-sample loss is not finite; names the dataset index.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t sample_index, std::size_t step)
      : std::runtime_error("non-finite adversarial loss for sample " +
                           std::to_string(sample_index) + " at step " + std::to_string(step)),
        sample_index_(sample_index) {}
  std::size_t sample_index() const { return sample_index_; }

 private:
  std::size_t sample_index_;
};

/// Linear-interpolation quantile (position q (n - 1) in the sorted values).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double entropy(const std::vector<double>& w) {
  double h = 0.0;
  for (double x : w) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

/// Draws minibatches as consecutive slices of per-epoch random permutations.
/// A batch that runs past the end of an epoch continues into the next one.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {
    if (n == 0) throw std::invalid_argument("EpochSampler: empty dataset");
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    for (std::size_t i = n_; i > 1; --i) {
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_() % i)]);
    }
    pos_ = 0;
  }

  std::size_t n_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Per-sample adversarial loss minimized by training. CAT uses its log-ratio
/// directly; CAPO uses the IPO quadratic, the negation of capo_loss.
inline double adversarial_loss(BaseMethod method, const ToyModelParams& params,
                               const ReferenceParams& ref, const PreferenceSample& sample,
                               const Vector& delta, double beta) {
  if (method == BaseMethod::Cat) return cat_loss(params, ref, sample, delta);
  return -capo_loss(params, ref, sample, delta, beta);
}

inline ParamGradient adversarial_loss_grad(BaseMethod method, const ToyModelParams& params,
                                           const ReferenceParams& ref,
                                           const PreferenceSample& sample, const Vector& delta,
                                           double beta) {
  if (method == BaseMethod::Cat) {
    return loss_grad_params(LossKind::Cat, params, ref, sample, delta, beta);
  }
  ParamGradient g = loss_grad_params(LossKind::Capo, params, ref, sample, delta, beta);
  g *= -1.0;
  return g;
}

/// sum_i w_i grads_i.
inline ParamGradient weighted_gradient(const std::vector<ParamGradient>& grads,
                                       const std::vector<double>& weights) {
  if (grads.empty() || grads.size() != weights.size()) {
    throw std::invalid_argument("weighted_gradient: size mismatch");
  }
  ParamGradient total =
      ToyModelParams::zeros(grads.front().vocab_size(), grads.front().embed_dim());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    ParamGradient g = grads[i];
    g *= weights[i];
    total += g;
  }
  return total;
}

/// Everything one step computes before touching the parameters.
struct StepEvaluation {
  std::vector<double> losses;
  std::vector<ParamGradient> grads;
  std::vector<Vector> deltas;
};

inline StepEvaluation evaluate_adversarial_batch(const ToyModelParams& params,
                                                 const ReferenceParams& ref,
                                                 const std::vector<PreferenceSample>& data,
                                                 const std::vector<std::size_t>& indices,
                                                 const TrainConfig& cfg, std::size_t step) {
  StepEvaluation ev;
  for (auto idx : indices) {
    const auto& sample = data[idx];
    Vector delta = run_attack(params, ref, sample, cfg.attack);
    const double l = adversarial_loss(cfg.loss_kind, params, ref, sample, delta, cfg.beta);
    if (!std::isfinite(l)) throw NonFiniteLoss(idx, step);
    ev.losses.push_back(l);
    ev.grads.push_back(adversarial_loss_grad(cfg.loss_kind, params, ref, sample, delta, cfg.beta));
    ev.deltas.push_back(std::move(delta));
  }
  return ev;
}

struct TrainResult {
  ToyModelParams params;
  std::vector<ExperimentRecord> records;
  DualState dual;
};

struct TrainHooks {
  /// Called every cfg.checkpoint_every steps (1-based step count) and once at the end.
  std::function<void(std::size_t steps_done, const ToyModelParams&)> on_checkpoint;
  /// Called after each record is produced.
  std::function<void(const ExperimentRecord&)> on_record;
};

/**
 * Distributionally robust adversarial training of the toy model.
 *
 * Each step: draw a minibatch, attack every sample, evaluate per-sample
 * losses, resolve lambda from those losses, aggregate (log-sum-exp dual or
 * plain mean), add the utility term if enabled and take one gradient step.
 * lambda is held constant inside the step; the parameter gradient of the
 * DRO aggregate is sum_i w_i grad L_i with w the softmax tilt.
 */
inline TrainResult train(const ToyModelParams& initial, const std::vector<PreferenceSample>& adv_data,
                         const std::vector<UtilitySample>& util_data, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  initial.validate();
  if (adv_data.empty()) throw std::invalid_argument("train: adversarial data is empty");
  if (cfg.use_utility && util_data.empty()) {
    throw std::invalid_argument("train: use_utility is set but utility data is empty");
  }
  for (const auto& s : adv_data) validate_sample(s, initial.vocab_size());
  for (const auto& s : util_data) validate_sample(s, initial.vocab_size());

  const ReferenceParams ref(initial);
  ToyModelParams params = initial;
  DualState dual = DualState::initial(cfg.dro);
  EpochSampler adv_sampler(adv_data.size(), cfg.seed);
  std::optional<EpochSampler> util_sampler;
  if (cfg.use_utility) util_sampler.emplace(util_data.size(), cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<ExperimentRecord> records;
  records.reserve(cfg.iterations);
  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    const auto indices = adv_sampler.next(cfg.batch_size);
    StepEvaluation ev = evaluate_adversarial_batch(params, ref, adv_data, indices, cfg, step);
    const LossBatch batch(ev.losses);

    auto [lambda, next_dual] = resolve_lambda(std::move(dual), batch, cfg.dro, step);
    dual = std::move(next_dual);

    double agg = 0.0;
    std::vector<double> weights;
    if (cfg.aggregation == Aggregation::Dro) {
      agg = kl_dual_objective(batch, lambda, cfg.dro);
      weights = kl_weights(batch, lambda, cfg.dro);
    } else {
      agg = batch.mean();
      weights.assign(batch.size(), 1.0 / static_cast<double>(batch.size()));
    }
    ParamGradient grad = weighted_gradient(ev.grads, weights);

    std::optional<double> util;
    if (cfg.use_utility) {
      const auto uidx = util_sampler->next(cfg.batch_size);
      double u = 0.0;
      const double scale = cfg.utility_weight / static_cast<double>(uidx.size());
      for (auto j : uidx) {
        u += utility_loss(params, util_data[j]);
        ParamGradient g = loss_grad_params(params, util_data[j]);
        g *= scale;
        grad += g;
      }
      util = u / static_cast<double>(uidx.size());
    }

    grad *= -cfg.model_lr;
    params += grad;

    records.push_back(ExperimentRecord{step, lambda, agg, util, quantile(ev.losses, 0.5),
                                       quantile(ev.losses, 0.9), batch.max(), entropy(weights)});
    if (hooks.on_record) hooks.on_record(records.back());
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(step + 1, params);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(cfg.iterations, params);
  return {std::move(params), std::move(records), std::move(dual)};
}

/// Metrics of a trained model over the full datasets, with every adversarial
/// sample attacked afresh.
struct Evaluation {
  double p90_adv_loss;
  double mean_adv_loss;
  double max_adv_loss;
  double p50_adv_loss;
  double utility_loss;
};

inline Evaluation evaluate(const ToyModelParams& params, const ReferenceParams& ref,
                           const std::vector<PreferenceSample>& adv_data,
                           const std::vector<UtilitySample>& util_data, const TrainConfig& cfg) {
  std::vector<double> losses;
  losses.reserve(adv_data.size());
  for (const auto& s : adv_data) {
    const Vector delta = run_attack(params, ref, s, cfg.attack);
    losses.push_back(adversarial_loss(cfg.loss_kind, params, ref, s, delta, cfg.beta));
  }
  double mean = 0.0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(losses.size());
  double u = 0.0;
  for (const auto& s : util_data) u += utility_loss(params, s);
  if (!util_data.empty()) u /= static_cast<double>(util_data.size());
  return {quantile(losses, 0.9), mean, *std::max_element(losses.begin(), losses.end()),
          quantile(losses, 0.5), u};
}

namespace detail {

inline double relative_error(const ParamGradient& a, const ParamGradient& b) {
  const double diff = std::sqrt((a.embed - b.embed).squaredNorm() + (a.out - b.out).squaredNorm());
  const double scale = std::max(std::sqrt(a.squared_norm()), std::sqrt(b.squared_norm()));
  if (scale == 0.0) return 0.0;
  return diff / scale;
}

// Central differences of fn over every parameter entry.
template <typename F>
ParamGradient finite_difference_gradient(const ToyModelParams& params, F&& fn, double h) {
  ParamGradient g = ToyModelParams::zeros(params.vocab_size(), params.embed_dim());
  ToyModelParams p = params;
  auto sweep = [&](Matrix& target, Matrix& out) {
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const double orig = target.data()[i];
      target.data()[i] = orig + h;
      const double fp = fn(p);
      target.data()[i] = orig - h;
      const double fm = fn(p);
      target.data()[i] = orig;
      out.data()[i] = (fp - fm) / (2.0 * h);
    }
  };
  sweep(p.embed, g.embed);
  sweep(p.out, g.out);
  return g;
}

}  // namespace detail

struct ChainRuleReport {
  double max_relative_error;
  double lambda;
  std::size_t batch_size;
};

/**
 * Checks the assembled DRO gradient sum_i w_i grad L_i against central finite
 * differences of theta -> kl_dual_objective(L(theta), lambda) on a small random
 * instance (V = 4, d = 2, B = 3). Perturbations come from the attack at the
 * unperturbed parameters and stay fixed; lambda is cfg.dro.lambda_init.
 */
inline ChainRuleReport chain_rule_check(const TrainConfig& cfg, std::uint64_t instance_seed) {
  constexpr std::size_t kVocab = 4, kDim = 2, kBatch = 3;
  std::mt19937_64 rng(instance_seed);
  const ToyModelParams params = ToyModelParams::random(kVocab, kDim, rng(), 0.7);
  const ReferenceParams ref(ToyModelParams::random(kVocab, kDim, rng(), 0.7));
  std::vector<PreferenceSample> samples;
  for (std::size_t i = 0; i < kBatch; ++i) {
    const std::size_t y = rng() % kVocab;
    const std::size_t yh = (y + 1 + rng() % (kVocab - 1)) % kVocab;
    samples.push_back({{static_cast<std::size_t>(rng() % kVocab), static_cast<std::size_t>(rng() % kVocab)}, y, yh});
  }
  std::vector<Vector> deltas;
  for (const auto& s : samples) deltas.push_back(run_attack(params, ref, s, cfg.attack));

  const double lambda = cfg.dro.lambda_init;
  auto losses_at = [&](const ToyModelParams& p) {
    std::vector<double> l;
    for (std::size_t i = 0; i < kBatch; ++i) {
      l.push_back(adversarial_loss(cfg.loss_kind, p, ref, samples[i], deltas[i], cfg.beta));
    }
    return l;
  };
  const LossBatch batch(losses_at(params));
  std::vector<ParamGradient> grads;
  for (std::size_t i = 0; i < kBatch; ++i) {
    grads.push_back(adversarial_loss_grad(cfg.loss_kind, params, ref, samples[i], deltas[i], cfg.beta));
  }
  const ParamGradient analytic = weighted_gradient(grads, kl_weights(batch, lambda, cfg.dro));
  const ParamGradient numeric = detail::finite_difference_gradient(
      params,
      [&](const ToyModelParams& p) { return kl_dual_objective(LossBatch(losses_at(p)), lambda, cfg.dro); },
      1e-5);
  return {detail::relative_error(analytic, numeric), lambda, kBatch};
}

}  // namespace warden
