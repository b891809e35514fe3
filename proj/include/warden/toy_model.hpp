// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace warden {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using TokenSequence = std::vector<std::size_t>;

/**
 * Single-token preference model. A prompt is mean-pooled over its token
 * embeddings, shifted by the perturbation delta, and projected to logits:
 *
 *   h = mean_k embed[x_k] + delta,   logits = out^T h,   p = softmax(logits)
 *
 * embed is V x d (one row per token), out is d x V.
 */
struct ToyModelParams {
  Matrix embed;
  Matrix out;

  std::size_t vocab_size() const { return static_cast<std::size_t>(embed.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(embed.cols()); }

  static ToyModelParams zeros(std::size_t vocab, std::size_t dim) {
    return {Matrix::Zero(vocab, dim), Matrix::Zero(dim, vocab)};
  }

  /// Independent N(0, scale^2) entries from a seeded generator.
  static ToyModelParams random(std::size_t vocab, std::size_t dim, std::uint64_t seed,
                               double scale = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    ToyModelParams p = zeros(vocab, dim);
    for (Eigen::Index i = 0; i < p.embed.size(); ++i) p.embed.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < p.out.size(); ++i) p.out.data()[i] = normal(rng);
    return p;
  }

  void validate() const {
    if (embed.rows() == 0 || embed.cols() == 0) {
      throw std::invalid_argument("ToyModelParams: empty dimensions");
    }
    if (out.rows() != embed.cols() || out.cols() != embed.rows()) {
      throw std::invalid_argument("ToyModelParams: embed is " + std::to_string(embed.rows()) +
                                  "x" + std::to_string(embed.cols()) + " but out is " +
                                  std::to_string(out.rows()) + "x" +
                                  std::to_string(out.cols()));
    }
    if (!embed.allFinite() || !out.allFinite()) {
      throw std::invalid_argument("ToyModelParams: non-finite entry");
    }
  }

  ToyModelParams& operator+=(const ToyModelParams& o) {
    embed += o.embed;
    out += o.out;
    return *this;
  }

  ToyModelParams& operator*=(double s) {
    embed *= s;
    out *= s;
    return *this;
  }

  double squared_norm() const { return embed.squaredNorm() + out.squaredNorm(); }
};

/// Gradients have the shape of the parameters.
using ParamGradient = ToyModelParams;

/// Frozen snapshot of the model taken before training.
class ReferenceParams {
 public:
  explicit ReferenceParams(ToyModelParams params) : params_(std::move(params)) {
    params_.validate();
  }
  const ToyModelParams& params() const { return params_; }

 private:
  ToyModelParams params_;
};

struct PreferenceSample {
  TokenSequence prompt;
  std::size_t desired;
  std::size_t undesired;
};

struct UtilitySample {
  TokenSequence prompt;
  std::size_t target;
};

inline void validate_sample(const PreferenceSample& s, std::size_t vocab) {
  if (s.prompt.empty()) throw std::invalid_argument("PreferenceSample: empty prompt");
  for (auto t : s.prompt) {
    if (t >= vocab) throw std::invalid_argument("PreferenceSample: prompt token out of range");
  }
  if (s.desired >= vocab || s.undesired >= vocab) {
    throw std::invalid_argument("PreferenceSample: response token out of range");
  }
  if (s.desired == s.undesired) {
    throw std::invalid_argument("PreferenceSample: desired and undesired coincide");
  }
}

inline void validate_sample(const UtilitySample& s, std::size_t vocab) {
  if (s.prompt.empty()) throw std::invalid_argument("UtilitySample: empty prompt");
  for (auto t : s.prompt) {
    if (t >= vocab) throw std::invalid_argument("UtilitySample: prompt token out of range");
  }
  if (s.target >= vocab) throw std::invalid_argument("UtilitySample: target out of range");
}

namespace detail {

struct ForwardPass {
  Vector hidden;
  Vector log_probs;

  Vector probs() const { return log_probs.array().exp().matrix(); }
};

inline Vector pooled_embedding(const ToyModelParams& params, const TokenSequence& prompt) {
  if (prompt.empty()) throw std::invalid_argument("forward: empty prompt");
  Vector h = Vector::Zero(params.embed.cols());
  for (auto t : prompt) {
    if (t >= params.vocab_size()) throw std::invalid_argument("forward: token out of range");
    h += params.embed.row(static_cast<Eigen::Index>(t)).transpose();
  }
  return h / static_cast<double>(prompt.size());
}

inline ForwardPass run_forward(const ToyModelParams& params, const TokenSequence& prompt,
                               const Vector& delta) {
  if (delta.size() != params.embed.cols()) {
    throw std::invalid_argument("forward: delta has length " + std::to_string(delta.size()) +
                                ", expected " + std::to_string(params.embed.cols()));
  }
  Vector h = pooled_embedding(params, prompt) + delta;
  Vector logits = params.out.transpose() * h;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return {std::move(h), (logits.array() - lse).matrix()};
}

inline Vector zero_delta(const ToyModelParams& params) { return Vector::Zero(params.embed.cols()); }

// Backpropagates a logit gradient g = dL/dlogits through the projection and
// mean pooling.
inline ParamGradient backprop_params(const ToyModelParams& params, const TokenSequence& prompt,
                                     const Vector& hidden, const Vector& g) {
  ParamGradient grad = ToyModelParams::zeros(params.vocab_size(), params.embed_dim());
  grad.out = hidden * g.transpose();
  const Vector dh = params.out * g / static_cast<double>(prompt.size());
  for (auto t : prompt) grad.embed.row(static_cast<Eigen::Index>(t)) += dh.transpose();
  return grad;
}

inline Vector unit(std::size_t vocab, std::size_t k) {
  Vector e = Vector::Zero(static_cast<Eigen::Index>(vocab));
  e(static_cast<Eigen::Index>(k)) = 1.0;
  return e;
}

}  // namespace detail

/// Next-token distribution for the perturbed prompt.
inline Vector forward(const ToyModelParams& params, const TokenSequence& prompt,
                      const Vector& delta) {
  return detail::run_forward(params, prompt, delta).probs();
}

/// log p(undesired | x + delta) - log p(desired | x + delta).
inline double cat_loss(const ToyModelParams& params, const ReferenceParams& /*ref*/,
                       const PreferenceSample& sample, const Vector& delta) {
  const auto fp = detail::run_forward(params, sample.prompt, delta);
  return fp.log_probs(static_cast<Eigen::Index>(sample.undesired)) -
         fp.log_probs(static_cast<Eigen::Index>(sample.desired));
}

/// Reference-normalized preference margin
///   h = [log p(y|x+delta) - log p0(y|x)] - [log p(yhat|x+delta) - log p0(yhat|x)].
inline double preference_margin(const ToyModelParams& params, const ReferenceParams& ref,
                                const PreferenceSample& sample, const Vector& delta) {
  const auto fp = detail::run_forward(params, sample.prompt, delta);
  const auto fr =
      detail::run_forward(ref.params(), sample.prompt, detail::zero_delta(ref.params()));
  const auto y = static_cast<Eigen::Index>(sample.desired);
  const auto yh = static_cast<Eigen::Index>(sample.undesired);
  return (fp.log_probs(y) - fr.log_probs(y)) - (fp.log_probs(yh) - fr.log_probs(yh));
}

/// IPO quadratic (h - 1/(2 beta))^2.
inline double ipo_quadratic(double margin, double beta) {
  const double r = margin - 0.5 / beta;
  return r * r;
}

/// Signed CAPO loss -(h - 1/(2 beta))^2. Never positive; zero exactly at the
/// IPO target margin.
inline double capo_loss(const ToyModelParams& params, const ReferenceParams& ref,
                        const PreferenceSample& sample, const Vector& delta, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("capo_loss: beta must be > 0");
  return -ipo_quadratic(preference_margin(params, ref, sample, delta), beta);
}

/// -log p(target | prompt), unperturbed.
inline double utility_loss(const ToyModelParams& params, const UtilitySample& sample) {
  const auto fp = detail::run_forward(params, sample.prompt, detail::zero_delta(params));
  return -fp.log_probs(static_cast<Eigen::Index>(sample.target));
}

/// Attack objective log p(undesired | x + delta), maximized over delta.
inline double attack_objective(const ToyModelParams& params, const PreferenceSample& sample,
                               const Vector& delta) {
  const auto fp = detail::run_forward(params, sample.prompt, delta);
  return fp.log_probs(static_cast<Eigen::Index>(sample.undesired));
}

enum class LossKind { Cat, Capo, Attack };

namespace detail {

// dL/dlogits for a preference-sample loss.
inline Vector logit_gradient(LossKind kind, const ToyModelParams& params,
                             const ReferenceParams& ref, const PreferenceSample& sample,
                             const ForwardPass& fp, const Vector& delta, double beta) {
  const std::size_t v = params.vocab_size();
  switch (kind) {
    case LossKind::Cat:
      // The log-partition terms cancel in the difference.
      return unit(v, sample.undesired) - unit(v, sample.desired);
    case LossKind::Capo: {
      if (!(beta > 0.0)) throw std::invalid_argument("capo gradient: beta must be > 0");
      const double h = preference_margin(params, ref, sample, delta);
      return -2.0 * (h - 0.5 / beta) * (unit(v, sample.desired) - unit(v, sample.undesired));
    }
    case LossKind::Attack:
      return unit(v, sample.undesired) - fp.probs();
  }
  throw std::logic_error("logit_gradient: unknown loss kind");
}

}  // namespace detail

/// Exact gradient of the selected per-sample loss with respect to (embed, out).
inline ParamGradient loss_grad_params(LossKind kind, const ToyModelParams& params,
                                      const ReferenceParams& ref, const PreferenceSample& sample,
                                      const Vector& delta, double beta) {
  const auto fp = detail::run_forward(params, sample.prompt, delta);
  const Vector g = detail::logit_gradient(kind, params, ref, sample, fp, delta, beta);
  return detail::backprop_params(params, sample.prompt, fp.hidden, g);
}

/// Exact gradient of utility_loss with respect to (embed, out).
inline ParamGradient loss_grad_params(const ToyModelParams& params, const UtilitySample& sample) {
  const auto fp = detail::run_forward(params, sample.prompt, detail::zero_delta(params));
  const Vector g = fp.probs() - detail::unit(params.vocab_size(), sample.target);
  return detail::backprop_params(params, sample.prompt, fp.hidden, g);
}

/// Exact gradient of the selected loss with respect to the perturbation.
inline Vector loss_grad_delta(LossKind kind, const ToyModelParams& params,
                              const ReferenceParams& ref, const PreferenceSample& sample,
                              const Vector& delta, double beta) {
  const auto fp = detail::run_forward(params, sample.prompt, delta);
  return params.out * detail::logit_gradient(kind, params, ref, sample, fp, delta, beta);
}

}  // namespace warden
