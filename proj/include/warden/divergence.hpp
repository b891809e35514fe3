// Copyright 2026 The Warden Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace warden {

/// A real number or +infinity, with the infinite case carried as an explicit
/// tag rather than a floating special value. Reading value() of an infinite
/// result throws, so callers have to branch on is_finite() first.
class ExtendedReal {
 public:
  explicit constexpr ExtendedReal(double v) : value_(v), infinite_(false) {}

  static constexpr ExtendedReal infinity() { return ExtendedReal(); }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }

  double value() const {
    if (infinite_) throw std::domain_error("ExtendedReal: value() of an infinite result");
    return value_;
  }

  /// Converts to double, mapping the infinite tag to +inf. Only for ordering
  /// comparisons inside solvers; never for arithmetic that must stay exact.
  double to_double() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

 private:
  constexpr ExtendedReal() : value_(0.0), infinite_(true) {}

  double value_;
  bool infinite_;
};

/**
 * A convex generator f on [0, inf) with f(1) = 0, together with its Legendre
 * transform f*(y) = sup_{t >= 0} { t y - f(t) }.
 *
 * f* is returned as an ExtendedReal so that generators whose conjugate is
 * infinite on part of the line can be expressed; both shipped specs are
 * finite everywhere.
 */
struct DivergenceSpec {
  std::string name;
  std::function<double(double)> f;
  std::function<ExtendedReal(double)> f_star;
  std::string f_star_domain_note;
};

namespace detail {

inline double xlogx(double t) {
  if (t == 0.0) return 0.0;
  return t * std::log(t);
}

}  // namespace detail

/// Kullback-Leibler: f(t) = t log t (f(0) = 0), f*(y) = exp(y - 1).
inline DivergenceSpec kl_spec() {
  return DivergenceSpec{
      "kl",
      [](double t) { return detail::xlogx(t); },
      [](double y) { return ExtendedReal(std::exp(y - 1.0)); },
      "finite on all of R",
  };
}

/// Pearson chi-square: f(t) = (t - 1)^2. The conjugate over t >= 0 is
/// y + y^2/4 for y >= -2 and the constant -1 below the kink.
inline DivergenceSpec chi2_spec() {
  return DivergenceSpec{
      "chi2",
      [](double t) { return (t - 1.0) * (t - 1.0); },
      [](double y) {
        if (y < -2.0) return ExtendedReal(-1.0);
        return ExtendedReal(y + 0.25 * y * y);
      },
      "finite on all of R; kink at y = -2 where the maximizer hits t = 0",
  };
}

/// Tolerance on |sum - 1| accepted by divergence_value.
inline constexpr double kSimplexTolerance = 1e-10;

/**
 * D_f(q || p) = sum_i p_i f(q_i / p_i). Returns the infinite tag when q is not
 * absolutely continuous with respect to p (some p_i = 0 with q_i > 0).
 * Coordinates with p_i = q_i = 0 contribute nothing.
 */
inline ExtendedReal divergence_value(const DivergenceSpec& spec, std::span<const double> q,
                                     std::span<const double> p) {
  if (q.size() != p.size()) {
    throw std::invalid_argument("divergence_value: q has " + std::to_string(q.size()) +
                                " entries but p has " + std::to_string(p.size()));
  }
  if (q.empty()) throw std::invalid_argument("divergence_value: empty distributions");
  double sq = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0.0 || p[i] < 0.0) {
      throw std::invalid_argument("divergence_value: negative probability");
    }
    sq += q[i];
    sp += p[i];
  }
  if (std::abs(sq - 1.0) > kSimplexTolerance || std::abs(sp - 1.0) > kSimplexTolerance) {
    throw std::invalid_argument("divergence_value: inputs must each sum to 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (p[i] == 0.0) {
      if (q[i] > 0.0) return ExtendedReal::infinity();
      continue;
    }
    total += p[i] * spec.f(q[i] / p[i]);
  }
  return ExtendedReal(total);
}

}  // namespace warden
