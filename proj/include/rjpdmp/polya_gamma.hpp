#pragma once

#include <cmath>
#include <numbers>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/rng.hpp"

namespace rjpdmp {

/// Mean of PG(b, c).
inline double pg_mean(double b, double c) {
  c = std::abs(c);
  if (c < 1e-6) return b * (0.25 - c * c / 48.0);
  return b / (2.0 * c) * std::tanh(0.5 * c);
}

/// Variance of PG(b, c).
inline double pg_variance(double b, double c) {
  c = std::abs(c);
  if (c < 1e-3) return b * (1.0 / 24.0 - c * c / 240.0);
  const double ch = std::cosh(0.5 * c);
  return b * (std::sinh(c) - c) / (4.0 * c * c * c * ch * ch);
}

namespace pg_detail {

constexpr double kTrunc = 0.64;

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// n-th coefficient of the alternating series for the J*(1, z) density.
inline double series_coef(int n, double x) {
  const double a = n + 0.5;
  if (x > kTrunc) return std::numbers::pi * a * std::exp(-0.5 * a * a * std::numbers::pi * std::numbers::pi * x);
  return std::numbers::pi * a * std::pow(2.0 / (std::numbers::pi * x), 1.5) * std::exp(-2.0 * a * a / x);
}

// Probability that an inverse Gaussian(mu = 1/z, shape 1) variable is below t,
// multiplied by exp(-z).
inline double ig_cdf_scaled(double t, double z) {
  const double rt = std::sqrt(1.0 / t);
  const double first = std::exp(-z) * norm_cdf(rt * (t * z - 1.0));
  const double tail = norm_cdf(-rt * (t * z + 1.0));
  const double second = tail > 0.0 ? std::exp(z + std::log(tail)) : 0.0;
  return first + second;
}

// Inverse Gaussian(mu = 1/z, shape 1) truncated to (0, t).
inline double truncated_ig(double z, double t, Rng& rng) {
  double x = t + 1.0;
  if (z < 1.0 / t) {
    // small z: propose from the truncated Levy law and accept with exp(-z^2 x / 2)
    double alpha = 0.0;
    for (;;) {
      double e1 = 0.0, e2 = 0.0;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      alpha = std::exp(-0.5 * z * z * x);
      if (rng.uniform() <= alpha) return x;
    }
  }
  const double mu = 1.0 / z;
  while (x > t) {
    const double n = rng.normal();
    const double y = n * n;
    const double my = mu * y;
    x = mu + 0.5 * mu * my - 0.5 * mu * std::sqrt(4.0 * my + my * my);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

// J*(1, z) by the alternating-series method.
inline double sample_jstar(double z, Rng& rng) {
  const double t = kTrunc;
  const double K = std::numbers::pi * std::numbers::pi / 8.0 + 0.5 * z * z;
  const double p = 0.5 * std::numbers::pi / K * std::exp(-K * t);
  const double q = 2.0 * ig_cdf_scaled(t, z);
  for (;;) {
    double x;
    if (rng.uniform() < p / (p + q))
      x = t + rng.exponential() / K;
    else
      x = truncated_ig(z, t, rng);
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

}  // namespace pg_detail

/// Draw from PG(b, z) as a sum of b independent PG(1, z) draws.
inline double sample_pg(int b, double z, Rng& rng) {
  require(b >= 1, "sample_pg: b must be a positive integer");
  const double half = 0.5 * std::abs(z);
  double sum = 0.0;
  for (int i = 0; i < b; ++i) sum += 0.25 * pg_detail::sample_jstar(half, rng);
  return sum;
}

}  // namespace rjpdmp
