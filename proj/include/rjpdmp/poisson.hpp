#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "rjpdmp/errors.hpp"

namespace rjpdmp {

/// Linear-in-time dominating rate for thinning: bound(t) = max(0, a + b t), b >= 0.
/// Any true rate r(t) along the current segment satisfies r(t) <= bound(t),
/// and therefore also r(t) <= max(0, a) + b t.
struct BoundCoeffs {
  double a = 0.0;
  double b = 0.0;

  double at(double t) const { return std::max(0.0, a + b * t); }
};

/// First event time of an inhomogeneous Poisson process with rate max(0, a + b t),
/// obtained by inverting the integrated rate at -log(u). Returns nullopt when the
/// process never fires (b == 0 and a <= 0).
inline std::optional<double> simulate_linear_poisson(double a, double b, double u) {
  require(b >= 0.0, "simulate_linear_poisson: slope must be nonnegative");
  require(u > 0.0 && u <= 1.0, "simulate_linear_poisson: u must lie in (0, 1]");
  const double e = -std::log(u);
  if (b == 0.0) {
    if (a <= 0.0) return std::nullopt;
    return e / a;
  }
  if (a >= 0.0) {
    // a t + b t^2 / 2 = e, written to avoid cancellation when a^2 >> b e.
    return 2.0 * e / (a + std::sqrt(a * a + 2.0 * b * e));
  }
  // Rate is zero until t0 = -a / b, then grows with slope b.
  return -a / b + std::sqrt(2.0 * e / b);
}

inline std::optional<double> simulate_linear_poisson(const BoundCoeffs& c, double u) {
  return simulate_linear_poisson(c.a, c.b, u);
}

}  // namespace rjpdmp
