#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rjpdmp/errors.hpp"

namespace rjpdmp {

/// Dirac spike-and-slab prior: theta_j ~ w N(mu, sigma2) + (1 - w) delta_0.
struct SpikeSlabPrior {
  double w = 0.5;
  double sigma2 = 10.0;
  double mu = 0.0;

  void validate() const {
    if (!(w > 0.0 && w < 1.0)) throw ConfigError("prior inclusion weight w must lie in (0, 1), got " + std::to_string(w));
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw ConfigError("prior slab variance sigma2 must be positive, got " + std::to_string(sigma2));
    if (!std::isfinite(mu)) throw ConfigError("prior slab mean must be finite");
  }

  /// Slab density evaluated at zero.
  double slab_density_at_zero() const {
    return std::exp(-0.5 * mu * mu / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
  }

  /// Ratio of the model-with-j to model-without-j prior densities at theta_j = 0.
  double birth_ratio() const { return w / (1.0 - w) * slab_density_at_zero(); }

  /// w = p0 / p, the prior favouring models of expected size p0.
  static SpikeSlabPrior from_expected_size(double p0, long p, double sigma2) {
    SpikeSlabPrior prior{p0 / static_cast<double>(p), sigma2, 0.0};
    prior.validate();
    return prior;
  }
};

/// Continuous spike-and-slab prior: w N(0, tau2) + (1 - w) N(0, c^2 tau2).
struct ContinuousSpikeSlab {
  double w = 0.5;
  double tau2 = 16.0;
  double c = 0.1;

  void validate() const {
    if (!(w > 0.0 && w < 1.0)) throw ConfigError("continuous spike-and-slab: w must lie in (0, 1)");
    if (!(tau2 > 0.0)) throw ConfigError("continuous spike-and-slab: tau2 must be positive");
    if (!(c > 0.0 && c <= 1.0)) throw ConfigError("continuous spike-and-slab: c must lie in (0, 1]");
  }

  /// Largest curvature of -log density, i.e. the spike precision.
  double max_curvature() const { return 1.0 / (c * c * tau2); }
};

/// Derivative of -log(w N(theta; 0, tau2) + (1 - w) N(theta; 0, c^2 tau2)).
inline double cts_spike_slab_grad(double theta, const ContinuousSpikeSlab& prior) {
  const double s2_slab = prior.tau2;
  const double s2_spike = prior.c * prior.c * prior.tau2;
  const double l_slab = std::log(prior.w) - 0.5 * std::log(s2_slab) - 0.5 * theta * theta / s2_slab;
  const double l_spike = std::log1p(-prior.w) - 0.5 * std::log(s2_spike) - 0.5 * theta * theta / s2_spike;
  // responsibility of the slab component, computed as a logistic of the log-odds
  const double r_slab = 1.0 / (1.0 + std::exp(l_spike - l_slab));
  return theta * (r_slab / s2_slab + (1.0 - r_slab) / s2_spike);
}

inline double cts_spike_slab_neg_log_density(double theta, const ContinuousSpikeSlab& prior) {
  const double s2_slab = prior.tau2;
  const double s2_spike = prior.c * prior.c * prior.tau2;
  const double l_slab = std::log(prior.w) - 0.5 * std::log(2.0 * std::numbers::pi * s2_slab) - 0.5 * theta * theta / s2_slab;
  const double l_spike =
      std::log1p(-prior.w) - 0.5 * std::log(2.0 * std::numbers::pi * s2_spike) - 0.5 * theta * theta / s2_spike;
  const double m = std::max(l_slab, l_spike);
  return -(m + std::log(std::exp(l_slab - m) + std::exp(l_spike - m)));
}

}  // namespace rjpdmp
