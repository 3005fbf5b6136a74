#pragma once

// Sampler families and their event transitions: within-model reflections and
// refreshes, plus the birth (reintroduction) kernel and death projection used
// for trans-dimensional moves.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"

namespace rjpdmp {

enum class Family { ZigZag, BpsGauss, BpsSphere };

constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::ZigZag: return "zigzag";
    case Family::BpsGauss: return "bps_gauss";
    case Family::BpsSphere: return "bps_sphere";
  }
  return "unknown";
}

inline std::optional<Family> family_from_string(std::string_view s) {
  for (auto f : {Family::ZigZag, Family::BpsGauss, Family::BpsSphere})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

constexpr VelocityDomain velocity_domain(Family f) {
  switch (f) {
    case Family::ZigZag: return VelocityDomain::PlusMinusOne;
    case Family::BpsSphere: return VelocityDomain::UnitSphere;
    case Family::BpsGauss: return VelocityDomain::Unconstrained;
  }
  return VelocityDomain::Unconstrained;
}

struct Dynamics {
  Family family = Family::ZigZag;
  double p_jump = 0.6;          // probability of leaving the model when a coordinate hits zero
  double lambda_refresh = 0.1;  // BPS only

  void validate() const {
    if (!(p_jump > 0.0 && p_jump < 1.0)) throw ConfigError("p_jump must lie in (0, 1), got " + std::to_string(p_jump));
    if (!(lambda_refresh >= 0.0) || !std::isfinite(lambda_refresh))
      throw ConfigError("lambda_refresh must be nonnegative, got " + std::to_string(lambda_refresh));
  }

  bool is_bps() const { return family != Family::ZigZag; }
};

// ---------------------------------------------------------------------------
// Within-model rates and transitions

/// max(0, v_j dU/dtheta_j), the switching rate of one ZigZag component.
inline double zigzag_rate_from_partial(double vel_j, double partial_j) {
  if (!std::isfinite(partial_j)) throw NumericalError("zigzag_rate: non-finite gradient");
  return std::max(0.0, vel_j * partial_j);
}

template <class Target>
double zigzag_rate(Index j, const SamplerState& state, const Target& target) {
  require(state.gamma[j], "zigzag_rate: coordinate must be active");
  return zigzag_rate_from_partial(state.vel[j], target.partial(j, state.theta, state.gamma));
}

/// max(0, <v, grad U>) over the active set; grad must be zero off the active set.
inline double bps_rate_from_gradient(const SamplerState& state, const Vector& grad) {
  double dot = 0.0;
  for (Index j = 0; j < state.dim(); ++j) {
    if (!state.gamma[j]) continue;
    if (!std::isfinite(grad[j])) throw NumericalError("bps_rate: non-finite gradient");
    dot += state.vel[j] * grad[j];
  }
  return std::max(0.0, dot);
}

template <class Target>
double bps_rate(const SamplerState& state, const Target& target) {
  require(state.active_count() >= 1, "bps_rate: empty model");
  return bps_rate_from_gradient(state, target.gradient(state.theta, state.gamma));
}

/// Reflects the velocity in the hyperplane orthogonal to the active gradient.
inline SamplerState bps_reflect(SamplerState state, const Vector& grad) {
  double gg = 0.0, vg = 0.0;
  for (Index j = 0; j < state.dim(); ++j) {
    if (!state.gamma[j]) continue;
    gg += grad[j] * grad[j];
    vg += state.vel[j] * grad[j];
  }
  if (!(gg > 0.0)) throw NumericalError("bps_reflect: zero gradient on active set");
  const double f = 2.0 * vg / gg;
  for (Index j = 0; j < state.dim(); ++j)
    if (state.gamma[j]) state.vel[j] -= f * grad[j];
  return state;
}

inline SamplerState zigzag_flip(Index j, SamplerState state) {
  require(j >= 0 && j < state.dim() && state.gamma[j], "zigzag_flip: coordinate must be active");
  state.vel[j] = -state.vel[j];
  return state;
}

// ---------------------------------------------------------------------------
// Trans-dimensional moves

/// Surface area of the unit sphere in R^d.
inline double sphere_area(double d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Family-specific factor multiplying p_jump * pi_with / pi_without in the
/// reintroduction rate, given the number k of active coordinates before the birth.
inline double birth_velocity_factor(Family family, Index k) {
  switch (family) {
    case Family::ZigZag: return 1.0;
    case Family::BpsGauss: return 2.0 / std::sqrt(2.0 * std::numbers::pi);
    case Family::BpsSphere: {
      if (k == 0) return 1.0;  // one-dimensional sphere is {-1, +1}: ZigZag rates
      const double kd = static_cast<double>(k);
      // 2 A(k) / (A(k+1) k), evaluated through log-gamma for large k
      const double log_ratio = std::lgamma(0.5 * (kd + 1.0)) - std::lgamma(0.5 * kd) - 0.5 * std::log(std::numbers::pi);
      return 2.0 * std::exp(log_ratio) / kd;
    }
  }
  return 1.0;
}

/// Reintroduction rate of one inactive coordinate. `prior_ratio` is the posterior
/// density ratio of the larger to the smaller model at theta_j = 0, which for
/// independent priors reduces to w / (1 - w) times the slab density at zero.
inline double birth_rate(Family family, double p_jump, Index active_count, double prior_ratio) {
  return p_jump * prior_ratio * birth_velocity_factor(family, active_count);
}

/// Independent Gaussian slab N(0, sigma2) with inclusion weight w.
inline double birth_rate(Family family, double p_jump, Index active_count, double w, double sigma2) {
  if (!(w > 0.0 && w < 1.0)) throw ConfigError("birth_rate: w must lie in (0, 1)");
  const double slab0 = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma2);
  return birth_rate(family, p_jump, active_count, w / (1.0 - w) * slab0);
}

/// Density of the new component's velocity alpha, for a birth that produces a
/// model with k_new active coordinates. ZigZag returns the probability mass of
/// alpha in {-1, +1}.
inline double birth_density(Family family, Index k_new, double alpha) {
  const double a = std::abs(alpha);
  switch (family) {
    case Family::ZigZag: return a == 1.0 ? 0.5 : 0.0;
    case Family::BpsGauss: return 0.5 * a * std::exp(-0.5 * alpha * alpha);
    case Family::BpsSphere: {
      if (k_new <= 1) return a == 1.0 ? 0.5 : 0.0;
      if (a >= 1.0) return 0.0;
      const double m = static_cast<double>(k_new - 1);  // active count before the birth
      return 0.5 * m * a * std::pow(1.0 - alpha * alpha, 0.5 * (m - 2.0));
    }
  }
  return 0.0;
}

/// G: the post-birth velocity built from alpha and the pre-birth velocity.
inline Vector recombine(Family family, double alpha, const Vector& old_vel, Index j) {
  Vector v = old_vel;
  if (family == Family::BpsSphere) v *= std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  v[j] = alpha;
  return v;
}

struct BirthDraw {
  double alpha = 0.0;
  Vector new_vel;
};

/// Draws alpha from the birth kernel and recombines. `old_vel` is the full
/// p-vector (zero off the pre-birth active set); `j` is the coordinate born.
inline BirthDraw sample_birth_velocity(Family family, Index k_new, const Vector& old_vel, Index j, Rng& rng) {
  require(k_new >= 1, "sample_birth_velocity: k_new must be positive");
  require(j >= 0 && j < old_vel.size(), "sample_birth_velocity: coordinate out of range");
  double alpha = 0.0;
  switch (family) {
    case Family::ZigZag: alpha = rng.sign(); break;
    case Family::BpsGauss: alpha = rng.sign() * std::sqrt(2.0 * rng.exponential()); break;
    case Family::BpsSphere: {
      if (k_new == 1) {
        alpha = rng.sign();
      } else {
        const double m = static_cast<double>(k_new - 1);
        const double s = rng.sign();
        alpha = s * std::sqrt(1.0 - std::pow(rng.uniform(), 2.0 / m));
      }
      break;
    }
  }
  return {alpha, recombine(family, alpha, old_vel, j)};
}

/// g: removes coordinate j at the zero boundary.
inline SamplerState death_project(Family family, Index j, SamplerState state) {
  require(j >= 0 && j < state.dim() && state.gamma[j], "death_project: coordinate must be active");
  require(state.theta[j] == 0.0, "death_project: coordinate must sit exactly at zero");
  state.gamma[j] = false;
  state.vel[j] = 0.0;
  if (family == Family::BpsSphere && state.active_count() >= 1) {
    // inverse of v' = sqrt(1 - alpha^2) v + alpha e_j with |v| = 1
    double norm2 = 0.0;
    for (Index i = 0; i < state.dim(); ++i)
      if (state.gamma[i]) norm2 += state.vel[i] * state.vel[i];
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0)) throw NumericalError("death_project: degenerate sphere velocity");
    for (Index i = 0; i < state.dim(); ++i)
      if (state.gamma[i]) state.vel[i] /= norm;
  }
  return state;
}

/// Draws a fresh velocity on the active set.
inline SamplerState refresh_velocity(Family family, SamplerState state, Rng& rng) {
  if (family == Family::ZigZag) throw ContractViolation("refresh_velocity: ZigZag has no refresh events");
  const Index k = state.active_count();
  require(k >= 1, "refresh_velocity: empty model");
  if (family == Family::BpsSphere && k == 1) {
    for (Index j = 0; j < state.dim(); ++j)
      if (state.gamma[j]) state.vel[j] = rng.sign();
    return state;
  }
  double norm2 = 0.0;
  for (Index j = 0; j < state.dim(); ++j) {
    if (!state.gamma[j]) continue;
    state.vel[j] = rng.normal();
    norm2 += state.vel[j] * state.vel[j];
  }
  if (family == Family::BpsSphere) {
    const double norm = std::sqrt(norm2);
    for (Index j = 0; j < state.dim(); ++j)
      if (state.gamma[j]) state.vel[j] /= norm;
  }
  return state;
}

/// Initial velocity for the given active set, drawn from the family's
/// stationary velocity law.
inline void draw_velocity(Family family, SamplerState& state, Rng& rng) {
  state.vel.setZero();
  if (state.active_count() == 0) return;
  if (family == Family::ZigZag) {
    for (Index j = 0; j < state.dim(); ++j)
      if (state.gamma[j]) state.vel[j] = rng.sign();
    return;
  }
  state = refresh_velocity(family, std::move(state), rng);
}

}  // namespace rjpdmp
