#pragma once

// Posterior targets. Each target exposes
//   - gradients of U = -log pi restricted to the active set,
//   - linear-in-time thinning bounds for the ZigZag and BPS reflection clocks,
//   - the reintroduction density ratio for each coordinate.
// The engine consumes them through the members documented on GlmTarget.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/poisson.hpp"
#include "rjpdmp/prior.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"

namespace rjpdmp {

/// Chain-local work counters.
struct EvalCounters {
  std::uint64_t grad_component_evals = 0;  // number of (datum, coordinate) derivative terms evaluated
};

struct Dataset {
  Matrix X;  // n x p
  Vector y;  // n

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  void validate(bool binary_response) const {
    if (X.rows() != y.size()) throw ConfigError("dataset: X and y row counts differ");
    if (X.cols() < 1) throw ConfigError("dataset: need at least one covariate");
    if (!X.allFinite() || !y.allFinite()) throw ConfigError("dataset: non-finite entries");
    if (binary_response)
      for (Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) throw ConfigError("dataset: logistic responses must be 0 or 1");
  }
};

// ---------------------------------------------------------------------------
// Per-observation losses, written as functions of the linear predictor eta.

/// U_i = log(1 + e^eta) - y eta.
struct LogisticLink {
  static constexpr const char* name = "logistic";
  static constexpr bool binary_response = true;
  static constexpr double curvature_upper = 0.25;  // sup of d2U_i/deta2
  static constexpr double curvature_abs = 0.25;    // sup of |d2U_i/deta2|
  static constexpr double score_abs_bound = 1.0;   // sup of |dU_i/deta|

  static double loss(double eta, double y) {
    // softplus(eta) - y eta
    const double sp = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    return sp - y * eta;
  }
  static double score(double eta, double y) {
    const double s = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    return s - y;
  }
  static double curvature(double eta, double) {
    const double s = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    return s * (1.0 - s);
  }
};

/// U_i = g(y - eta), g(e) = -log(exp(-e^2/2) + exp(-e^2/200) / 10).
struct RobustLink {
  static constexpr const char* name = "robust";
  static constexpr bool binary_response = false;
  // g'' ranges over [-1.00949..., 0.91]; the ZigZag bound needs the absolute value.
  static constexpr double curvature_upper = 1.0;
  static constexpr double curvature_abs = 1.01;
  static constexpr double score_abs_bound = std::numeric_limits<double>::infinity();

  static double g(double e) {
    const double l1 = -0.5 * e * e;
    const double l2 = std::log(0.1) - e * e / 200.0;
    const double m = std::max(l1, l2);
    return -(m + std::log(std::exp(l1 - m) + std::exp(l2 - m)));
  }
  static double g_prime(double e) {
    // weight of the wide component, as a logistic of its log-odds
    const double log_odds = std::log(0.1) - e * e / 200.0 + 0.5 * e * e;
    const double r_wide = log_odds > 0.0 ? 1.0 / (1.0 + std::exp(-log_odds)) : std::exp(log_odds) / (1.0 + std::exp(log_odds));
    return e * (1.0 - 0.99 * r_wide);
  }
  static double g_second(double e) {
    const double log_odds = std::log(0.1) - e * e / 200.0 + 0.5 * e * e;
    const double r_wide = log_odds > 0.0 ? 1.0 / (1.0 + std::exp(-log_odds)) : std::exp(log_odds) / (1.0 + std::exp(log_odds));
    return 1.0 - 0.99 * r_wide - 0.9801 * e * e * r_wide * (1.0 - r_wide);
  }
  static double loss(double eta, double y) { return g(y - eta); }
  static double curvature(double eta, double y) { return g_second(y - eta); }
  static double score(double eta, double y) { return -g_prime(y - eta); }
};

// ---------------------------------------------------------------------------
// Free-function forms of the gradients and bounds.

namespace detail {

inline Vector linear_predictor(const Matrix& X, const Vector& theta, const Mask& gamma) {
  Vector eta = Vector::Zero(X.rows());
  for (Index j = 0; j < X.cols(); ++j)
    if (gamma[j] && theta[j] != 0.0) eta.noalias() += theta[j] * X.col(j);
  return eta;
}

template <class Link>
Vector scores(const Dataset& data, const Vector& eta) {
  Vector s(eta.size());
  for (Index i = 0; i < eta.size(); ++i) s[i] = Link::score(eta[i], data.y[i]);
  return s;
}

template <class Link>
Vector glm_gradient(const Vector& theta, const Mask& gamma, const Dataset& data, const SpikeSlabPrior& prior) {
  const Index p = theta.size();
  Vector grad = Vector::Zero(p);
  Vector s;
  if (data.n() > 0) s = scores<Link>(data, linear_predictor(data.X, theta, gamma));
  for (Index j = 0; j < p; ++j) {
    if (!gamma[j]) continue;
    grad[j] = (theta[j] - prior.mu) / prior.sigma2;
    if (data.n() > 0) grad[j] += data.X.col(j).dot(s);
  }
  return grad;
}

}  // namespace detail

/// Gradient of -log posterior for logistic regression on the active set (zeros elsewhere).
inline Vector logistic_grad(const Vector& theta, const Mask& gamma, const Dataset& data, const SpikeSlabPrior& prior) {
  return detail::glm_gradient<LogisticLink>(theta, gamma, data, prior);
}

/// Gradient of -log posterior for the two-component robust regression likelihood.
inline Vector robust_grad(const Vector& theta, const Mask& gamma, const Dataset& data, const SpikeSlabPrior& prior) {
  return detail::glm_gradient<RobustLink>(theta, gamma, data, prior);
}

/// BPS bound: a = <v, grad U(theta)>, b = |v|^2 / sigma2 + c sum_i (x_i^T v)^2.
inline BoundCoeffs bound_bps(const Vector& vel, const Vector& grad, const Mask& gamma, const Dataset& data,
                             const SpikeSlabPrior& prior, double c) {
  double a = 0.0, vv = 0.0;
  for (Index j = 0; j < vel.size(); ++j) {
    if (!gamma[j]) continue;
    a += vel[j] * grad[j];
    vv += vel[j] * vel[j];
  }
  double quad = 0.0;
  if (data.n() > 0 && vv > 0.0) quad = detail::linear_predictor(data.X, vel, gamma).squaredNorm();
  return {a, vv / prior.sigma2 + c * quad};
}

template <class Link>
BoundCoeffs bound_bps(const Vector& theta, const Vector& vel, const Mask& gamma, const Dataset& data,
                      const SpikeSlabPrior& prior, double c) {
  return bound_bps(vel, detail::glm_gradient<Link>(theta, gamma, data, prior), gamma, data, prior, c);
}

/// ZigZag bound for coordinate j: a = v_j dU/dtheta_j,
/// b = v_j^2 / sigma2 + c sum_i |x_ij v_j x_i^T v|.
inline BoundCoeffs bound_zigzag(Index j, const Vector& vel, double partial_j, const Vector& xv, const Dataset& data,
                                const SpikeSlabPrior& prior, double c) {
  double data_slope = 0.0;
  if (data.n() > 0) data_slope = (data.X.col(j).array() * xv.array()).abs().sum() * std::abs(vel[j]);
  return {vel[j] * partial_j, vel[j] * vel[j] / prior.sigma2 + c * data_slope};
}

template <class Link>
BoundCoeffs bound_zigzag(Index j, const Vector& theta, const Vector& vel, const Mask& gamma, const Dataset& data,
                         const SpikeSlabPrior& prior, double c) {
  const Vector grad = detail::glm_gradient<Link>(theta, gamma, data, prior);
  Vector xv = Vector::Zero(data.n());
  if (data.n() > 0) xv = detail::linear_predictor(data.X, vel, gamma);
  return bound_zigzag(j, vel, grad[j], xv, data, prior, c);
}

// ---------------------------------------------------------------------------
// Target classes consumed by the engine.

/// Generalized linear model posterior under a Dirac spike-and-slab prior.
///
/// Engine interface (shared by every target in this header):
///   dim(), trans_dimensional(), birth_ratio(j),
///   zigzag_bounds(state, active, out, counters)   - bounds for every active coordinate
///   zigzag_rate(j, state, rng, counters)          - true switching rate of coordinate j
///   bps_bound(state, counters)
///   bps_rate(state, rng, grad_out, counters)      - true BPS rate; grad_out drives the reflection
template <class Link>
class GlmTarget {
 public:
  using link_type = Link;

  GlmTarget(std::shared_ptr<const Dataset> data, SpikeSlabPrior prior) : data_(std::move(data)), prior_(prior) {
    if (!data_) throw ConfigError("GlmTarget: missing dataset");
    prior_.validate();
    data_->validate(Link::binary_response);
  }

  Index dim() const { return data_->p(); }
  bool trans_dimensional() const { return true; }
  const Dataset& data() const { return *data_; }
  const std::shared_ptr<const Dataset>& data_ptr() const { return data_; }
  const SpikeSlabPrior& prior() const { return prior_; }
  double birth_ratio(Index) const { return prior_.birth_ratio(); }

  double neg_log_posterior(const Vector& theta, const Mask& gamma) const {
    const Vector eta = detail::linear_predictor(data_->X, theta, gamma);
    double u = 0.0;
    for (Index i = 0; i < eta.size(); ++i) u += Link::loss(eta[i], data_->y[i]);
    for (Index j = 0; j < theta.size(); ++j)
      if (gamma[j]) u += 0.5 * (theta[j] - prior_.mu) * (theta[j] - prior_.mu) / prior_.sigma2;
    return u;
  }

  Vector gradient(const Vector& theta, const Mask& gamma) const {
    return detail::glm_gradient<Link>(theta, gamma, *data_, prior_);
  }

  double partial(Index j, const Vector& theta, const Mask& gamma) const {
    const Vector eta = detail::linear_predictor(data_->X, theta, gamma);
    return partial_from_eta(j, theta, eta);
  }

  /// Score of observation i at linear predictor eta.
  double datum_score(Index i, double eta) const { return Link::score(eta, data_->y[i]); }

  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters& counters) const {
    out.resize(active.size());
    const Index n = data_->n();
    Vector sc, xv;
    if (n > 0) {
      sc = detail::scores<Link>(*data_, detail::linear_predictor(data_->X, s.theta, s.gamma));
      xv = detail::linear_predictor(data_->X, s.vel, s.gamma);
    }
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Index j = active[k];
      double partial_j = (s.theta[j] - prior_.mu) / prior_.sigma2;
      if (n > 0) partial_j += data_->X.col(j).dot(sc);
      if (!std::isfinite(partial_j)) throw NumericalError("GlmTarget: non-finite gradient");
      out[k] = bound_zigzag(j, s.vel, partial_j, xv, *data_, prior_, Link::curvature_abs);
    }
    counters.grad_component_evals += static_cast<std::uint64_t>(n) * active.size();
  }

  double zigzag_rate(Index j, const SamplerState& s, Rng&, EvalCounters& counters) const {
    counters.grad_component_evals += static_cast<std::uint64_t>(data_->n());
    return zigzag_rate_value(s.vel[j], partial(j, s.theta, s.gamma));
  }

  BoundCoeffs bps_bound(const SamplerState& s, EvalCounters& counters) const {
    counters.grad_component_evals += static_cast<std::uint64_t>(data_->n()) * s.active_count();
    const Vector grad = gradient(s.theta, s.gamma);
    check_finite(grad);
    return bound_bps(s.vel, grad, s.gamma, *data_, prior_, Link::curvature_upper);
  }

  double bps_rate(const SamplerState& s, Rng&, Vector& grad_out, EvalCounters& counters) const {
    counters.grad_component_evals += static_cast<std::uint64_t>(data_->n()) * s.active_count();
    grad_out = gradient(s.theta, s.gamma);
    check_finite(grad_out);
    double dot = 0.0;
    for (Index j = 0; j < s.dim(); ++j)
      if (s.gamma[j]) dot += s.vel[j] * grad_out[j];
    return std::max(0.0, dot);
  }

 private:
  static double zigzag_rate_value(double v, double partial_j) {
    if (!std::isfinite(partial_j)) throw NumericalError("GlmTarget: non-finite gradient");
    return std::max(0.0, v * partial_j);
  }
  static void check_finite(const Vector& g) {
    if (!g.allFinite()) throw NumericalError("GlmTarget: non-finite gradient");
  }
  double partial_from_eta(Index j, const Vector& theta, const Vector& eta) const {
    double d = (theta[j] - prior_.mu) / prior_.sigma2;
    for (Index i = 0; i < eta.size(); ++i) d += data_->X(i, j) * Link::score(eta[i], data_->y[i]);
    return d;
  }

  std::shared_ptr<const Dataset> data_;
  SpikeSlabPrior prior_;
};

using LogisticTarget = GlmTarget<LogisticLink>;
using RobustTarget = GlmTarget<RobustLink>;

/// Independent coordinates with prior w N(mu_j, sigma2_j) + (1 - w) delta_0 and an
/// optional Gaussian observation y_j ~ N(theta_j, s2_j) per coordinate. All
/// posterior summaries are available in closed form. With no observations the
/// target is the prior itself, e.g. 0.5 N(0.5, 1) + 0.5 delta_0.
class GaussianSpikeSlabTarget {
 public:
  struct Coordinate {
    double w = 0.5;
    double mu = 0.0;
    double sigma2 = 1.0;
    double obs = 0.0;
    double obs_var = std::numeric_limits<double>::infinity();  // infinite: no observation
  };

  GaussianSpikeSlabTarget(Index p, Coordinate c) : coords_(static_cast<std::size_t>(p), c) { validate(); }
  explicit GaussianSpikeSlabTarget(std::vector<Coordinate> coords) : coords_(std::move(coords)) { validate(); }

  Index dim() const { return static_cast<Index>(coords_.size()); }
  bool trans_dimensional() const { return true; }
  const Coordinate& coordinate(Index j) const { return coords_[static_cast<std::size_t>(j)]; }

  double birth_ratio(Index j) const {
    const auto& c = coordinate(j);
    return c.w / (1.0 - c.w) * std::exp(-0.5 * c.mu * c.mu / c.sigma2) / std::sqrt(2.0 * std::numbers::pi * c.sigma2);
  }

  double precision(Index j) const {
    const auto& c = coordinate(j);
    return 1.0 / c.sigma2 + (std::isfinite(c.obs_var) ? 1.0 / c.obs_var : 0.0);
  }

  double partial(Index j, const Vector& theta, const Mask&) const {
    const auto& c = coordinate(j);
    double d = (theta[j] - c.mu) / c.sigma2;
    if (std::isfinite(c.obs_var)) d += (theta[j] - c.obs) / c.obs_var;
    return d;
  }

  Vector gradient(const Vector& theta, const Mask& gamma) const {
    Vector g = Vector::Zero(theta.size());
    for (Index j = 0; j < theta.size(); ++j)
      if (gamma[j]) g[j] = partial(j, theta, gamma);
    return g;
  }

  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters& counters) const {
    out.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Index j = active[k];
      out[k] = {s.vel[j] * partial(j, s.theta, s.gamma), s.vel[j] * s.vel[j] * precision(j)};
    }
    counters.grad_component_evals += active.size();
  }

  double zigzag_rate(Index j, const SamplerState& s, Rng&, EvalCounters& counters) const {
    ++counters.grad_component_evals;
    return std::max(0.0, s.vel[j] * partial(j, s.theta, s.gamma));
  }

  BoundCoeffs bps_bound(const SamplerState& s, EvalCounters& counters) const {
    BoundCoeffs c{0.0, 0.0};
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      c.a += s.vel[j] * partial(j, s.theta, s.gamma);
      c.b += s.vel[j] * s.vel[j] * precision(j);
      ++counters.grad_component_evals;
    }
    return c;
  }

  double bps_rate(const SamplerState& s, Rng&, Vector& grad_out, EvalCounters& counters) const {
    grad_out = gradient(s.theta, s.gamma);
    counters.grad_component_evals += static_cast<std::uint64_t>(s.active_count());
    double dot = 0.0;
    for (Index j = 0; j < s.dim(); ++j)
      if (s.gamma[j]) dot += s.vel[j] * grad_out[j];
    return std::max(0.0, dot);
  }

  // Closed-form posterior summaries.

  double inclusion_probability(Index j) const {
    const auto& c = coordinate(j);
    if (!std::isfinite(c.obs_var)) return c.w;
    const auto log_normal = [](double x, double m, double v) {
      return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
    };
    const double l1 = std::log(c.w) + log_normal(c.obs, c.mu, c.sigma2 + c.obs_var);
    const double l0 = std::log1p(-c.w) + log_normal(c.obs, 0.0, c.obs_var);
    return 1.0 / (1.0 + std::exp(l0 - l1));
  }

  double conditional_mean(Index j) const {
    const auto& c = coordinate(j);
    if (!std::isfinite(c.obs_var)) return c.mu;
    return (c.mu / c.sigma2 + c.obs / c.obs_var) / precision(j);
  }

  double marginal_mean(Index j) const { return inclusion_probability(j) * conditional_mean(j); }

 private:
  void validate() const {
    if (coords_.empty()) throw ConfigError("GaussianSpikeSlabTarget: empty");
    for (const auto& c : coords_) {
      if (!(c.w > 0.0 && c.w < 1.0)) throw ConfigError("GaussianSpikeSlabTarget: w must lie in (0, 1)");
      if (!(c.sigma2 > 0.0)) throw ConfigError("GaussianSpikeSlabTarget: sigma2 must be positive");
      if (!(c.obs_var > 0.0)) throw ConfigError("GaussianSpikeSlabTarget: observation variance must be positive");
    }
  }

  std::vector<Coordinate> coords_;
};

/// Fixed-dimension target with independent continuous spike-and-slab priors and
/// an optional Gaussian observation per coordinate. No trans-dimensional moves.
class ContinuousSpikeSlabTarget {
 public:
  ContinuousSpikeSlabTarget(Index p, ContinuousSpikeSlab prior, double obs = 0.0,
                            double obs_var = std::numeric_limits<double>::infinity())
      : p_(p), prior_(prior), obs_(obs), obs_var_(obs_var) {
    prior_.validate();
    if (!(obs_var_ > 0.0)) throw ConfigError("ContinuousSpikeSlabTarget: observation variance must be positive");
  }

  Index dim() const { return p_; }
  bool trans_dimensional() const { return false; }
  double birth_ratio(Index) const { return 0.0; }
  const ContinuousSpikeSlab& prior() const { return prior_; }

  double partial(Index j, const Vector& theta, const Mask&) const {
    double d = cts_spike_slab_grad(theta[j], prior_);
    if (std::isfinite(obs_var_)) d += (theta[j] - obs_) / obs_var_;
    return d;
  }

  double neg_log_density(const Vector& theta) const {
    double u = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
      u += cts_spike_slab_neg_log_density(theta[j], prior_);
      if (std::isfinite(obs_var_)) u += 0.5 * (theta[j] - obs_) * (theta[j] - obs_) / obs_var_;
    }
    return u;
  }

  Vector gradient(const Vector& theta, const Mask& gamma) const {
    Vector g = Vector::Zero(theta.size());
    for (Index j = 0; j < theta.size(); ++j)
      if (gamma[j]) g[j] = partial(j, theta, gamma);
    return g;
  }

  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters& counters) const {
    out.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Index j = active[k];
      out[k] = {s.vel[j] * partial(j, s.theta, s.gamma), s.vel[j] * s.vel[j] * curvature()};
    }
    counters.grad_component_evals += active.size();
  }

  double zigzag_rate(Index j, const SamplerState& s, Rng&, EvalCounters& counters) const {
    ++counters.grad_component_evals;
    return std::max(0.0, s.vel[j] * partial(j, s.theta, s.gamma));
  }

  BoundCoeffs bps_bound(const SamplerState& s, EvalCounters& counters) const {
    BoundCoeffs c{0.0, 0.0};
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      c.a += s.vel[j] * partial(j, s.theta, s.gamma);
      c.b += s.vel[j] * s.vel[j] * curvature();
      ++counters.grad_component_evals;
    }
    return c;
  }

  double bps_rate(const SamplerState& s, Rng&, Vector& grad_out, EvalCounters& counters) const {
    grad_out = gradient(s.theta, s.gamma);
    counters.grad_component_evals += static_cast<std::uint64_t>(s.active_count());
    double dot = 0.0;
    for (Index j = 0; j < s.dim(); ++j)
      if (s.gamma[j]) dot += s.vel[j] * grad_out[j];
    return std::max(0.0, dot);
  }

 private:
  double curvature() const { return prior_.max_curvature() + (std::isfinite(obs_var_) ? 1.0 / obs_var_ : 0.0); }

  Index p_;
  ContinuousSpikeSlab prior_;
  double obs_;
  double obs_var_;
};

}  // namespace rjpdmp
