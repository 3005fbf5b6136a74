#pragma once

// ZigZag and BPS with single-datum subsampling of the likelihood gradient.
// Reflection clocks use bounds that dominate the estimated rate for every
// datum index; reintroduction and boundary clocks stay exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/poisson.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp {

enum class SubsampleMode { Global, ControlVariate };

constexpr std::string_view to_string(SubsampleMode m) {
  return m == SubsampleMode::Global ? "global" : "cv";
}

inline std::optional<SubsampleMode> subsample_mode_from_string(std::string_view s) {
  if (s == "global" || s == "ss") return SubsampleMode::Global;
  if (s == "cv") return SubsampleMode::ControlVariate;
  return std::nullopt;
}

struct NewtonOptions {
  double grad_tol = 1e-8;
  int max_iter = 200;
};

/// Minimizes -log posterior over the coordinates in `mask` with Newton steps on
/// a positive-definite curvature surrogate and backtracking on the objective.
template <class Link>
Vector posterior_mode(const GlmTarget<Link>& target, const Mask& mask, const NewtonOptions& opt = {}) {
  const Dataset& d = target.data();
  const SpikeSlabPrior& prior = target.prior();
  std::vector<Index> idx;
  for (Index j = 0; j < d.p(); ++j)
    if (mask[j]) idx.push_back(j);
  const Index k = static_cast<Index>(idx.size());
  Vector theta = Vector::Zero(d.p());
  if (k == 0) return theta;
  Matrix Xs(d.n(), k);
  for (Index c = 0; c < k; ++c) Xs.col(c) = d.X.col(idx[c]);

  double obj = target.neg_log_posterior(theta, mask);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector grad_full = target.gradient(theta, mask);
    Vector g(k);
    for (Index c = 0; c < k; ++c) g[c] = grad_full[idx[c]];
    if (g.norm() < opt.grad_tol) return theta;
    const Vector eta = detail::linear_predictor(d.X, theta, mask);
    Vector wts(d.n());
    for (Index i = 0; i < d.n(); ++i) wts[i] = std::max(Link::curvature(eta[i], d.y[i]), 1e-3 * Link::curvature_upper);
    Matrix H = Xs.transpose() * wts.asDiagonal() * Xs;
    H.diagonal().array() += 1.0 / prior.sigma2;
    const Vector step = H.llt().solve(g);
    double scale = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, scale *= 0.5) {
      Vector cand = theta;
      for (Index c = 0; c < k; ++c) cand[idx[c]] -= scale * step[c];
      const double o = target.neg_log_posterior(cand, mask);
      if (o <= obj) {
        theta = std::move(cand);
        obj = o;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  const Vector grad_full = target.gradient(theta, mask);
  double gn = 0.0;
  for (Index j : idx) gn += grad_full[j] * grad_full[j];
  if (std::sqrt(gn) > std::max(opt.grad_tol, 1e-6))
    throw NumericalError("posterior_mode: Newton iteration did not converge");
  return theta;
}

/// Reference point and full-data likelihood gradient for one fixed model.
struct ControlVariate {
  Vector theta_ref;
  Vector grad_ref;  // likelihood part only, zero off the model
  Mask model_ref;

  template <class Link>
  static ControlVariate build(const GlmTarget<Link>& target, const Vector& theta_ref, const Mask& model) {
    require(theta_ref.size() == target.dim() && static_cast<Index>(model.size()) == target.dim(),
            "ControlVariate: dimension mismatch");
    ControlVariate cv;
    cv.model_ref = model;
    cv.theta_ref = theta_ref;
    for (Index j = 0; j < theta_ref.size(); ++j)
      if (!model[j]) cv.theta_ref[j] = 0.0;
    const Dataset& d = target.data();
    const Vector s = detail::scores<Link>(d, detail::linear_predictor(d.X, cv.theta_ref, model));
    cv.grad_ref = Vector::Zero(theta_ref.size());
    for (Index j = 0; j < theta_ref.size(); ++j)
      if (model[j]) cv.grad_ref[j] = d.X.col(j).dot(s);
    return cv;
  }

  template <class Link>
  static ControlVariate at_mode(const GlmTarget<Link>& target, const Mask& model, const NewtonOptions& opt = {}) {
    return build(target, posterior_mode(target, model, opt), model);
  }
};

/// Subsampled view of a GLM posterior. Exposes the same engine interface as
/// GlmTarget; every reflection proposal touches one datum.
template <class Link>
class SubsampledTarget {
 public:
  SubsampledTarget(GlmTarget<Link> full, SubsampleMode mode, std::optional<ControlVariate> cv = std::nullopt)
      : full_(std::move(full)), mode_(mode), cv_(std::move(cv)) {
    const Dataset& d = full_.data();
    if (d.n() < 1) throw ConfigError("subsampling needs at least one observation");
    if (mode_ == SubsampleMode::ControlVariate && !cv_) throw ConfigError("cv subsampling needs a control variate");
    const Index n = d.n(), p = d.p();
    row_norm_ = d.X.rowwise().norm();
    col_absmax_ = d.X.cwiseAbs().colwise().maxCoeff().transpose();
    max_row_norm_ = row_norm_.maxCoeff();
    // |s_i(0)| and the products used by the Lipschitz bounds
    score0_ = Vector(n);
    for (Index i = 0; i < n; ++i) score0_[i] = std::abs(Link::score(0.0, d.y[i]));
    col_score0_ = Vector(p);
    col_rownorm_ = Vector(p);
    for (Index j = 0; j < p; ++j) {
      col_score0_[j] = (d.X.col(j).cwiseAbs().array() * score0_.array()).maxCoeff();
      col_rownorm_[j] = (d.X.col(j).cwiseAbs().array() * row_norm_.array()).maxCoeff();
    }
    max_rownorm_score0_ = (row_norm_.array() * score0_.array()).maxCoeff();
    if (cv_) {
      const ControlVariate& c = *cv_;
      require(c.theta_ref.size() == p, "SubsampledTarget: control variate dimension mismatch");
      Vector ref_row_norm = Vector::Zero(n);
      for (Index j = 0; j < p; ++j)
        if (c.model_ref[j]) ref_row_norm.array() += d.X.col(j).array().square();
      ref_row_norm = ref_row_norm.cwiseSqrt();
      ref_col_rownorm_ = Vector(p);
      for (Index j = 0; j < p; ++j) ref_col_rownorm_[j] = (d.X.col(j).cwiseAbs().array() * ref_row_norm.array()).maxCoeff();
      ref_max_row_norm_ = ref_row_norm.maxCoeff();
      eta_ref_ = detail::linear_predictor(d.X, c.theta_ref, c.model_ref);
      score_ref_ = detail::scores<Link>(d, eta_ref_);
      // the stored gradient must be the full-data gradient at the reference
      Vector check = Vector::Zero(p);
      for (Index j = 0; j < p; ++j)
        if (c.model_ref[j]) check[j] = d.X.col(j).dot(score_ref_);
      if ((check - c.grad_ref).norm() > 1e-8 * (1.0 + check.norm()))
        throw ConfigError("control variate gradient does not match the data at its reference point");
    }
  }

  Index dim() const { return full_.dim(); }
  bool trans_dimensional() const { return true; }
  double birth_ratio(Index j) const { return full_.birth_ratio(j); }
  const GlmTarget<Link>& full() const { return full_; }
  SubsampleMode mode() const { return mode_; }
  const std::optional<ControlVariate>& control_variate() const { return cv_; }
  std::uint64_t cv_fallbacks() const { return fallbacks_; }

  /// True when the control variate applies to `gamma`.
  bool cv_active(const Mask& gamma) const { return mode_ == SubsampleMode::ControlVariate && gamma == cv_->model_ref; }

  /// Unbiased estimate of dU/dtheta_j from datum I (before the positive part).
  double partial_estimate(Index j, const SamplerState& s, Index I) const {
    const Dataset& d = full_.data();
    const double n = static_cast<double>(d.n());
    const double prior_term = (s.theta[j] - full_.prior().mu) / full_.prior().sigma2;
    const double eta = eta_of(I, s.theta, s.gamma);
    const double sc = Link::score(eta, d.y[I]);
    if (cv_active(s.gamma)) return cv_->grad_ref[j] + n * d.X(I, j) * (sc - score_ref_[I]) + prior_term;
    return n * d.X(I, j) * sc + prior_term;
  }

  /// Unbiased estimate of <v, grad U> from datum I.
  double directional_estimate(const SamplerState& s, Index I) const {
    const Dataset& d = full_.data();
    const double n = static_cast<double>(d.n());
    double xv = 0.0, prior_term = 0.0, ref_term = 0.0;
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      xv += d.X(I, j) * s.vel[j];
      prior_term += s.vel[j] * (s.theta[j] - full_.prior().mu) / full_.prior().sigma2;
    }
    const double sc = Link::score(eta_of(I, s.theta, s.gamma), d.y[I]);
    if (cv_active(s.gamma)) {
      for (Index j = 0; j < s.dim(); ++j)
        if (s.gamma[j]) ref_term += s.vel[j] * cv_->grad_ref[j];
      return ref_term + n * xv * (sc - score_ref_[I]) + prior_term;
    }
    return n * xv * sc + prior_term;
  }

  // Engine interface -------------------------------------------------------

  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters&) const {
    out.resize(active.size());
    const double n = static_cast<double>(full_.data().n());
    const double L = Link::curvature_abs;
    const double inv_s2 = 1.0 / full_.prior().sigma2;
    const double mu = full_.prior().mu;
    const bool use_cv = cv_active(s.gamma);
    if (!use_cv && mode_ == SubsampleMode::ControlVariate) ++fallbacks_;
    double vnorm = 0.0, offset = 0.0;
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      vnorm += s.vel[j] * s.vel[j];
      const double diff = use_cv ? s.theta[j] - cv_->theta_ref[j] : s.theta[j];
      offset += diff * diff;
    }
    vnorm = std::sqrt(vnorm);
    offset = std::sqrt(offset);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Index j = active[k];
      const double vj = s.vel[j];
      const double prior_a = vj * (s.theta[j] - mu) * inv_s2;
      const double prior_b = vj * vj * inv_s2;
      if (use_cv) {
        const double c = n * L * ref_col_rownorm_[j] * std::abs(vj);
        out[k] = {vj * cv_->grad_ref[j] + prior_a + c * offset, prior_b + c * vnorm};
      } else if constexpr (std::is_same_v<Link, LogisticLink>) {
        out[k] = {n * col_absmax_[j] * Link::score_abs_bound * std::abs(vj) + prior_a, prior_b};
      } else {
        const double c = n * L * col_rownorm_[j] * std::abs(vj);
        out[k] = {n * col_score0_[j] * std::abs(vj) + c * offset + prior_a, prior_b + c * vnorm};
      }
    }
  }

  double zigzag_rate(Index j, const SamplerState& s, Rng& rng, EvalCounters& counters) const {
    const Index I = static_cast<Index>(rng.below(static_cast<std::uint64_t>(full_.data().n())));
    ++counters.grad_component_evals;
    const double e = partial_estimate(j, s, I);
    if (!std::isfinite(e)) throw NumericalError("subsampled rate: non-finite gradient estimate");
    return std::max(0.0, s.vel[j] * e);
  }

  BoundCoeffs bps_bound(const SamplerState& s, EvalCounters&) const {
    const double n = static_cast<double>(full_.data().n());
    const double L = Link::curvature_abs;
    const double inv_s2 = 1.0 / full_.prior().sigma2;
    const double mu = full_.prior().mu;
    const bool use_cv = cv_active(s.gamma);
    if (!use_cv && mode_ == SubsampleMode::ControlVariate) ++fallbacks_;
    double vv = 0.0, offset = 0.0, prior_a = 0.0, ref_a = 0.0;
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      vv += s.vel[j] * s.vel[j];
      prior_a += s.vel[j] * (s.theta[j] - mu) * inv_s2;
      const double diff = use_cv ? s.theta[j] - cv_->theta_ref[j] : s.theta[j];
      offset += diff * diff;
      if (use_cv) ref_a += s.vel[j] * cv_->grad_ref[j];
    }
    const double vnorm = std::sqrt(vv);
    offset = std::sqrt(offset);
    if (use_cv) {
      const double r2 = ref_max_row_norm_ * ref_max_row_norm_;
      return {ref_a + prior_a + n * L * r2 * vnorm * offset, vv * inv_s2 + n * L * r2 * vv};
    }
    if constexpr (std::is_same_v<Link, LogisticLink>) {
      return {n * max_row_norm_ * Link::score_abs_bound * vnorm + prior_a, vv * inv_s2};
    } else {
      const double r2 = max_row_norm_ * max_row_norm_;
      return {n * vnorm * (max_rownorm_score0_ + L * r2 * offset) + prior_a, vv * inv_s2 + n * L * r2 * vv};
    }
  }

  double bps_rate(const SamplerState& s, Rng& rng, Vector& grad_out, EvalCounters& counters) const {
    const Dataset& d = full_.data();
    const Index I = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d.n())));
    const double n = static_cast<double>(d.n());
    const double sc = Link::score(eta_of(I, s.theta, s.gamma), d.y[I]);
    const bool use_cv = cv_active(s.gamma);
    const double coef = use_cv ? n * (sc - score_ref_[I]) : n * sc;
    grad_out = Vector::Zero(s.dim());
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      grad_out[j] = coef * d.X(I, j) + (s.theta[j] - full_.prior().mu) / full_.prior().sigma2;
      if (use_cv) grad_out[j] += cv_->grad_ref[j];
      ++counters.grad_component_evals;
    }
    if (!grad_out.allFinite()) throw NumericalError("subsampled rate: non-finite gradient estimate");
    double dot = 0.0;
    for (Index j = 0; j < s.dim(); ++j)
      if (s.gamma[j]) dot += s.vel[j] * grad_out[j];
    return std::max(0.0, dot);
  }

 private:
  double eta_of(Index I, const Vector& theta, const Mask& gamma) const {
    const Dataset& d = full_.data();
    double eta = 0.0;
    for (Index j = 0; j < d.p(); ++j)
      if (gamma[j]) eta += d.X(I, j) * theta[j];
    return eta;
  }

  GlmTarget<Link> full_;
  SubsampleMode mode_;
  std::optional<ControlVariate> cv_;
  Vector row_norm_, col_absmax_, score0_, col_score0_, col_rownorm_;
  double max_row_norm_ = 0.0;
  double max_rownorm_score0_ = 0.0;
  Vector ref_col_rownorm_, eta_ref_, score_ref_;
  double ref_max_row_norm_ = 0.0;
  mutable std::uint64_t fallbacks_ = 0;
};

/// Pre-positive-part ZigZag rate argument for coordinate j using datum I.
template <class Link>
double ss_rate_estimate(Index j, const SamplerState& s, Index I, const SubsampledTarget<Link>& target) {
  require(s.gamma[j], "ss_rate_estimate: coordinate must be active");
  return s.vel[j] * target.partial_estimate(j, s, I);
}

template <class Link>
BoundCoeffs ss_thinning_bound(Index j, const SamplerState& s, const SubsampledTarget<Link>& target) {
  require(s.gamma[j], "ss_thinning_bound: coordinate must be active");
  std::vector<BoundCoeffs> out;
  const Index idx[1] = {j};
  EvalCounters unused;
  target.zigzag_bounds(s, std::span<const Index>(idx, 1), out, unused);
  return out[0];
}

}  // namespace rjpdmp
