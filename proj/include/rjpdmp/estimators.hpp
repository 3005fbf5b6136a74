#pragma once

// Posterior summaries from skeletons and chains, and replicate-based
// efficiency metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rjpdmp/engine.hpp"
#include "rjpdmp/errors.hpp"
#include "rjpdmp/state.hpp"

namespace rjpdmp {

struct SummarySet {
  Vector ppi;
  Vector mean;
  std::map<std::string, Vector> cond_mean;  // keyed by PathAccumulator::mask_key
  std::optional<double> pred_mse;
};

namespace est_detail {

inline double burn_time(const Skeleton& sk, double burn_in) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("burn_in fraction must lie in [0, 1)");
  const double t0 = sk.initial.t;
  const double total = sk.t_final - t0;
  if (!(total > 0.0)) throw ContractViolation("skeleton covers no time");
  return t0 + burn_in * total;
}

inline PathAccumulator accumulate(const Skeleton& sk, double burn_in, bool per_model) {
  PathAccumulator acc(sk.dim(), burn_time(sk, burn_in), per_model);
  replay(sk, acc);
  return acc;
}

}  // namespace est_detail

/// Time-average of theta over the post-burn-in part of the path.
inline Vector path_integral_mean(const Skeleton& sk, double burn_in = 0.0) {
  return est_detail::accumulate(sk, burn_in, false).mean();
}

/// Fraction of post-burn-in time each coordinate spends active.
inline Vector path_ppi(const Skeleton& sk, double burn_in = 0.0) {
  return est_detail::accumulate(sk, burn_in, false).ppi();
}

/// Time-average of theta over the intervals spent in `mask`.
inline std::optional<Vector> conditional_mean(const Skeleton& sk, const Mask& mask, double burn_in = 0.0) {
  return est_detail::accumulate(sk, burn_in, true).conditional_mean(mask);
}

inline SummarySet summarize(const PathAccumulator& acc) {
  SummarySet s;
  s.ppi = acc.ppi();
  s.mean = acc.mean();
  for (const auto& [key, m] : acc.models())
    if (m.time > 0.0) s.cond_mean[key] = m.theta_integral / m.time;
  return s;
}

/// Positions of the path at t0 + stride, t0 + 2 stride, ... after burn-in (one row per draw).
inline Matrix discretize(const Skeleton& sk, double stride, double burn_in = 0.0) {
  require(stride > 0.0, "discretize: stride must be positive");
  const double start = est_detail::burn_time(sk, burn_in);
  const auto count = static_cast<Index>(std::floor((sk.t_final - start) / stride));
  Matrix draws(std::max<Index>(count, 0), sk.dim());
  const SamplerState* seg = &sk.initial;
  std::size_t next = 0;
  for (Index r = 0; r < draws.rows(); ++r) {
    const double t = start + static_cast<double>(r + 1) * stride;
    while (next < sk.events.size() && sk.events[next].t <= t) seg = &sk.events[next++].state_after;
    draws.row(r) = position_at(*seg, t).transpose();
  }
  return draws;
}

/// Average over draws (rows) of the mean squared prediction error on the holdout.
inline double predictive_mse(const Matrix& draws, const Dataset& holdout) {
  if (holdout.n() == 0) throw ConfigError("predictive_mse: empty holdout");
  if (draws.rows() == 0) throw ConfigError("predictive_mse: no parameter draws");
  require(draws.cols() == holdout.p(), "predictive_mse: dimension mismatch");
  const Matrix pred = holdout.X * draws.transpose();  // n x draws
  const Matrix resid = pred.colwise() - holdout.y;
  return resid.array().square().mean();
}

inline double predictive_mse(const Skeleton& sk, const Dataset& holdout, double stride, double burn_in = 0.0) {
  return predictive_mse(discretize(sk, stride, burn_in), holdout);
}

/// Streams the predictive squared error of the path sampled every `stride`
/// time units after `start_time`.
class PredictiveAccumulator {
 public:
  PredictiveAccumulator(std::shared_ptr<const Dataset> holdout, double stride, double start_time)
      : holdout_(std::move(holdout)), stride_(stride), next_(start_time + stride) {
    if (!holdout_ || holdout_->n() == 0) throw ConfigError("predictive_mse: empty holdout");
    require(stride > 0.0, "PredictiveAccumulator: stride must be positive");
  }

  void on_segment(const SamplerState& s, double t_end) {
    while (next_ <= t_end) {
      const Vector theta = position_at(s, next_);
      sum_ += (holdout_->X * theta - holdout_->y).squaredNorm() / static_cast<double>(holdout_->n());
      ++count_;
      next_ += stride_;
    }
  }
  void on_event(double, EventKind, Index, const SamplerState&) {}

  std::uint64_t count() const { return count_; }
  double value() const {
    if (count_ == 0) throw ConfigError("predictive_mse: no parameter draws");
    return sum_ / static_cast<double>(count_);
  }

 private:
  std::shared_ptr<const Dataset> holdout_;
  double stride_;
  double next_;
  double sum_ = 0.0;
  std::uint64_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Efficiency metrics

/// Replicate estimates of one vector quantity plus the cost of producing each.
struct ReplicateSet {
  std::vector<Vector> estimates;
  double iterations = 0.0;  // per replicate (average)
  double wall_time = 0.0;   // seconds per replicate (average)
};

struct QuantityReport {
  double sigma2 = 0.0;  // median over dimensions of the replicate MSE
  Vector mse_per_dim;
  double iterations = 0.0;
  double wall_time = 0.0;
  double ref_sigma2 = 0.0;
  double ref_iterations = 0.0;
  double ref_wall_time = 0.0;
  double rse = 0.0;
  double re = 0.0;
  bool infinite = false;  // sampler MSE was zero
};

/// Per-dimension mean squared error (1/R) sum_r (q_r - q)^2.
inline Vector replicate_mse(const std::vector<Vector>& estimates, const Vector& truth) {
  if (estimates.size() < 2) throw ConfigError("efficiency metrics need at least two replicates");
  Vector acc = Vector::Zero(truth.size());
  for (const auto& e : estimates) {
    require(e.size() == truth.size(), "replicate_mse: dimension mismatch");
    acc.array() += (e - truth).array().square();
  }
  return acc / static_cast<double>(estimates.size());
}

inline double median(Vector v) {
  require(v.size() > 0, "median: empty input");
  std::vector<double> x(v.data(), v.data() + v.size());
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  if (x.size() % 2 == 1) return x[mid];
  const double upper = x[mid];
  const double lower = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Fills rse/re from the variance and cost fields.
inline QuantityReport finalize_report(QuantityReport r) {
  if (r.sigma2 == 0.0) {
    r.infinite = true;
    r.rse = r.re = std::numeric_limits<double>::infinity();
    return r;
  }
  r.rse = (r.ref_sigma2 * r.ref_iterations) / (r.sigma2 * r.iterations);
  r.re = (r.ref_sigma2 * r.ref_wall_time) / (r.sigma2 * r.wall_time);
  return r;
}

/// Combines a sampler and a reference sampler into RSE and RE. Both are
/// measured against the same target value `truth`.
inline QuantityReport efficiency_metrics(const ReplicateSet& sampler, const ReplicateSet& reference, const Vector& truth) {
  QuantityReport r;
  r.mse_per_dim = replicate_mse(sampler.estimates, truth);
  r.sigma2 = median(r.mse_per_dim);
  r.iterations = sampler.iterations;
  r.wall_time = sampler.wall_time;
  r.ref_sigma2 = median(replicate_mse(reference.estimates, truth));
  r.ref_iterations = reference.iterations;
  r.ref_wall_time = reference.wall_time;
  return finalize_report(r);
}

/// Sampling standard error of the replicate mean, per dimension.
inline Vector replicate_standard_error(const std::vector<Vector>& estimates) {
  require(estimates.size() >= 2, "replicate_standard_error: need two or more replicates");
  const double R = static_cast<double>(estimates.size());
  Vector mean = Vector::Zero(estimates.front().size());
  for (const auto& e : estimates) mean += e;
  mean /= R;
  Vector ss = Vector::Zero(mean.size());
  for (const auto& e : estimates) ss.array() += (e - mean).array().square();
  return (ss / (R - 1.0) / R).cwiseSqrt();
}

inline Vector replicate_mean(const std::vector<Vector>& estimates) {
  require(!estimates.empty(), "replicate_mean: no replicates");
  Vector mean = Vector::Zero(estimates.front().size());
  for (const auto& e : estimates) mean += e;
  return mean / static_cast<double>(estimates.size());
}

}  // namespace rjpdmp
