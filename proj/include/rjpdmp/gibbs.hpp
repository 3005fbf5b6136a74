#pragma once

// Collapsed Gibbs sampler for spike-and-slab logistic regression using
// Polya-Gamma augmentation. One sweep updates gamma (theta integrated out),
// then theta given (gamma, omega), then omega given (gamma, theta).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/polya_gamma.hpp"
#include "rjpdmp/prior.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp {

struct GibbsState {
  Mask gamma;
  Vector theta;
  Vector omega;
};

struct GibbsOptions {
  bool random_scan = false;
};

/// Sufficient statistics that stay fixed while omega is fixed.
class GibbsWorkspace {
 public:
  GibbsWorkspace(const Dataset& data, const Vector& omega) { refresh(data, omega); }

  void refresh(const Dataset& data, const Vector& omega) {
    const Index p = data.p();
    G_ = Matrix::Zero(p, p);
    if (data.n() > 0) {
      const Matrix Xw = omega.cwiseSqrt().asDiagonal() * data.X;
      G_.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
      G_ = G_.selfadjointView<Eigen::Lower>();
      b_ = data.X.transpose() * (data.y.array() - 0.5).matrix();
    } else {
      b_ = Vector::Zero(p);
    }
  }

  const Matrix& G() const { return G_; }  // X^T Omega X
  const Vector& b() const { return b_; }  // X^T kappa

 private:
  Matrix G_;
  Vector b_;
};

namespace gibbs_detail {

inline std::vector<Index> indices(const Mask& m) {
  std::vector<Index> idx;
  for (Index j = 0; j < static_cast<Index>(m.size()); ++j)
    if (m[j]) idx.push_back(j);
  return idx;
}

inline Matrix precision(const GibbsWorkspace& ws, const std::vector<Index>& idx, double sigma2) {
  const Index k = static_cast<Index>(idx.size());
  Matrix P(k, k);
  for (Index r = 0; r < k; ++r)
    for (Index c = 0; c < k; ++c) P(r, c) = ws.G()(idx[r], idx[c]);
  P.diagonal().array() += 1.0 / sigma2;
  return P;
}

inline Eigen::LLT<Matrix> cholesky(const Matrix& P) {
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalError("gibbs: Cholesky factorization failed");
  return llt;
}

}  // namespace gibbs_detail

/// log pi~(gamma | omega) up to a constant, from determinants:
/// log pi0(gamma) + 1/2 log det V - |gamma|/2 log sigma2 + 1/2 b^T V b.
inline double log_marginal_gamma(const Mask& gamma, const GibbsWorkspace& ws, const SpikeSlabPrior& prior) {
  const auto idx = gibbs_detail::indices(gamma);
  const double k = static_cast<double>(idx.size());
  const double m = static_cast<double>(gamma.size());
  double out = k * std::log(prior.w) + (m - k) * std::log1p(-prior.w) - 0.5 * k * std::log(prior.sigma2);
  if (idx.empty()) return out;
  const auto llt = gibbs_detail::cholesky(gibbs_detail::precision(ws, idx, prior.sigma2));
  Vector bg(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) bg[r] = ws.b()[idx[r]];
  const Matrix L = llt.matrixL();
  out -= L.diagonal().array().log().sum();
  out += 0.5 * bg.dot(llt.solve(bg));
  return out;
}

/// log[pi~(gamma_j = 1, rest) / pi~(gamma_j = 0, rest)] through the Schur
/// complement of the added coordinate.
inline double log_inclusion_odds(Index j, const Mask& gamma, const GibbsWorkspace& ws, const SpikeSlabPrior& prior) {
  Mask rest = gamma;
  rest[j] = false;
  const auto idx = gibbs_detail::indices(rest);
  const double d = ws.G()(j, j) + 1.0 / prior.sigma2;
  double s = d, r = ws.b()[j];
  if (!idx.empty()) {
    const auto llt = gibbs_detail::cholesky(gibbs_detail::precision(ws, idx, prior.sigma2));
    const Index k = static_cast<Index>(idx.size());
    Vector c(k), bg(k);
    for (Index q = 0; q < k; ++q) {
      c[q] = ws.G()(idx[q], j);
      bg[q] = ws.b()[idx[q]];
    }
    const Vector Ainv_c = llt.solve(c);
    s -= c.dot(Ainv_c);
    r -= Ainv_c.dot(bg);
  }
  if (!(s > 0.0)) throw NumericalError("gibbs: non-positive Schur complement");
  return std::log(prior.w) - std::log1p(-prior.w) - 0.5 * std::log(prior.sigma2) - 0.5 * std::log(s) + 0.5 * r * r / s;
}

inline void check_gibbs_prior(const SpikeSlabPrior& prior) {
  prior.validate();
  if (prior.mu != 0.0) throw ConfigError("gibbs: slab mean must be zero");
}

namespace gibbs_detail {

inline void scan_gamma(GibbsState& st, const GibbsWorkspace& ws, const SpikeSlabPrior& prior, Rng& rng,
                       const GibbsOptions& opt) {
  const Index p = static_cast<Index>(st.gamma.size());
  for (Index step = 0; step < p; ++step) {
    const Index j = opt.random_scan ? static_cast<Index>(rng.below(static_cast<std::uint64_t>(p))) : step;
    const double lo = log_inclusion_odds(j, st.gamma, ws, prior);
    st.gamma[j] = rng.uniform() < 1.0 / (1.0 + std::exp(-lo));
  }
  for (Index j = 0; j < p; ++j)
    if (!st.gamma[j]) st.theta[j] = 0.0;
}

}  // namespace gibbs_detail

inline GibbsState gibbs_gamma_step(GibbsState st, const Dataset& data, const SpikeSlabPrior& prior, Rng& rng,
                                   const GibbsOptions& opt = {}) {
  gibbs_detail::scan_gamma(st, GibbsWorkspace(data, st.omega), prior, rng, opt);
  return st;
}

/// Conditional mean and precision factor of theta_gamma given (gamma, omega).
struct ThetaConditional {
  std::vector<Index> idx;
  Vector mean;
  Eigen::LLT<Matrix> llt;
};

inline ThetaConditional theta_conditional(const Mask& gamma, const GibbsWorkspace& ws, const SpikeSlabPrior& prior) {
  ThetaConditional out;
  out.idx = gibbs_detail::indices(gamma);
  if (out.idx.empty()) return out;
  out.llt = gibbs_detail::cholesky(gibbs_detail::precision(ws, out.idx, prior.sigma2));
  Vector bg(static_cast<Index>(out.idx.size()));
  for (std::size_t r = 0; r < out.idx.size(); ++r) bg[r] = ws.b()[out.idx[r]];
  out.mean = out.llt.solve(bg);
  return out;
}

namespace gibbs_detail {

inline void draw_theta(GibbsState& st, const GibbsWorkspace& ws, const SpikeSlabPrior& prior, Rng& rng) {
  const auto cond = theta_conditional(st.gamma, ws, prior);
  st.theta.setZero();
  if (cond.idx.empty()) return;
  const Index k = static_cast<Index>(cond.idx.size());
  Vector z(k);
  for (Index q = 0; q < k; ++q) z[q] = rng.normal();
  // P = L L^T, so L^{-T} z has covariance P^{-1}
  const Vector dev = cond.llt.matrixU().solve(z);
  for (Index q = 0; q < k; ++q) st.theta[cond.idx[q]] = cond.mean[q] + dev[q];
}

}  // namespace gibbs_detail

inline GibbsState gibbs_theta_step(GibbsState st, const Dataset& data, const SpikeSlabPrior& prior, Rng& rng) {
  gibbs_detail::draw_theta(st, GibbsWorkspace(data, st.omega), prior, rng);
  return st;
}

inline GibbsState gibbs_omega_step(GibbsState st, const Dataset& data, Rng& rng) {
  const Vector psi = detail::linear_predictor(data.X, st.theta, st.gamma);
  for (Index i = 0; i < data.n(); ++i) st.omega[i] = sample_pg(1, psi[i], rng);
  return st;
}

inline GibbsState gibbs_initial_state(const Dataset& data, Rng& rng, bool all_active = true) {
  GibbsState st;
  st.gamma.assign(static_cast<std::size_t>(data.p()), all_active);
  st.theta = Vector::Zero(data.p());
  st.omega = Vector(data.n());
  for (Index i = 0; i < data.n(); ++i) st.omega[i] = sample_pg(1, 0.0, rng);
  return st;
}

/// One full sweep. The omega-dependent workspace is built once for the gamma
/// and theta updates.
inline void gibbs_sweep(GibbsState& st, const Dataset& data, const SpikeSlabPrior& prior, Rng& rng,
                        const GibbsOptions& opt = {}) {
  const GibbsWorkspace ws(data, st.omega);
  gibbs_detail::scan_gamma(st, ws, prior, rng, opt);
  gibbs_detail::draw_theta(st, ws, prior, rng);
  st = gibbs_omega_step(std::move(st), data, rng);
}

struct GibbsSample {
  Mask gamma;
  Vector theta;
};

struct GibbsStats {
  std::uint64_t n_iter = 0;
  double wall_time = 0.0;
};

/// Runs n_iter sweeps from `st`, calling sink(iteration, state) after each.
template <class Sink>
GibbsStats run_gibbs(const Dataset& data, const SpikeSlabPrior& prior, std::uint64_t n_iter, Rng& rng, GibbsState& st,
                     Sink&& sink, const GibbsOptions& opt = {}) {
  check_gibbs_prior(prior);
  data.validate(true);
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t it = 0; it < n_iter; ++it) {
    gibbs_sweep(st, data, prior, rng, opt);
    sink(it, st);
  }
  GibbsStats stats;
  stats.n_iter = n_iter;
  stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

/// Seeded convenience form returning the whole chain.
inline std::vector<GibbsSample> run_gibbs(const Dataset& data, const SpikeSlabPrior& prior, std::uint64_t n_iter,
                                          std::uint64_t seed, const GibbsOptions& opt = {}) {
  Rng rng(seed);
  GibbsState st = gibbs_initial_state(data, rng);
  std::vector<GibbsSample> chain;
  chain.reserve(n_iter);
  run_gibbs(data, prior, n_iter, rng, st, [&](std::uint64_t, const GibbsState& s) { chain.push_back({s.gamma, s.theta}); },
            opt);
  return chain;
}

/// Streaming inclusion and coefficient averages over a Gibbs chain.
class GibbsAccumulator {
 public:
  explicit GibbsAccumulator(Index p, std::uint64_t burn_in = 0)
      : burn_(burn_in), gamma_sum_(Vector::Zero(p)), theta_sum_(Vector::Zero(p)) {}

  void operator()(std::uint64_t it, const GibbsState& s) {
    if (it < burn_) return;
    ++count_;
    for (Index j = 0; j < theta_sum_.size(); ++j) {
      if (s.gamma[j]) gamma_sum_[j] += 1.0;
      theta_sum_[j] += s.theta[j];
    }
  }

  std::uint64_t count() const { return count_; }
  Vector ppi() const {
    if (count_ == 0) throw ContractViolation("GibbsAccumulator: no samples after burn-in");
    return gamma_sum_ / static_cast<double>(count_);
  }
  Vector mean() const {
    if (count_ == 0) throw ContractViolation("GibbsAccumulator: no samples after burn-in");
    return theta_sum_ / static_cast<double>(count_);
  }

 private:
  std::uint64_t burn_;
  std::uint64_t count_ = 0;
  Vector gamma_sum_;
  Vector theta_sum_;
};

}  // namespace rjpdmp
