#pragma once

// Synthetic data sets: logistic regression scenarios and robust regression.

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "rjpdmp/errors.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp {

struct GeneratedData {
  Dataset data;
  Dataset holdout;  // empty unless requested
  Vector theta_true;
};

/// Covariance of the covariates for logistic scenario 1, 2 or 3.
inline Matrix scenario_covariance(int scenario, Index p) {
  Matrix S = Matrix::Identity(p, p);
  switch (scenario) {
    case 1:
      if (p >= 2) S(0, 1) = S(1, 0) = 0.9;
      break;
    case 2:
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) S(i, j) = std::exp(-std::abs(static_cast<double>(i - j)));
      break;
    case 3: break;
    default: throw ConfigError("scenario must be 1, 2 or 3, got " + std::to_string(scenario));
  }
  return S;
}

/// Generating coefficients, truncated to the first p entries when p is small.
inline Vector scenario_theta(int scenario, Index p) {
  Vector theta = Vector::Zero(p);
  if (scenario == 1) {
    theta[0] = 1.0;
  } else {
    const double pattern[6] = {3, 3, -2, 3, 3, -2};
    for (Index j = 0; j < std::min<Index>(p, 6); ++j) theta[j] = pattern[j];
  }
  return theta;
}

inline Matrix draw_gaussian_rows(Index n, const Matrix& cov, Rng& rng) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariate covariance is not positive definite");
  const Matrix L = llt.matrixL();
  Matrix Z(n, cov.rows());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < cov.rows(); ++j) Z(i, j) = rng.normal();
  return Z * L.transpose();
}

inline double logistic(double eta) { return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta)); }

/// Logistic regression data with rows x_i ~ N(0, Sigma_scenario).
inline GeneratedData generate_scenario(int scenario, Index n, Index p, Rng& rng) {
  if (n < 1 || p < 1) throw ConfigError("generate_scenario: n and p must be positive");
  GeneratedData out;
  out.theta_true = scenario_theta(scenario, p);
  out.data.X = draw_gaussian_rows(n, scenario_covariance(scenario, p), rng);
  const Vector eta = out.data.X * out.theta_true;
  out.data.y = Vector(n);
  for (Index i = 0; i < n; ++i) out.data.y[i] = rng.uniform() < logistic(eta[i]) ? 1.0 : 0.0;
  return out;
}

/// Robust regression data: AR(1) covariates along each row with lag-one
/// correlation 0.5, coefficients (2, 2, 2, 2, 0, ...), standard Cauchy noise.
/// `n_holdout` extra rows from the same model form the holdout set.
inline GeneratedData generate_robust(Index n, Index p, Rng& rng, Index n_holdout = 0) {
  if (n < 1 || p < 1 || n_holdout < 0) throw ConfigError("generate_robust: bad sizes");
  GeneratedData out;
  out.theta_true = Vector::Zero(p);
  for (Index j = 0; j < std::min<Index>(p, 4); ++j) out.theta_true[j] = 2.0;
  const double rho = 0.5, innov = std::sqrt(1.0 - rho * rho);
  auto fill = [&](Dataset& d, Index rows) {
    d.X = Matrix(rows, p);
    d.y = Vector(rows);
    for (Index i = 0; i < rows; ++i) {
      d.X(i, 0) = rng.normal();
      for (Index j = 1; j < p; ++j) d.X(i, j) = rho * d.X(i, j - 1) + innov * rng.normal();
      d.y[i] = d.X.row(i).dot(out.theta_true) + rng.cauchy();
    }
  };
  fill(out.data, n);
  fill(out.holdout, n_holdout);
  return out;
}

/// Small robust-regression variant: independent standard normal covariates and
/// residuals, theta = (0.5, 0.5, 0, 0).
inline GeneratedData generate_robust_small(Index n, Rng& rng, Index n_holdout = 0) {
  GeneratedData out;
  out.theta_true = Vector::Zero(4);
  out.theta_true[0] = out.theta_true[1] = 0.5;
  auto fill = [&](Dataset& d, Index rows) {
    d.X = Matrix(rows, 4);
    d.y = Vector(rows);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < 4; ++j) d.X(i, j) = rng.normal();
      d.y[i] = d.X.row(i).dot(out.theta_true) + rng.normal();
    }
  };
  fill(out.data, n);
  fill(out.holdout, n_holdout);
  return out;
}

}  // namespace rjpdmp
