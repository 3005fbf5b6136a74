#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rjpdmp/dynamics.hpp"
#include "rjpdmp/targets.hpp"

using namespace rjpdmp;

namespace {

// Written out from the kernel definitions, independently of birth_density().
double sphere_alpha_density(Index k_new, double a) {
  const double m = static_cast<double>(k_new - 1);
  return m * std::abs(a) * std::pow(1.0 - a * a, 0.5 * (m - 2.0)) / 2.0;
}
double gauss_alpha_density(double a) { return 0.5 * std::abs(a) * std::exp(-0.5 * a * a); }
double area(double d) { return 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0); }

SamplerState active_state(const Vector& theta, const Vector& vel) {
  SamplerState s(theta.size());
  s.theta = theta;
  s.vel = vel;
  std::fill(s.gamma.begin(), s.gamma.end(), true);
  return s;
}

GaussianSpikeSlabTarget standard_normal(Index p) {
  GaussianSpikeSlabTarget::Coordinate c;
  c.mu = 0.0;
  c.sigma2 = 1.0;
  return GaussianSpikeSlabTarget(p, c);
}

}  // namespace

TEST(ZigZagRate, StandardNormal) {
  const auto t = standard_normal(1);
  EXPECT_DOUBLE_EQ(zigzag_rate(0, active_state(Vector::Constant(1, 2.0), Vector::Constant(1, 1.0)), t), 2.0);
  EXPECT_DOUBLE_EQ(zigzag_rate(0, active_state(Vector::Constant(1, 2.0), Vector::Constant(1, -1.0)), t), 0.0);
}

TEST(ZigZagRate, InactiveCoordinateRejected) {
  SamplerState s(1);
  EXPECT_THROW(zigzag_rate(0, s, standard_normal(1)), ContractViolation);
}

TEST(BpsRate, FromGradient) {
  const Vector g = (Vector(2) << 1.0, 0.0).finished();
  auto s = active_state(Vector::Zero(2), (Vector(2) << 1.0, 0.0).finished());
  EXPECT_DOUBLE_EQ(bps_rate_from_gradient(s, g), 1.0);
  s.vel[0] = -1.0;
  EXPECT_DOUBLE_EQ(bps_rate_from_gradient(s, g), 0.0);
}

TEST(BpsReflect, MirrorAndTangent) {
  const Vector g = (Vector(2) << 1.0, 0.0).finished();
  const double r = 1.0 / std::sqrt(2.0);
  auto s = bps_reflect(active_state(Vector::Zero(2), (Vector(2) << r, r).finished()), g);
  EXPECT_NEAR(s.vel[0], -r, 1e-15);
  EXPECT_NEAR(s.vel[1], r, 1e-15);
  s = bps_reflect(active_state(Vector::Zero(2), (Vector(2) << 0.0, 1.0).finished()), g);
  EXPECT_DOUBLE_EQ(s.vel[0], 0.0);
  EXPECT_DOUBLE_EQ(s.vel[1], 1.0);
}

TEST(BpsReflect, PreservesNormAndNegatesProjection) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    Vector g(5), v(5);
    for (Index j = 0; j < 5; ++j) {
      g[j] = rng.normal();
      v[j] = rng.normal();
    }
    const auto s = bps_reflect(active_state(Vector::Zero(5), v), g);
    EXPECT_NEAR(s.vel.norm(), v.norm(), 1e-12);
    EXPECT_NEAR(s.vel.dot(g), -v.dot(g), 1e-12);
  }
}

TEST(BpsReflect, ZeroGradientRejected) {
  EXPECT_ANY_THROW(bps_reflect(active_state(Vector::Zero(2), Vector::Ones(2)), Vector::Zero(2)));
}

TEST(ZigZagFlip, FlipsOneComponent) {
  auto s = active_state(Vector::Zero(2), (Vector(2) << 1.0, -1.0).finished());
  const auto f = zigzag_flip(0, s);
  EXPECT_EQ(f.vel[0], -1.0);
  EXPECT_EQ(f.vel[1], -1.0);
  EXPECT_EQ(zigzag_flip(0, f), s);
  s.gamma[1] = false;
  s.vel[1] = 0.0;
  EXPECT_THROW(zigzag_flip(1, s), ContractViolation);
}

TEST(BirthRate, ReferenceValues) {
  EXPECT_NEAR(birth_rate(Family::ZigZag, 0.6, 3, 0.5, 1.0), 0.6 / std::sqrt(2.0 * M_PI), 1e-15);
  EXPECT_NEAR(birth_rate(Family::ZigZag, 0.6, 3, 0.5, 1.0), 0.239365, 1e-6);
  EXPECT_NEAR(birth_rate(Family::BpsGauss, 0.6, 3, 0.5, 1.0), 1.2 / (2.0 * M_PI), 1e-15);
  EXPECT_NEAR(birth_rate(Family::BpsGauss, 0.6, 3, 0.5, 1.0), 0.190986, 1e-6);
}

TEST(BirthRate, SphereUsesAreaRatio) {
  const double base = 0.6 / std::sqrt(2.0 * M_PI * 2.0) * (0.3 / 0.7);
  EXPECT_NEAR(birth_rate(Family::BpsSphere, 0.6, 0, 0.3, 2.0), base, 1e-15);
  for (Index k : {1, 2, 3, 5, 10, 50}) {
    const double kd = static_cast<double>(k);
    const double expected = base * 2.0 * area(kd) / area(kd + 1.0) / kd;
    EXPECT_NEAR(birth_rate(Family::BpsSphere, 0.6, k, 0.3, 2.0), expected, 1e-12 * expected) << "k=" << k;
  }
}

TEST(BirthRate, VanishesAsWeightVanishes) {
  EXPECT_LT(birth_rate(Family::ZigZag, 0.6, 1, 1e-12, 1.0), 1e-11);
  EXPECT_THROW(birth_rate(Family::ZigZag, 0.6, 1, 0.0, 1.0), ConfigError);
  EXPECT_THROW(birth_rate(Family::ZigZag, 0.6, 1, 1.0, 1.0), ConfigError);
}

TEST(BirthKernel, DensitiesIntegrateToOne) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(oracle::integrate([](double a) { return birth_density(Family::BpsGauss, 3, a); }, -inf, inf), 1.0, 1e-8);
  EXPECT_NEAR(birth_density(Family::ZigZag, 1, 1.0) + birth_density(Family::ZigZag, 1, -1.0), 1.0, 1e-15);
  EXPECT_NEAR(birth_density(Family::BpsSphere, 1, 1.0) + birth_density(Family::BpsSphere, 1, -1.0), 1.0, 1e-15);
  for (Index k : {2, 3, 4, 5, 6, 10, 11}) {
    const auto f = [&](double a) { return birth_density(Family::BpsSphere, k, a); };
    const double mass = oracle::integrate_singular(f, -1.0, 0.0) + oracle::integrate_singular(f, 0.0, 1.0);
    EXPECT_NEAR(mass, 1.0, 1e-8) << "k_new=" << k;
  }
}

TEST(BirthKernel, LibraryDensityMatchesDefinition) {
  for (double a : {-0.9, -0.3, 0.1, 0.7}) {
    EXPECT_NEAR(birth_density(Family::BpsGauss, 4, a), gauss_alpha_density(a), 1e-15);
    for (Index k : {2, 3, 5, 10}) EXPECT_NEAR(birth_density(Family::BpsSphere, k, a), sphere_alpha_density(k, a), 1e-14);
  }
}

TEST(BirthKernel, ZigZagAlphaIsFairSign) {
  Rng rng(2);
  int plus = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto d = sample_birth_velocity(Family::ZigZag, 2, Vector::Zero(3), 1, rng);
    ASSERT_EQ(std::abs(d.alpha), 1.0);
    plus += d.alpha > 0;
  }
  EXPECT_NEAR(plus / 10000.0, 0.5, 0.015);
}

TEST(BirthKernel, SphereAlphaMatchesQuadratureCdf) {
  for (Index k : {3, 5, 10}) {
    Rng rng(100 + static_cast<std::uint64_t>(k));
    std::vector<double> alphas;
    Vector old = Vector::Zero(k);
    old[0] = 1.0;
    for (int i = 0; i < 10000; ++i) alphas.push_back(sample_birth_velocity(Family::BpsSphere, k, old, k - 1, rng).alpha);
    const auto cdf = [&](double x) {
      return oracle::integrate_singular([&](double a) { return sphere_alpha_density(k, a); }, -1.0, x);
    };
    EXPECT_GT(oracle::ks_pvalue(alphas, cdf), 0.001) << "k_new=" << k;
  }
}

TEST(BirthKernel, GaussAlphaMatchesQuadratureCdf) {
  Rng rng(7);
  std::vector<double> alphas;
  for (int i = 0; i < 10000; ++i) alphas.push_back(sample_birth_velocity(Family::BpsGauss, 2, Vector::Zero(2), 0, rng).alpha);
  const auto cdf = [](double x) {
    return oracle::integrate(gauss_alpha_density, -std::numeric_limits<double>::infinity(), x);
  };
  EXPECT_GT(oracle::ks_pvalue(alphas, cdf), 0.001);
}

TEST(BirthKernel, SphereBirthKeepsUnitNorm) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    Vector old = Vector::Zero(3);
    const double phi = 2.0 * M_PI * rng.uniform();
    old[0] = std::cos(phi);
    old[1] = std::sin(phi);
    const auto d = sample_birth_velocity(Family::BpsSphere, 3, old, 2, rng);
    EXPECT_NEAR(d.new_vel.norm(), 1.0, 1e-12);
  }
}

TEST(DeathProject, ZigZagZeroesCoordinate) {
  auto s = active_state((Vector(2) << 0.0, 1.0).finished(), (Vector(2) << -1.0, 1.0).finished());
  const auto d = death_project(Family::ZigZag, 0, s);
  EXPECT_EQ(d.gamma, (Mask{false, true}));
  EXPECT_EQ(d.vel[0], 0.0);
  EXPECT_EQ(d.vel[1], 1.0);
}

TEST(DeathProject, SphereRenormalizes) {
  auto s = active_state((Vector(2) << 0.0, 1.0).finished(), (Vector(2) << 0.6, 0.8).finished());
  const auto d = death_project(Family::BpsSphere, 0, s);
  EXPECT_NEAR(d.vel[1], 1.0, 1e-15);
}

TEST(DeathProject, RequiresExactZero) {
  auto s = active_state((Vector(1) << 1e-300).finished(), Vector::Ones(1));
  EXPECT_THROW(death_project(Family::ZigZag, 0, s), ContractViolation);
}

TEST(DeathProject, InvertsBirthForAllFamilies) {
  Rng rng(4);
  for (Family f : {Family::ZigZag, Family::BpsGauss, Family::BpsSphere}) {
    for (int i = 0; i < 1000; ++i) {
      const Index p = 2 + static_cast<Index>(rng.below(6));
      SamplerState s(p);
      const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(p)));
      for (Index c = 0; c < p; ++c) {
        if (c == j || rng.uniform() < 0.3) continue;
        s.gamma[c] = true;
        s.theta[c] = rng.normal();
      }
      draw_velocity(f, s, rng);
      const auto birth = sample_birth_velocity(f, s.active_count() + 1, s.vel, j, rng);
      SamplerState born = s;
      born.gamma[j] = true;
      born.vel = birth.new_vel;
      const auto back = death_project(f, j, born);
      EXPECT_EQ(back.gamma, s.gamma);
      for (Index c = 0; c < p; ++c) EXPECT_NEAR(back.vel[c], s.vel[c], 1e-12);
    }
  }
}

TEST(Refresh, SphereUnitNorm) {
  Rng rng(5);
  auto s = active_state(Vector::Zero(3), Vector::Zero(3));
  for (int i = 0; i < 100; ++i) {
    s = refresh_velocity(Family::BpsSphere, s, rng);
    EXPECT_NEAR(s.vel.norm(), 1.0, 1e-12);
  }
}

TEST(Refresh, GaussianMomentsAndCovariance) {
  Rng rng(6);
  auto s = active_state(Vector::Zero(3), Vector::Zero(3));
  const int n = 10000;
  Vector mean = Vector::Zero(3);
  Matrix cov = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    s = refresh_velocity(Family::BpsGauss, s, rng);
    mean += s.vel;
    cov += s.vel * s.vel.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(mean[j], 0.0, 0.05);
    EXPECT_NEAR(cov(j, j), 1.0, 0.05);
    for (Index k = 0; k < j; ++k) EXPECT_LT(std::abs(cov(j, k)), 0.05);
  }
}

TEST(Refresh, ZigZagRejected) {
  Rng rng(1);
  EXPECT_THROW(refresh_velocity(Family::ZigZag, active_state(Vector::Zero(1), Vector::Ones(1)), rng), ContractViolation);
}

TEST(DynamicsConfig, ValidatesParameters) {
  EXPECT_THROW((Dynamics{Family::ZigZag, 0.0, 0.1}.validate()), ConfigError);
  EXPECT_THROW((Dynamics{Family::ZigZag, 1.0, 0.1}.validate()), ConfigError);
  EXPECT_THROW((Dynamics{Family::BpsGauss, 0.5, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((Dynamics{Family::BpsGauss, 0.5, 0.0}.validate()));
}
