#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "rjpdmp/engine.hpp"
#include "rjpdmp/poisson.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"

using namespace rjpdmp;

namespace {

SamplerState make_state(std::vector<double> theta, std::vector<double> vel, std::vector<bool> gamma) {
  SamplerState s(static_cast<Index>(theta.size()));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.theta[static_cast<Index>(i)] = theta[i];
    s.vel[static_cast<Index>(i)] = vel[i];
  }
  s.gamma = std::move(gamma);
  return s;
}

// Standard Gaussian in one or more dimensions with no trans-dimensional moves.
struct StdGaussian {
  Index p = 1;
  Index dim() const { return p; }
  bool trans_dimensional() const { return false; }
  double birth_ratio(Index) const { return 0.0; }
  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters&) const {
    out.resize(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) out[k] = {s.vel[active[k]] * s.theta[active[k]], 1.0};
  }
  double zigzag_rate(Index j, const SamplerState& s, Rng&, EvalCounters&) const {
    return std::max(0.0, s.vel[j] * s.theta[j]);
  }
  BoundCoeffs bps_bound(const SamplerState& s, EvalCounters&) const { return {s.vel.dot(s.theta), s.vel.squaredNorm()}; }
  double bps_rate(const SamplerState& s, Rng&, Vector& g, EvalCounters&) const {
    g = s.theta;
    return std::max(0.0, s.vel.dot(s.theta));
  }
};

// Same target with a bound that is too small, to exercise the soundness check.
struct UnderBounded : StdGaussian {
  void zigzag_bounds(const SamplerState& s, std::span<const Index> active, std::vector<BoundCoeffs>& out,
                     EvalCounters&) const {
    out.assign(active.size(), BoundCoeffs{0.01, 0.0});
    (void)s;
  }
  double zigzag_rate(Index, const SamplerState&, Rng&, EvalCounters&) const { return 1.0; }
};

GaussianSpikeSlabTarget prior_target(Index p) {
  GaussianSpikeSlabTarget::Coordinate c;
  c.w = 0.5;
  c.mu = 0.5;
  c.sigma2 = 1.0;
  return GaussianSpikeSlabTarget(p, c);
}

}  // namespace

// ---------------------------------------------------------------------------
// Rng

TEST(Rng, SameSeedSameStream) {
  Rng a(99), b(99), c(100);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng d(99);
  EXPECT_NE(d.next(), c.next());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Rng, UniformOpenIntervalAndBelowRange) {
  Rng r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
}

TEST(Rng, ExponentialAndNormalMoments) {
  Rng r(5);
  const int n = 200000;
  double se = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    se += r.exponential();
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(se / n, 1.0, 0.01);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

// ---------------------------------------------------------------------------
// advance / next_zero_hit

TEST(Advance, LinearMotion) {
  const auto s = advance(make_state({0.5}, {-1}, {true}), 0.25);
  EXPECT_DOUBLE_EQ(s.theta[0], 0.25);
  EXPECT_DOUBLE_EQ(s.t, 0.25);
}

TEST(Advance, ZeroStepIsIdentity) {
  const auto s0 = make_state({0.3, -1.2}, {1, -1}, {true, true});
  EXPECT_EQ(advance(s0, 0.0), s0);
}

TEST(Advance, InactiveCoordinateUntouched) {
  const auto s = advance(make_state({1, 0}, {1, 0}, {true, false}), 2.0);
  EXPECT_DOUBLE_EQ(s.theta[0], 3.0);
  EXPECT_DOUBLE_EQ(s.theta[1], 0.0);
  EXPECT_EQ(s.gamma, (Mask{true, false}));
}

TEST(Advance, NegativeStepRejected) {
  EXPECT_THROW(advance(make_state({0}, {1}, {true}), -1.0), ContractViolation);
}

TEST(NextZeroHit, SingleCoordinate) {
  const auto h = next_zero_hit(make_state({0.5}, {-1}, {true}));
  ASSERT_TRUE(h);
  EXPECT_DOUBLE_EQ(h->delta_t, 0.5);
  EXPECT_EQ(h->coord, 0);
}

TEST(NextZeroHit, Minimum) {
  const auto h = next_zero_hit(make_state({0.5, 2.0}, {-1, -1}, {true, true}));
  ASSERT_TRUE(h);
  EXPECT_DOUBLE_EQ(h->delta_t, 0.5);
  EXPECT_EQ(h->coord, 0);
}

TEST(NextZeroHit, MovingAway) {
  EXPECT_FALSE(next_zero_hit(make_state({0.5}, {1}, {true})));
  EXPECT_FALSE(next_zero_hit(make_state({0.0}, {-1}, {true})));
}

// ---------------------------------------------------------------------------
// simulate_linear_poisson

TEST(LinearPoisson, Homogeneous) {
  const auto t = simulate_linear_poisson(1.0, 0.0, std::exp(-2.0));
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 2.0, 1e-14);
}

TEST(LinearPoisson, ZeroRateNeverFires) {
  EXPECT_FALSE(simulate_linear_poisson(0.0, 0.0, 0.5));
  EXPECT_FALSE(simulate_linear_poisson(-3.0, 0.0, 0.5));
}

TEST(LinearPoisson, NegativeInterceptMatchesRootFinding) {
  const double u = 0.3;
  const auto t = simulate_linear_poisson(-1.0, 1.0, u);
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 1.0 + std::sqrt(-2.0 * std::log(u)), 1e-12);
  const auto integrated = [](double s) { return s <= 1.0 ? 0.0 : 0.5 * (s - 1.0) * (s - 1.0); };
  const double r = oracle::root([&](double s) { return integrated(s) + std::log(u); }, 1.0, 10.0);
  EXPECT_NEAR(*t, r, 1e-9);
}

TEST(LinearPoisson, GeneralCoefficientsMatchRootFinding) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double a = 4.0 * rng.uniform() - 2.0, b = 3.0 * rng.uniform(), u = rng.uniform();
    const auto t = simulate_linear_poisson(a, b, u);
    if (b == 0.0 && a <= 0.0) continue;
    ASSERT_TRUE(t);
    const auto integrated = [&](double s) {
      return oracle::integrate([&](double x) { return std::max(0.0, a + b * x); }, 0.0, s);
    };
    const double r = oracle::root([&](double s) { return integrated(s) + std::log(u); }, 0.0, 1e3);
    EXPECT_NEAR(*t, r, 1e-7 * std::max(1.0, r));
  }
}

TEST(LinearPoisson, RejectsNegativeSlope) { EXPECT_THROW(simulate_linear_poisson(1.0, -1.0, 0.5), ContractViolation); }

// ---------------------------------------------------------------------------
// Engine

TEST(Engine, ZeroHorizonGivesEmptySkeleton) {
  Rng rng(1);
  const auto init = initial_state_full(Family::ZigZag, 2, rng);
  const auto r = run(Dynamics{Family::ZigZag, 0.6, 0.0}, prior_target(2), init, 0.0, 1);
  EXPECT_TRUE(r.skeleton.events.empty());
  EXPECT_EQ(r.skeleton.t_final, 0.0);
}

TEST(Engine, GaussianTimeAverage) {
  SamplerState init(1);
  init.gamma[0] = true;
  init.vel[0] = 1.0;
  PathAccumulator acc(1);
  SamplerState s = init;
  Rng rng(2024);
  StopRule stop;
  stop.t_end = 1e5;
  simulate(Dynamics{Family::ZigZag, 0.6, 0.0}, StdGaussian{}, s, stop, rng, acc);
  EXPECT_NEAR(acc.mean()[0], 0.0, 0.02);
}

TEST(Engine, TwoCoordinateSpikeSlabOccupancy) {
  Rng rng(8);
  const auto target = prior_target(2);
  PathAccumulator acc(2);
  SamplerState s = initial_state_full(Family::ZigZag, 2, rng);
  StopRule stop;
  stop.t_end = 2e4;
  simulate(Dynamics{Family::ZigZag, 0.6, 0.0}, target, s, stop, rng, acc);
  for (Index j = 0; j < 2; ++j) EXPECT_NEAR(acc.ppi()[j], 0.5, 0.02);
}

TEST(Engine, RaceReproducesReflectionClock) {
  // First switching time of 1-d ZigZag from (0, +1) on N(0,1): P(T > t) = exp(-t^2/2).
  std::vector<double> times;
  for (int r = 0; r < 10000; ++r) {
    SamplerState s(1);
    s.gamma[0] = true;
    s.vel[0] = 1.0;
    Rng rng(derive_seed(31, r));
    SkeletonRecorder rec(s);
    StopRule stop;
    stop.max_events = 1;
    simulate(Dynamics{Family::ZigZag, 0.6, 0.0}, StdGaussian{}, s, stop, rng, rec);
    times.push_back(rec.skeleton().events.at(0).t);
  }
  EXPECT_GT(oracle::ks_pvalue(times, [](double t) { return 1.0 - std::exp(-0.5 * t * t); }), 0.001);
}

TEST(Engine, RaceReproducesBirthClock) {
  const auto target = prior_target(3);
  const Dynamics dyn{Family::ZigZag, 0.6, 0.0};
  double total = 0.0;
  for (Index j = 0; j < 3; ++j) total += dyn.p_jump * target.birth_ratio(j);
  std::vector<double> times;
  for (int r = 0; r < 10000; ++r) {
    SamplerState s = initial_state_empty(3);
    Rng rng(derive_seed(41, r));
    SkeletonRecorder rec(s);
    StopRule stop;
    stop.max_events = 1;
    simulate(dyn, target, s, stop, rng, rec);
    ASSERT_EQ(rec.skeleton().events.at(0).kind, EventKind::Reintroduce);
    times.push_back(rec.skeleton().events.at(0).t);
  }
  EXPECT_GT(oracle::ks_pvalue(times, [&](double t) { return 1.0 - std::exp(-total * t); }), 0.001);
}

TEST(Engine, TiePriorityOrder) {
  detail::Candidate c;
  c.offer(1.0, EventKind::Refresh, -1);
  c.offer(1.0, EventKind::Reintroduce, -1);
  c.offer(1.0, EventKind::Reflect, 0);
  c.offer(1.0, EventKind::HitZero, 1);
  c.offer(1.0, EventKind::Reflect, 2);
  EXPECT_EQ(c.kind, EventKind::HitZero);
  EXPECT_EQ(c.coord, 1);
  detail::Candidate d;
  d.offer(2.0, EventKind::Refresh, -1);
  d.offer(2.0, EventKind::Reintroduce, -1);
  EXPECT_EQ(d.kind, EventKind::Reintroduce);
}

TEST(Engine, DetectsBoundViolation) {
  SamplerState s(1);
  s.gamma[0] = true;
  s.vel[0] = 1.0;
  Rng rng(1);
  NullObserver obs;
  StopRule stop;
  stop.t_end = 100.0;
  EXPECT_THROW(simulate(Dynamics{Family::ZigZag, 0.6, 0.0}, UnderBounded{}, s, stop, rng, obs),
               ThinningBoundViolation);
}

TEST(Engine, BitIdenticalUnderFixedSeed) {
  for (Family f : {Family::ZigZag, Family::BpsGauss, Family::BpsSphere}) {
    Rng r1(5);
    const auto init = initial_state_full(f, 3, r1);
    const auto a = run(Dynamics{f, 0.6, 0.5}, prior_target(3), init, 200.0, 77);
    const auto b = run(Dynamics{f, 0.6, 0.5}, prior_target(3), init, 200.0, 77);
    ASSERT_EQ(a.skeleton.events.size(), b.skeleton.events.size());
    for (std::size_t i = 0; i < a.skeleton.events.size(); ++i) {
      EXPECT_EQ(a.skeleton.events[i].t, b.skeleton.events[i].t);
      EXPECT_EQ(a.skeleton.events[i].state_after, b.skeleton.events[i].state_after);
    }
  }
}

TEST(Engine, ReplayMatchesLiveAccumulation) {
  Rng rng(6);
  const auto target = prior_target(3);
  SamplerState s = initial_state_full(Family::BpsGauss, 3, rng);
  SkeletonRecorder rec(s);
  PathAccumulator live(3, 0.0, true);
  TeeObserver<SkeletonRecorder, PathAccumulator> tee{rec, live};
  StopRule stop;
  stop.t_end = 500.0;
  simulate(Dynamics{Family::BpsGauss, 0.6, 0.5}, target, s, stop, rng, tee);
  PathAccumulator replayed(3, 0.0, true);
  replay(rec.skeleton(), replayed);
  // the live run may split segments at unrecorded clock proposals
  EXPECT_LT((live.mean() - replayed.mean()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((live.ppi() - replayed.ppi()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(live.models().size(), replayed.models().size());
}

TEST(Engine, SkeletonPositionsAreContinuous) {
  Rng rng(9);
  SamplerState s = initial_state_full(Family::ZigZag, 2, rng);
  const auto r = run(Dynamics{Family::ZigZag, 0.6, 0.0}, prior_target(2), s, 300.0, 10);
  const SamplerState* prev = &r.skeleton.initial;
  for (const auto& e : r.skeleton.events) {
    const Vector reached = position_at(*prev, e.t);
    for (Index j = 0; j < 2; ++j)
      if (e.state_after.gamma[j] || e.kind == EventKind::HitZero) {
        if (!prev->gamma[j]) continue;
        EXPECT_NEAR(reached[j], e.state_after.theta[j], 1e-9);
      }
    prev = &e.state_after;
  }
}

TEST(Engine, DeathsLandExactlyOnZeroAndInvariantsHold) {
  RunOptions opts;
  opts.check_invariants = true;
  for (Family f : {Family::ZigZag, Family::BpsGauss, Family::BpsSphere}) {
    Rng rng(12);
    const auto init = initial_state_full(f, 4, rng);
    const auto r = run(Dynamics{f, 0.6, 0.3}, prior_target(4), init, 1000.0, 13, opts);
    std::size_t deaths = 0;
    for (const auto& e : r.skeleton.events) {
      if (e.kind != EventKind::HitZero) continue;
      ++deaths;
      EXPECT_EQ(e.state_after.theta[e.coord], 0.0);
      EXPECT_FALSE(e.state_after.gamma[e.coord]);
    }
    EXPECT_GT(deaths, 0u);
    EXPECT_EQ(deaths, r.stats.n_deaths);
    EXPECT_GT(r.stats.n_zero_crossings, 0u);
  }
}

TEST(Engine, EmptyModelIsFrozen) {
  const auto target = prior_target(2);
  SamplerState s = initial_state_empty(2);
  Rng rng(3);
  SkeletonRecorder rec(s);
  StopRule stop;
  stop.max_events = 1;
  simulate(Dynamics{Family::BpsSphere, 0.6, 1.0}, target, s, stop, rng, rec);
  const auto& e = rec.skeleton().events.at(0);
  EXPECT_EQ(e.kind, EventKind::Reintroduce);
  EXPECT_EQ(std::abs(e.state_after.vel[e.coord]), 1.0);
}

TEST(Engine, CheckpointsAtFixedInterval) {
  Rng rng(4);
  const auto init = initial_state_full(Family::ZigZag, 2, rng);
  RunOptions opts;
  opts.checkpoint_interval = 1.0;
  const auto r = run(Dynamics{Family::ZigZag, 0.6, 0.0}, prior_target(2), init, 10.0, 3, opts);
  std::vector<double> cps;
  for (const auto& e : r.skeleton.events)
    if (e.kind == EventKind::Checkpoint) cps.push_back(e.t);
  ASSERT_EQ(cps.size(), 9u);
  for (std::size_t i = 0; i < cps.size(); ++i) EXPECT_DOUBLE_EQ(cps[i], static_cast<double>(i + 1));
}

TEST(Engine, RejectsInvalidInitialState) {
  SamplerState s(1);
  s.gamma[0] = true;
  s.vel[0] = 0.5;
  EXPECT_THROW(run(Dynamics{Family::ZigZag, 0.6, 0.0}, StdGaussian{}, s, 1.0, 1), ContractViolation);
}
