#pragma once

// Event-driven simulation loop shared by every sampler family and target.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rjpdmp/dynamics.hpp"
#include "rjpdmp/errors.hpp"
#include "rjpdmp/poisson.hpp"
#include "rjpdmp/rng.hpp"
#include "rjpdmp/state.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp {

struct StopRule {
  double t_end = std::numeric_limits<double>::infinity();                  // absolute process time
  std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max();   // accepted events in this call
};

struct RunOptions {
  double checkpoint_interval = 0.0;  // 0 disables checkpoint records
  bool record_rejects = false;       // emit ThinningReject records to the observer
  bool check_invariants = false;     // validate the state after every event
  double bound_tolerance = 1e-9;     // relative slack before a rate above its bound is fatal
};

struct RunStats {
  std::uint64_t n_events = 0;  // accepted events, excluding checkpoints
  std::uint64_t n_thinning_rejects = 0;
  std::uint64_t n_grad_component_evals = 0;
  std::uint64_t n_zero_crossings = 0;  // zero hits where the coordinate survived
  std::uint64_t n_births = 0;
  std::uint64_t n_deaths = 0;
  double wall_time = 0.0;  // seconds

  std::uint64_t iterations() const { return n_events + n_thinning_rejects; }

  RunStats& operator+=(const RunStats& o) {
    n_events += o.n_events;
    n_thinning_rejects += o.n_thinning_rejects;
    n_grad_component_evals += o.n_grad_component_evals;
    n_zero_crossings += o.n_zero_crossings;
    n_births += o.n_births;
    n_deaths += o.n_deaths;
    wall_time += o.wall_time;
    return *this;
  }
};

/// Observer that ignores everything.
struct NullObserver {
  void on_segment(const SamplerState&, double) {}
  void on_event(double, EventKind, Index, const SamplerState&) {}
};

/// Records every observed event into a Skeleton.
class SkeletonRecorder {
 public:
  explicit SkeletonRecorder(const SamplerState& initial) { skeleton_.initial = initial; skeleton_.t_final = initial.t; }

  void on_segment(const SamplerState&, double t_end) { skeleton_.t_final = t_end; }
  void on_event(double t, EventKind kind, Index coord, const SamplerState& after) {
    skeleton_.events.push_back({t, kind, coord, after});
    skeleton_.t_final = t;
  }

  Skeleton& skeleton() { return skeleton_; }
  Skeleton take() { return std::move(skeleton_); }

 private:
  Skeleton skeleton_;
};

/// Streams segment-exact time integrals of theta and gamma, optionally keyed by
/// model. Only time after `start_time` contributes.
class PathAccumulator {
 public:
  struct ModelIntegral {
    double time = 0.0;
    Vector theta_integral;
  };

  explicit PathAccumulator(Index p, double start_time = 0.0, bool per_model = false)
      : start_(start_time), per_model_(per_model), theta_int_(Vector::Zero(p)), gamma_int_(Vector::Zero(p)) {}

  void on_segment(const SamplerState& s, double t_end) {
    const double t0 = std::max(s.t, start_);
    if (!(t_end > t0)) return;
    const double dt = t_end - t0;
    const double shift = t0 - s.t;
    total_ += dt;
    ModelIntegral* model = nullptr;
    if (per_model_) {
      model = &models_[mask_key(s.gamma)];
      if (model->theta_integral.size() == 0) model->theta_integral = Vector::Zero(s.dim());
      model->time += dt;
    }
    for (Index j = 0; j < s.dim(); ++j) {
      if (!s.gamma[j]) continue;
      const double mid = s.theta[j] + (shift + 0.5 * dt) * s.vel[j];
      theta_int_[j] += mid * dt;
      gamma_int_[j] += dt;
      if (model) model->theta_integral[j] += mid * dt;
    }
  }
  void on_event(double, EventKind, Index, const SamplerState&) {}

  double total_time() const { return total_; }
  Vector mean() const {
    require_time();
    return theta_int_ / total_;
  }
  Vector ppi() const {
    require_time();
    return gamma_int_ / total_;
  }
  const Vector& theta_integral() const { return theta_int_; }
  const Vector& gamma_integral() const { return gamma_int_; }
  const std::map<std::string, ModelIntegral>& models() const { return models_; }

  /// Time-average of theta while the process sat in `mask`; nullopt if never visited.
  std::optional<Vector> conditional_mean(const Mask& mask) const {
    require(per_model_, "PathAccumulator: per-model tracking disabled");
    const auto it = models_.find(mask_key(mask));
    if (it == models_.end() || !(it->second.time > 0.0)) return std::nullopt;
    return Vector(it->second.theta_integral / it->second.time);
  }

  static std::string mask_key(const Mask& m) {
    std::string k(m.size(), '0');
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) k[i] = '1';
    return k;
  }

 private:
  void require_time() const {
    if (!(total_ > 0.0)) throw ContractViolation("PathAccumulator: no accumulated time");
  }

  double start_;
  bool per_model_;
  double total_ = 0.0;
  Vector theta_int_;
  Vector gamma_int_;
  std::map<std::string, ModelIntegral> models_;
};

/// Feeds a recorded skeleton through an observer, segment by segment.
template <class Observer>
void replay(const Skeleton& sk, Observer& obs) {
  const SamplerState* cur = &sk.initial;
  for (const auto& e : sk.events) {
    obs.on_segment(*cur, e.t);
    obs.on_event(e.t, e.kind, e.coord, e.state_after);
    cur = &e.state_after;
  }
  obs.on_segment(*cur, sk.t_final);
}

/// Forwards every callback to two observers in order.
template <class A, class B>
struct TeeObserver {
  A& first;
  B& second;
  void on_segment(const SamplerState& s, double t_end) {
    first.on_segment(s, t_end);
    second.on_segment(s, t_end);
  }
  void on_event(double t, EventKind k, Index c, const SamplerState& after) {
    first.on_event(t, k, c, after);
    second.on_event(t, k, c, after);
  }
};

namespace detail {

// Tie priority: lower value wins.
constexpr int priority(EventKind k) {
  switch (k) {
    case EventKind::HitZero: return 0;
    case EventKind::Reflect: return 1;
    case EventKind::Reintroduce: return 2;
    case EventKind::Refresh: return 3;
    case EventKind::Checkpoint: return 4;
    case EventKind::ThinningReject: return 5;
  }
  return 6;
}

struct Candidate {
  double dt = std::numeric_limits<double>::infinity();
  EventKind kind = EventKind::Checkpoint;
  Index coord = -1;
  BoundCoeffs bound{};
  bool live = false;

  void offer(double d, EventKind k, Index c, BoundCoeffs b = {}) {
    if (!live || d < dt || (d == dt && priority(k) < priority(kind))) {
      dt = d;
      kind = k;
      coord = c;
      bound = b;
      live = true;
    }
  }
};

inline void check_bound(double rate, const BoundCoeffs& b, double t, double tol) {
  const double bound = b.at(t);
  if (rate > bound * (1.0 + tol) + tol) throw ThinningBoundViolation("thinning bound violated", rate, bound);
}

}  // namespace detail

/// Runs the process from `state` (modified in place) until the stop rule fires.
/// Can be called repeatedly to continue a chain.
template <class Model, class Observer>
RunStats simulate(const Dynamics& dyn, const Model& model, SamplerState& state, const StopRule& stop, Rng& rng,
                  Observer& obs, const RunOptions& opts = {}) {
  dyn.validate();
  require(state.dim() == model.dim(), "simulate: state dimension does not match target");
  {
    const std::string bad = state_violation(state, velocity_domain(dyn.family));
    if (!bad.empty()) throw ContractViolation("simulate: invalid initial state: " + bad);
  }
  const auto wall_start = std::chrono::steady_clock::now();
  RunStats stats;
  EvalCounters counters;
  const Index p = model.dim();
  const bool jumps = model.trans_dimensional();
  const bool bps = dyn.is_bps();

  std::vector<Index> active, inactive;
  std::vector<BoundCoeffs> bounds;
  std::vector<double> birth_weights;
  Vector grad;
  double next_checkpoint = std::numeric_limits<double>::infinity();
  if (opts.checkpoint_interval > 0.0)
    next_checkpoint = (std::floor(state.t / opts.checkpoint_interval) + 1.0) * opts.checkpoint_interval;

  auto emit = [&](EventKind kind, Index coord) {
    obs.on_event(state.t, kind, coord, state);
    if (opts.check_invariants) {
      const std::string bad = state_violation(state, velocity_domain(dyn.family));
      if (!bad.empty()) throw ContractViolation("simulate: state invariant broken after " +
                                                std::string(to_string(kind)) + ": " + bad);
    }
  };

  while (stats.n_events < stop.max_events && state.t < stop.t_end) {
    active.clear();
    inactive.clear();
    for (Index j = 0; j < p; ++j) (state.gamma[j] ? active : inactive).push_back(j);
    const Index k = static_cast<Index>(active.size());

    detail::Candidate best;

    // Reflection clocks.
    if (k >= 1) {
      if (bps) {
        const BoundCoeffs b = model.bps_bound(state, counters);
        if (auto dt = simulate_linear_poisson(b, rng.uniform())) best.offer(*dt, EventKind::Reflect, -1, b);
      } else {
        model.zigzag_bounds(state, std::span<const Index>(active), bounds, counters);
        for (Index i = 0; i < k; ++i)
          if (auto dt = simulate_linear_poisson(bounds[i], rng.uniform()))
            best.offer(*dt, EventKind::Reflect, active[i], bounds[i]);
      }
    }

    // Boundary hits.
    if (jumps)
      if (auto hit = next_zero_hit(state)) best.offer(hit->delta_t, EventKind::HitZero, hit->coord);

    // Reintroduction: one superposed clock over all inactive coordinates.
    double birth_total = 0.0;
    if (jumps && !inactive.empty()) {
      birth_weights.resize(inactive.size());
      const double factor = dyn.p_jump * birth_velocity_factor(dyn.family, k);
      for (std::size_t i = 0; i < inactive.size(); ++i) {
        birth_weights[i] = factor * model.birth_ratio(inactive[i]);
        birth_total += birth_weights[i];
      }
      if (birth_total > 0.0) best.offer(rng.exponential() / birth_total, EventKind::Reintroduce, -1);
    }

    if (bps && k >= 1 && dyn.lambda_refresh > 0.0)
      best.offer(rng.exponential() / dyn.lambda_refresh, EventKind::Refresh, -1);

    // Horizon and checkpoints.
    const double to_end = stop.t_end - state.t;
    const double to_checkpoint = next_checkpoint - state.t;
    if (!best.live || best.dt >= std::min(to_end, to_checkpoint)) {
      if (to_checkpoint < to_end && std::isfinite(to_checkpoint)) {
        obs.on_segment(state, next_checkpoint);
        advance_in_place(state, to_checkpoint);
        state.t = next_checkpoint;
        next_checkpoint += opts.checkpoint_interval;
        emit(EventKind::Checkpoint, -1);
        continue;
      }
      if (!std::isfinite(to_end)) throw ContractViolation("simulate: no live clock and no finite horizon");
      obs.on_segment(state, stop.t_end);
      advance_in_place(state, to_end);
      state.t = stop.t_end;
      break;
    }

    obs.on_segment(state, state.t + best.dt);
    advance_in_place(state, best.dt);

    switch (best.kind) {
      case EventKind::HitZero: {
        const Index j = best.coord;
        state.theta[j] = 0.0;
        if (rng.uniform() < dyn.p_jump) {
          state = death_project(dyn.family, j, std::move(state));
          ++stats.n_deaths;
          ++stats.n_events;
          emit(EventKind::HitZero, j);
        } else {
          ++stats.n_zero_crossings;
        }
        break;
      }
      case EventKind::Reflect: {
        if (bps) {
          const double rate = model.bps_rate(state, rng, grad, counters);
          detail::check_bound(rate, best.bound, best.dt, opts.bound_tolerance);
          if (rng.uniform() * best.bound.at(best.dt) < rate) {
            state = bps_reflect(std::move(state), grad);
            ++stats.n_events;
            emit(EventKind::Reflect, -1);
          } else {
            ++stats.n_thinning_rejects;
            if (opts.record_rejects) obs.on_event(state.t, EventKind::ThinningReject, -1, state);
          }
        } else {
          const Index j = best.coord;
          const double rate = model.zigzag_rate(j, state, rng, counters);
          detail::check_bound(rate, best.bound, best.dt, opts.bound_tolerance);
          if (rng.uniform() * best.bound.at(best.dt) < rate) {
            state.vel[j] = -state.vel[j];
            ++stats.n_events;
            emit(EventKind::Reflect, j);
          } else {
            ++stats.n_thinning_rejects;
            if (opts.record_rejects) obs.on_event(state.t, EventKind::ThinningReject, j, state);
          }
        }
        break;
      }
      case EventKind::Reintroduce: {
        double u = rng.uniform() * birth_total;
        std::size_t pick = inactive.size() - 1;
        for (std::size_t i = 0; i < inactive.size(); ++i) {
          if (u < birth_weights[i]) {
            pick = i;
            break;
          }
          u -= birth_weights[i];
        }
        const Index j = inactive[pick];
        BirthDraw draw = sample_birth_velocity(dyn.family, k + 1, state.vel, j, rng);
        state.gamma[j] = true;
        state.theta[j] = 0.0;
        state.vel = std::move(draw.new_vel);
        ++stats.n_births;
        ++stats.n_events;
        emit(EventKind::Reintroduce, j);
        break;
      }
      case EventKind::Refresh: {
        state = refresh_velocity(dyn.family, std::move(state), rng);
        ++stats.n_events;
        emit(EventKind::Refresh, -1);
        break;
      }
      default: break;
    }
  }

  stats.n_grad_component_evals = counters.grad_component_evals;
  stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return stats;
}

struct RunResult {
  Skeleton skeleton;
  RunStats stats;
};

/// Simulates on [0, T] from `init` with a fresh generator and returns the skeleton.
template <class Model>
RunResult run(const Dynamics& dyn, const Model& model, SamplerState init, double T, std::uint64_t seed,
              const RunOptions& opts = {}) {
  require(T >= 0.0 && std::isfinite(T), "run: T must be finite and nonnegative");
  Rng rng(seed);
  SkeletonRecorder rec(init);
  StopRule stop;
  stop.t_end = init.t + T;
  RunStats stats = simulate(dyn, model, init, stop, rng, rec, opts);
  Skeleton sk = rec.take();
  sk.t_final = init.t;
  return {std::move(sk), stats};
}

/// Initial state with every coordinate active at zero and a velocity drawn from
/// the family's velocity law.
inline SamplerState initial_state_full(Family family, Index p, Rng& rng) {
  SamplerState s(p);
  std::fill(s.gamma.begin(), s.gamma.end(), true);
  draw_velocity(family, s, rng);
  return s;
}

inline SamplerState initial_state_empty(Index p) { return SamplerState(p); }

/// Initial state at a given position with every coordinate of `mask` active.
inline SamplerState initial_state_at(Family family, const Vector& theta, const Mask& mask, Rng& rng) {
  SamplerState s(theta.size());
  s.gamma = mask;
  for (Index j = 0; j < theta.size(); ++j) s.theta[j] = mask[j] ? theta[j] : 0.0;
  draw_velocity(family, s, rng);
  return s;
}

}  // namespace rjpdmp
