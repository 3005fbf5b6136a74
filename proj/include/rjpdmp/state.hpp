#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rjpdmp/errors.hpp"

namespace rjpdmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Mask = std::vector<bool>;

/// Full state of a reversible-jump PDMP: position, velocity, inclusion mask and clock.
struct SamplerState {
  Vector theta;
  Vector vel;
  Mask gamma;
  double t = 0.0;

  SamplerState() = default;
  explicit SamplerState(Index p) : theta(Vector::Zero(p)), vel(Vector::Zero(p)), gamma(p, false) {}

  Index dim() const { return theta.size(); }

  Index active_count() const {
    Index k = 0;
    for (bool g : gamma) k += g ? 1 : 0;
    return k;
  }

  std::vector<Index> active() const {
    std::vector<Index> idx;
    for (Index j = 0; j < dim(); ++j)
      if (gamma[j]) idx.push_back(j);
    return idx;
  }

  std::vector<Index> inactive() const {
    std::vector<Index> idx;
    for (Index j = 0; j < dim(); ++j)
      if (!gamma[j]) idx.push_back(j);
    return idx;
  }

  friend bool operator==(const SamplerState& a, const SamplerState& b) {
    return a.t == b.t && a.gamma == b.gamma && a.theta == b.theta && a.vel == b.vel;
  }
};

enum class EventKind { Reflect, HitZero, Reintroduce, Refresh, ThinningReject, Checkpoint };

constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Reflect: return "reflect";
    case EventKind::HitZero: return "hit_zero";
    case EventKind::Reintroduce: return "reintroduce";
    case EventKind::Refresh: return "refresh";
    case EventKind::ThinningReject: return "thinning_reject";
    case EventKind::Checkpoint: return "checkpoint";
  }
  return "unknown";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::Reflect, EventKind::HitZero, EventKind::Reintroduce, EventKind::Refresh,
                 EventKind::ThinningReject, EventKind::Checkpoint})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// One skeleton point. `coord` is -1 for events that act on the whole velocity.
struct EventRecord {
  double t = 0.0;
  EventKind kind = EventKind::Reflect;
  Index coord = -1;
  SamplerState state_after;
};

/// Recorded trajectory. Between records the position moves linearly with the
/// velocity of the earlier record; the final segment runs to `t_final`.
struct Skeleton {
  SamplerState initial;
  std::vector<EventRecord> events;
  double t_final = 0.0;

  Index dim() const { return initial.dim(); }
};

/// Candidate event from one clock. delta_t is relative to the current time.
struct ClockProposal {
  double delta_t = 0.0;
  EventKind kind = EventKind::Reflect;
  Index coord = -1;
};

/// Moves every active coordinate along its velocity for `dt`.
inline SamplerState advance(SamplerState state, double dt) {
  require(dt >= 0.0, "advance: dt must be nonnegative");
  if (dt == 0.0) return state;
  for (Index j = 0; j < state.dim(); ++j)
    if (state.gamma[j]) state.theta[j] += dt * state.vel[j];
  state.t += dt;
  return state;
}

/// In-place variant used by the engine.
inline void advance_in_place(SamplerState& state, double dt) {
  for (Index j = 0; j < state.dim(); ++j)
    if (state.gamma[j]) state.theta[j] += dt * state.vel[j];
  state.t += dt;
}

/// Earliest time at which an active coordinate moving toward zero reaches it.
/// A coordinate sitting exactly at zero is moving away (or still) and is skipped.
inline std::optional<ClockProposal> next_zero_hit(const SamplerState& state) {
  std::optional<ClockProposal> best;
  for (Index j = 0; j < state.dim(); ++j) {
    if (!state.gamma[j]) continue;
    const double th = state.theta[j];
    const double v = state.vel[j];
    if (th * v < 0.0) {
      const double dt = -th / v;
      if (!best || dt < best->delta_t) best = ClockProposal{dt, EventKind::HitZero, j};
    }
  }
  return best;
}

/// Position at time t given the record that starts the segment containing t.
inline Vector position_at(const SamplerState& segment_start, double t) {
  Vector out = segment_start.theta;
  const double dt = t - segment_start.t;
  for (Index j = 0; j < out.size(); ++j)
    if (segment_start.gamma[j]) out[j] += dt * segment_start.vel[j];
  return out;
}

enum class VelocityDomain { PlusMinusOne, UnitSphere, Unconstrained };

/// Checks the mask/velocity invariants of a state; returns a description of the
/// first violation or an empty string.
inline std::string state_violation(const SamplerState& s, VelocityDomain domain, double sphere_tol = 1e-9) {
  if (s.theta.size() != s.vel.size() || static_cast<Index>(s.gamma.size()) != s.theta.size())
    return "size mismatch";
  double norm2 = 0.0;
  Index k = 0;
  for (Index j = 0; j < s.dim(); ++j) {
    if (!s.gamma[j]) {
      if (s.theta[j] != 0.0 || s.vel[j] != 0.0) return "inactive coordinate with nonzero theta or velocity";
      continue;
    }
    ++k;
    norm2 += s.vel[j] * s.vel[j];
    if (!std::isfinite(s.theta[j]) || !std::isfinite(s.vel[j])) return "non-finite active coordinate";
    if (domain == VelocityDomain::PlusMinusOne && std::abs(s.vel[j]) != 1.0) return "zigzag velocity not +-1";
  }
  if (domain == VelocityDomain::UnitSphere && k >= 1 && std::abs(std::sqrt(norm2) - 1.0) > sphere_tol)
    return "sphere velocity not unit norm";
  return {};
}

}  // namespace rjpdmp
