#pragma once

// Uniform entry point for running one chain of any sampler on any target,
// plus a small worker pool for independent replicates.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "rjpdmp/dynamics.hpp"
#include "rjpdmp/engine.hpp"
#include "rjpdmp/errors.hpp"
#include "rjpdmp/estimators.hpp"
#include "rjpdmp/gibbs.hpp"
#include "rjpdmp/subsampling.hpp"
#include "rjpdmp/targets.hpp"

namespace rjpdmp {

enum class TargetKind { Logistic, Robust, SpikeSlab };

inline std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Logistic: return "logistic";
    case TargetKind::Robust: return "robust";
    case TargetKind::SpikeSlab: return "spike_slab";
  }
  return "unknown";
}

inline std::optional<TargetKind> target_kind_from_string(std::string_view s) {
  for (auto k : {TargetKind::Logistic, TargetKind::Robust, TargetKind::SpikeSlab})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Everything needed to build a posterior target.
struct TargetSpec {
  TargetKind kind = TargetKind::Logistic;
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const Dataset> holdout;
  SpikeSlabPrior prior;
  // analytic spike-and-slab only
  Index p = 0;
  GaussianSpikeSlabTarget::Coordinate coordinate;

  Index dim() const { return kind == TargetKind::SpikeSlab ? p : data->p(); }

  void validate() const {
    if (kind == TargetKind::SpikeSlab) {
      if (p < 1) throw ConfigError("spike_slab target needs p >= 1");
      GaussianSpikeSlabTarget(p, coordinate);
      return;
    }
    if (!data) throw ConfigError(std::string(to_string(kind)) + " target needs a dataset");
    prior.validate();
    data->validate(kind == TargetKind::Logistic);
    if (holdout && holdout->p() != data->p()) throw ConfigError("holdout has a different number of covariates");
  }
};

enum class SamplerKind { ZigZag, BpsGauss, BpsSphere, Gibbs };

inline std::string_view to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::ZigZag: return "zigzag";
    case SamplerKind::BpsGauss: return "bps_gauss";
    case SamplerKind::BpsSphere: return "bps_sphere";
    case SamplerKind::Gibbs: return "gibbs";
  }
  return "unknown";
}

inline std::optional<SamplerKind> sampler_kind_from_string(std::string_view s) {
  for (auto k : {SamplerKind::ZigZag, SamplerKind::BpsGauss, SamplerKind::BpsSphere, SamplerKind::Gibbs})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline Family family_of(SamplerKind k) {
  switch (k) {
    case SamplerKind::ZigZag: return Family::ZigZag;
    case SamplerKind::BpsGauss: return Family::BpsGauss;
    case SamplerKind::BpsSphere: return Family::BpsSphere;
    case SamplerKind::Gibbs: break;
  }
  throw ContractViolation("family_of: Gibbs is not a PDMP family");
}

enum class InitKind { Full, Empty, ControlVariate };

inline std::optional<InitKind> init_kind_from_string(std::string_view s) {
  if (s == "full") return InitKind::Full;
  if (s == "empty") return InitKind::Empty;
  if (s == "cv") return InitKind::ControlVariate;
  return std::nullopt;
}

struct SamplerSpec {
  SamplerKind kind = SamplerKind::ZigZag;
  double p_jump = 0.6;
  double lambda_refresh = 0.1;
  std::optional<SubsampleMode> subsample;
  InitKind init = InitKind::Full;
  Mask cv_model;  // empty: every coordinate

  friend bool operator==(const SamplerSpec&, const SamplerSpec&) = default;

  std::string label() const {
    std::string s(to_string(kind));
    if (subsample) s += std::string("_") + std::string(to_string(*subsample));
    return s;
  }

  void validate(const TargetSpec& t) const {
    if (kind == SamplerKind::Gibbs) {
      if (t.kind != TargetKind::Logistic) throw ConfigError("the Gibbs sampler only supports the logistic target");
      if (subsample) throw ConfigError("subsampling applies to PDMP samplers only");
      return;
    }
    Dynamics{family_of(kind), p_jump, lambda_refresh}.validate();
    if (subsample && t.kind == TargetKind::SpikeSlab) throw ConfigError("subsampling needs a regression target");
    if (init == InitKind::ControlVariate && t.kind == TargetKind::SpikeSlab)
      throw ConfigError("init = \"cv\" needs a regression target");
    if (!cv_model.empty() && static_cast<Index>(cv_model.size()) != t.dim())
      throw ConfigError("cv_model length does not match the number of covariates");
  }
};

/// Budget for one chain. PDMP chains stop at `events` accepted events if
/// positive, otherwise at process time T. Burn-in is a fraction of the budget.
struct Budget {
  double T = 0.0;
  std::uint64_t events = 0;
  std::uint64_t gibbs_iterations = 0;
  double burn_in = 0.1;

  friend bool operator==(const Budget&, const Budget&) = default;

  void validate(SamplerKind k) const {
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("burn_in must lie in [0, 1)");
    if (k == SamplerKind::Gibbs) {
      if (gibbs_iterations < 2) throw ConfigError("Gibbs runs need at least two iterations");
    } else if (events == 0 && !(T >= 0.0 && std::isfinite(T))) {
      throw ConfigError("PDMP runs need a finite T >= 0 or a positive event budget");
    }
  }
};

struct ChainOptions {
  bool keep_path = false;       // store the skeleton or the Gibbs chain
  bool per_model = false;       // conditional means keyed by model
  double pred_stride = 0.0;     // > 0: predictive MSE on the holdout
  double checkpoint_interval = 0.0;
  bool check_invariants = false;
};

struct ChainOutput {
  std::optional<SummarySet> summary;  // absent when the budget covers no time
  RunStats stats;
  double iterations = 0.0;
  double wall_time = 0.0;
  std::optional<Skeleton> skeleton;
  std::vector<GibbsSample> chain;
  std::uint64_t cv_fallbacks = 0;
};

namespace runner_detail {

inline Mask cv_mask(const SamplerSpec& s, Index p) { return s.cv_model.empty() ? Mask(static_cast<std::size_t>(p), true) : s.cv_model; }

template <class Model>
ChainOutput run_pdmp(const Model& model, const TargetSpec& t, const SamplerSpec& s, const Budget& b, std::uint64_t seed,
                     const ChainOptions& opt, const SamplerState* start) {
  Rng rng(seed);
  const Family fam = family_of(s.kind);
  const Dynamics dyn{fam, s.p_jump, s.lambda_refresh};
  const Index p = model.dim();
  SamplerState state = start ? *start : SamplerState(p);
  if (start) {
    draw_velocity(fam, state, rng);
  } else if (s.init == InitKind::Full) {
    state = initial_state_full(fam, p, rng);
  }
  RunOptions ro;
  ro.checkpoint_interval = opt.checkpoint_interval;
  ro.check_invariants = opt.check_invariants;

  ChainOutput out;
  SkeletonRecorder rec(state);
  NullObserver null_obs;
  const auto wall0 = std::chrono::steady_clock::now();

  auto run_phase = [&](const StopRule& stop, auto& obs) {
    if (opt.keep_path) {
      TeeObserver<SkeletonRecorder, std::remove_reference_t<decltype(obs)>> tee{rec, obs};
      out.stats += simulate(dyn, model, state, stop, rng, tee, ro);
    } else {
      out.stats += simulate(dyn, model, state, stop, rng, obs, ro);
    }
  };

  StopRule burn, main;
  double accumulate_from = 0.0;
  if (b.events > 0) {
    burn.max_events = static_cast<std::uint64_t>(std::floor(b.burn_in * static_cast<double>(b.events)));
    main.max_events = b.events - burn.max_events;
    if (burn.max_events > 0) run_phase(burn, null_obs);
    accumulate_from = state.t;
  } else {
    main.t_end = b.T;
    accumulate_from = b.burn_in * b.T;
  }
  PathAccumulator acc(p, accumulate_from, opt.per_model);
  std::optional<PredictiveAccumulator> pred;
  if (opt.pred_stride > 0.0) {
    if (!t.holdout) throw ConfigError("predictive MSE needs a holdout dataset");
    pred.emplace(t.holdout, opt.pred_stride, accumulate_from);
    TeeObserver<PathAccumulator, PredictiveAccumulator> both{acc, *pred};
    run_phase(main, both);
  } else {
    run_phase(main, acc);
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  out.iterations = static_cast<double>(out.stats.iterations());
  if (acc.total_time() > 0.0) {
    out.summary = summarize(acc);
    if (pred) out.summary->pred_mse = pred->value();
  }
  if (opt.keep_path) {
    out.skeleton = rec.take();
    out.skeleton->t_final = state.t;
  }
  return out;
}

template <class Link>
ChainOutput run_glm(const TargetSpec& t, const SamplerSpec& s, const Budget& b, std::uint64_t seed,
                    const ChainOptions& opt) {
  GlmTarget<Link> full(t.data, t.prior);
  const Index p = full.dim();
  std::optional<ControlVariate> cv;
  const bool need_cv = s.init == InitKind::ControlVariate || s.subsample == SubsampleMode::ControlVariate;
  if (need_cv) cv = ControlVariate::at_mode(full, cv_mask(s, p));
  std::optional<SamplerState> start;
  if (s.init == InitKind::ControlVariate) {
    SamplerState st(p);
    st.gamma = cv->model_ref;
    st.theta = cv->theta_ref;
    start = st;
  }
  const SamplerState* sp = start ? &*start : nullptr;
  if (s.subsample) {
    SubsampledTarget<Link> ss(full, *s.subsample, cv);
    ChainOutput out = run_pdmp(ss, t, s, b, seed, opt, sp);
    out.cv_fallbacks = ss.cv_fallbacks();
    return out;
  }
  return run_pdmp(full, t, s, b, seed, opt, sp);
}

inline ChainOutput run_gibbs_chain(const TargetSpec& t, const Budget& b, std::uint64_t seed, const ChainOptions& opt) {
  Rng rng(seed);
  const Dataset& d = *t.data;
  GibbsState st = gibbs_initial_state(d, rng);
  const auto burn = static_cast<std::uint64_t>(std::floor(b.burn_in * static_cast<double>(b.gibbs_iterations)));
  GibbsAccumulator acc(d.p(), burn);
  ChainOutput out;
  double pred_sum = 0.0;
  std::uint64_t pred_count = 0;
  std::map<std::string, std::pair<double, Vector>> per_model;
  auto sink = [&](std::uint64_t it, const GibbsState& s) {
    acc(it, s);
    if (opt.keep_path) out.chain.push_back({s.gamma, s.theta});
    if (it < burn) return;
    if (opt.pred_stride > 0.0) {
      pred_sum += (t.holdout->X * s.theta - t.holdout->y).squaredNorm() / static_cast<double>(t.holdout->n());
      ++pred_count;
    }
    if (opt.per_model) {
      auto& slot = per_model[PathAccumulator::mask_key(s.gamma)];
      if (slot.second.size() == 0) slot.second = Vector::Zero(d.p());
      slot.first += 1.0;
      slot.second += s.theta;
    }
  };
  if (opt.pred_stride > 0.0 && !t.holdout) throw ConfigError("predictive MSE needs a holdout dataset");
  const GibbsStats gs = run_gibbs(d, t.prior, b.gibbs_iterations, rng, st, sink);
  out.wall_time = gs.wall_time;
  out.iterations = static_cast<double>(gs.n_iter);
  out.stats.wall_time = gs.wall_time;
  SummarySet sum;
  sum.ppi = acc.ppi();
  sum.mean = acc.mean();
  for (auto& [k, v] : per_model) sum.cond_mean[k] = v.second / v.first;
  if (pred_count > 0) sum.pred_mse = pred_sum / static_cast<double>(pred_count);
  out.summary = std::move(sum);
  return out;
}

}  // namespace runner_detail

/// Runs one chain with generator seed `seed`.
inline ChainOutput run_chain(const TargetSpec& t, const SamplerSpec& s, const Budget& b, std::uint64_t seed,
                             const ChainOptions& opt = {}) {
  t.validate();
  s.validate(t);
  b.validate(s.kind);
  if (s.kind == SamplerKind::Gibbs) return runner_detail::run_gibbs_chain(t, b, seed, opt);
  switch (t.kind) {
    case TargetKind::Logistic: return runner_detail::run_glm<LogisticLink>(t, s, b, seed, opt);
    case TargetKind::Robust: return runner_detail::run_glm<RobustLink>(t, s, b, seed, opt);
    case TargetKind::SpikeSlab: {
      const GaussianSpikeSlabTarget model(t.p, t.coordinate);
      return runner_detail::run_pdmp(model, t, s, b, seed, opt, nullptr);
    }
  }
  throw ContractViolation("run_chain: unknown target");
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be
/// written to pre-sized, index-addressed storage. The first exception is rethrown.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// R independent replicates with seeds derive_seed(seed, r).
inline std::vector<ChainOutput> run_replicates(const TargetSpec& t, const SamplerSpec& s, const Budget& b,
                                               std::uint64_t seed, std::size_t R, unsigned threads,
                                               const ChainOptions& opt = {}) {
  std::vector<ChainOutput> out(R);
  parallel_for(R, threads, [&](std::size_t r) { out[r] = run_chain(t, s, b, derive_seed(seed, r), opt); });
  return out;
}

}  // namespace rjpdmp
