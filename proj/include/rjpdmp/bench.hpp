#pragma once

// Replicated benchmarks: every sampler is run R times per grid cell, the
// replicate estimates are scored against a reference value, and RSE/RE are
// reported relative to a reference sampler.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rjpdmp/estimators.hpp"
#include "rjpdmp/generate.hpp"
#include "rjpdmp/runner.hpp"

namespace rjpdmp {

struct BenchCell {
  Index n = 0;
  Index p = 0;
};

struct BenchConfig {
  TargetKind target = TargetKind::Logistic;
  int scenario = 1;                  // logistic data recipe
  std::vector<BenchCell> grid;       // ignored for spike_slab (uses `analytic`)
  std::optional<double> w;           // slab weight; exclusive with p0
  std::optional<double> p0;          // w = p0 / p
  double sigma2 = 10.0;
  TargetSpec analytic;               // spike_slab target definition
  std::vector<SamplerSpec> samplers;
  Budget budget;                     // replicate budget for every sampler
  std::optional<SamplerSpec> reference_sampler;  // defaults: Gibbs for logistic, first sampler otherwise
  Budget reference_budget;           // budget of the reference sampler replicates
  Budget truth_budget;               // long Gibbs run giving q when no closed form exists
  std::size_t replicates = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    if (replicates < 2) throw ConfigError("bench: need at least two replicates");
    if (samplers.empty()) throw ConfigError("bench: no samplers listed");
    if (w && p0) throw ConfigError("bench: give either w or p0, not both");
    if (target == TargetKind::SpikeSlab) {
      analytic.validate();
    } else if (grid.empty()) {
      throw ConfigError("bench: empty (n, p) grid");
    }
    if (target == TargetKind::Robust) throw ConfigError("bench: the robust target has no reference sampler");
  }
};

struct SamplerReport {
  std::string sampler;
  QuantityReport ppi;
  QuantityReport mean;
  std::vector<Vector> ppi_estimates;
  std::vector<Vector> mean_estimates;
};

struct CellReport {
  BenchCell cell;
  std::string reference;
  Vector truth_ppi;
  Vector truth_mean;
  std::vector<SamplerReport> samplers;
};

namespace bench_detail {

inline SamplerSpec gibbs_spec() {
  SamplerSpec s;
  s.kind = SamplerKind::Gibbs;
  return s;
}

struct Replicated {
  ReplicateSet ppi, mean;
};

inline Replicated collect(const std::vector<ChainOutput>& runs) {
  Replicated r;
  double it = 0.0, wt = 0.0;
  for (const auto& c : runs) {
    if (!c.summary) throw ConfigError("bench: a replicate covered no time after burn-in");
    r.ppi.estimates.push_back(c.summary->ppi);
    r.mean.estimates.push_back(c.summary->mean);
    it += c.iterations;
    wt += c.wall_time;
  }
  const double R = static_cast<double>(runs.size());
  r.ppi.iterations = r.mean.iterations = it / R;
  r.ppi.wall_time = r.mean.wall_time = wt / R;
  return r;
}

// Drops the fields a sampler kind ignores so equivalent specs compare equal.
inline SamplerSpec canonical(SamplerSpec s) {
  const SamplerSpec defaults;
  if (s.kind == SamplerKind::Gibbs) {
    SamplerSpec g;
    g.kind = SamplerKind::Gibbs;
    return g;
  }
  if (s.kind == SamplerKind::ZigZag) s.lambda_refresh = defaults.lambda_refresh;
  return s;
}

inline Budget budget_for(const Budget& b, SamplerKind k) {
  Budget out = b;
  if (k == SamplerKind::Gibbs && out.gibbs_iterations == 0) out.gibbs_iterations = out.events;
  return out;
}

}  // namespace bench_detail

/// Benchmarks one target. `truth` is the reference value q of (ppi, mean).
inline CellReport bench_target(const BenchConfig& cfg, const TargetSpec& target, const BenchCell& cell,
                               const Vector& truth_ppi, const Vector& truth_mean, std::uint64_t seed) {
  CellReport report;
  report.cell = cell;
  report.truth_ppi = truth_ppi;
  report.truth_mean = truth_mean;
  SamplerSpec ref = cfg.reference_sampler ? *cfg.reference_sampler
                    : target.kind == TargetKind::Logistic ? bench_detail::gibbs_spec()
                                                          : cfg.samplers.front();
  report.reference = ref.label();
  const auto ref_runs = run_replicates(target, ref, bench_detail::budget_for(cfg.reference_budget, ref.kind),
                                       derive_seed(seed, 1000), cfg.replicates, cfg.threads);
  const auto ref_rep = bench_detail::collect(ref_runs);
  for (std::size_t k = 0; k < cfg.samplers.size(); ++k) {
    const SamplerSpec& s = cfg.samplers[k];
    const Budget budget = bench_detail::budget_for(cfg.budget, s.kind);
    const bool same_as_reference = bench_detail::canonical(s) == bench_detail::canonical(ref) && budget == bench_detail::budget_for(cfg.reference_budget, ref.kind);
    const auto rep = same_as_reference
                         ? ref_rep
                         : bench_detail::collect(run_replicates(target, s, budget, derive_seed(seed, 2000 + k),
                                                                cfg.replicates, cfg.threads));
    SamplerReport sr;
    sr.sampler = s.label();
    sr.ppi = efficiency_metrics(rep.ppi, ref_rep.ppi, truth_ppi);
    sr.mean = efficiency_metrics(rep.mean, ref_rep.mean, truth_mean);
    sr.ppi_estimates = rep.ppi.estimates;
    sr.mean_estimates = rep.mean.estimates;
    report.samplers.push_back(std::move(sr));
  }
  return report;
}

inline SpikeSlabPrior bench_prior(const BenchConfig& cfg, Index p) {
  SpikeSlabPrior prior;
  prior.sigma2 = cfg.sigma2;
  if (cfg.p0) prior.w = *cfg.p0 / static_cast<double>(p);
  if (cfg.w) prior.w = *cfg.w;
  prior.validate();
  return prior;
}

/// Runs the whole benchmark grid.
inline std::vector<CellReport> run_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<CellReport> out;
  if (cfg.target == TargetKind::SpikeSlab) {
    const GaussianSpikeSlabTarget model(cfg.analytic.p, cfg.analytic.coordinate);
    Vector ppi(cfg.analytic.p), mean(cfg.analytic.p);
    for (Index j = 0; j < cfg.analytic.p; ++j) {
      ppi[j] = model.inclusion_probability(j);
      mean[j] = model.marginal_mean(j);
    }
    out.push_back(bench_target(cfg, cfg.analytic, {0, cfg.analytic.p}, ppi, mean, cfg.seed));
    return out;
  }
  for (std::size_t c = 0; c < cfg.grid.size(); ++c) {
    const BenchCell cell = cfg.grid[c];
    Rng data_rng(derive_seed(cfg.seed, 7000 + c));
    TargetSpec t;
    t.kind = TargetKind::Logistic;
    t.data = std::make_shared<const Dataset>(generate_scenario(cfg.scenario, cell.n, cell.p, data_rng).data);
    t.prior = bench_prior(cfg, cell.p);
    const ChainOutput truth =
        run_chain(t, bench_detail::gibbs_spec(), bench_detail::budget_for(cfg.truth_budget, SamplerKind::Gibbs),
                  derive_seed(cfg.seed, 9000 + c));
    out.push_back(bench_target(cfg, t, cell, truth.summary->ppi, truth.summary->mean, derive_seed(cfg.seed, c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tuning sweep on the analytic target

struct SweepConfig {
  TargetSpec target;  // spike_slab
  std::vector<SamplerKind> families;
  std::vector<double> p_jump;
  std::vector<double> lambda_refresh;  // BPS cells only; ZigZag uses the first value
  Budget budget;
  std::size_t replicates = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    if (target.kind != TargetKind::SpikeSlab) throw ConfigError("sweep: target must be spike_slab");
    target.validate();
    if (families.empty() || p_jump.empty() || lambda_refresh.empty()) throw ConfigError("sweep: empty grid");
    if (replicates < 2) throw ConfigError("sweep: need at least two replicates");
    for (auto f : families)
      if (f == SamplerKind::Gibbs) throw ConfigError("sweep: Gibbs has no tuning parameters");
  }
};

struct SweepCell {
  SamplerKind family;
  double p_jump;
  double lambda_refresh;
  double mse_ppi;   // median over coordinates of the replicate MSE
  double mse_mean;
  double var_ppi;   // median over coordinates of the replicate variance
  double var_mean;
};

inline std::vector<SweepCell> run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const GaussianSpikeSlabTarget model(cfg.target.p, cfg.target.coordinate);
  Vector ppi(cfg.target.p), mean(cfg.target.p);
  for (Index j = 0; j < cfg.target.p; ++j) {
    ppi[j] = model.inclusion_probability(j);
    mean[j] = model.marginal_mean(j);
  }
  std::vector<SweepCell> out;
  std::uint64_t cell_id = 0;
  for (SamplerKind f : cfg.families) {
    const std::vector<double> lambdas = f == SamplerKind::ZigZag ? std::vector<double>{cfg.lambda_refresh.front()}
                                                                 : cfg.lambda_refresh;
    for (double pj : cfg.p_jump)
      for (double lr : lambdas) {
        SamplerSpec s;
        s.kind = f;
        s.p_jump = pj;
        s.lambda_refresh = lr;
        const auto runs = run_replicates(cfg.target, s, cfg.budget, derive_seed(cfg.seed, cell_id++), cfg.replicates,
                                         cfg.threads);
        const auto rep = bench_detail::collect(runs);
        const auto var = [](const std::vector<Vector>& e) {
          const Vector se = replicate_standard_error(e);
          return median(Vector(se.array().square() * static_cast<double>(e.size())));
        };
        out.push_back({f, pj, lr, median(replicate_mse(rep.ppi.estimates, ppi)),
                       median(replicate_mse(rep.mean.estimates, mean)), var(rep.ppi.estimates),
                       var(rep.mean.estimates)});
      }
  }
  return out;
}

}  // namespace rjpdmp
