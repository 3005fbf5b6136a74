#pragma once

// TOML configuration for the command-line tool. Every table has a fixed key
// set; unknown keys, wrong types and out-of-domain values raise ConfigError
// before any sampler is constructed.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <toml.hpp>

#include "rjpdmp/bench.hpp"
#include "rjpdmp/io.hpp"
#include "rjpdmp/runner.hpp"

namespace rjpdmp::cli {

struct RunSection {
  double T = 0.0;
  std::uint64_t events = 0;
  std::uint64_t iterations = 0;
  double burn_in = 0.1;
  std::uint64_t seed = 1;
  double checkpoint_interval = 0.0;
  double pred_stride = 0.0;
  std::string out_dir = "out";
  bool write_path = true;
  bool per_model = false;
};

struct BenchSection {
  int scenario = 1;
  std::vector<BenchCell> grid;
  std::vector<std::string> samplers;
  std::size_t replicates = 10;
  std::string reference = "";
  std::uint64_t reference_iterations = 0;
  std::uint64_t truth_iterations = 0;
  unsigned threads = 1;
};

struct SweepSection {
  std::vector<std::string> families;
  std::vector<double> p_jump;
  std::vector<double> lambda_refresh;
  std::size_t replicates = 10;
  unsigned threads = 1;
};

struct TargetSection {
  TargetKind kind = TargetKind::Logistic;
  std::string data;
  std::string holdout;
  std::optional<double> w;
  std::optional<double> p0;
  double sigma2 = 10.0;
  double mu = 0.0;
  Index p = 0;
  double slab_mean = 0.0;
  double slab_var = 1.0;
  std::optional<double> obs;
  std::optional<double> obs_var;
};

struct SamplerSection {
  std::string kind = "zigzag";
  double p_jump = 0.6;
  double lambda_refresh = 0.1;
  std::string subsampling = "none";
  std::string init = "full";
  std::vector<Index> cv_model;
};

struct Config {
  TargetSection target;
  SamplerSection sampler;
  RunSection run;
  BenchSection bench;
  SweepSection sweep;
  std::filesystem::path base_dir;  // relative data paths resolve against the config file
};

namespace detail {

inline void check_keys(const toml::table& t, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t)
    if (!allowed.count(std::string(k.str())))
      throw ConfigError("unknown key '" + std::string(k.str()) + "' in [" + where + "]");
}

template <class T>
std::optional<T> get(const toml::table& t, const std::string& where, const std::string& key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;
    throw ConfigError("[" + where + "] " + key + " must be a number");
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (auto v = n->as_integer()) return v->get();
    throw ConfigError("[" + where + "] " + key + " must be an integer");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = n->as_boolean()) return v->get();
    throw ConfigError("[" + where + "] " + key + " must be a boolean");
  } else {
    if (auto v = n->as_string()) return v->get();
    throw ConfigError("[" + where + "] " + key + " must be a string");
  }
}

inline std::uint64_t nonneg(std::int64_t v, const std::string& what) {
  if (v < 0) throw ConfigError(what + " must be nonnegative, got " + std::to_string(v));
  return static_cast<std::uint64_t>(v);
}

template <class T>
std::vector<T> get_array(const toml::table& t, const std::string& where, const std::string& key) {
  std::vector<T> out;
  const toml::node* n = t.get(key);
  if (!n) return out;
  const toml::array* arr = n->as_array();
  if (!arr) throw ConfigError("[" + where + "] " + key + " must be an array");
  for (const auto& el : *arr) {
    if constexpr (std::is_same_v<T, double>) {
      auto v = el.value<double>();
      if (!v) throw ConfigError("[" + where + "] " + key + " must hold numbers");
      out.push_back(*v);
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      auto v = el.as_integer();
      if (!v) throw ConfigError("[" + where + "] " + key + " must hold integers");
      out.push_back(v->get());
    } else {
      auto v = el.as_string();
      if (!v) throw ConfigError("[" + where + "] " + key + " must hold strings");
      out.push_back(v->get());
    }
  }
  return out;
}

inline const toml::table* section(const toml::table& root, const std::string& name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->as_table()) throw ConfigError("'" + name + "' must be a table");
  return n->as_table();
}

}  // namespace detail

inline Config parse_config(const toml::table& root, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  Config c;
  c.base_dir = base_dir;
  check_keys(root, "root", {"target", "sampler", "run", "bench", "sweep"});

  if (const auto* t = section(root, "target")) {
    check_keys(*t, "target",
               {"kind", "data", "holdout", "w", "p0", "sigma2", "mu", "p", "slab_mean", "slab_var", "obs", "obs_var"});
    if (auto k = get<std::string>(*t, "target", "kind")) {
      auto kind = target_kind_from_string(*k);
      if (!kind) throw ConfigError("[target] kind must be logistic, robust or spike_slab, got '" + *k + "'");
      c.target.kind = *kind;
    }
    c.target.data = get<std::string>(*t, "target", "data").value_or("");
    c.target.holdout = get<std::string>(*t, "target", "holdout").value_or("");
    c.target.w = get<double>(*t, "target", "w");
    c.target.p0 = get<double>(*t, "target", "p0");
    c.target.sigma2 = get<double>(*t, "target", "sigma2").value_or(10.0);
    c.target.mu = get<double>(*t, "target", "mu").value_or(0.0);
    c.target.p = static_cast<Index>(nonneg(get<std::int64_t>(*t, "target", "p").value_or(0), "[target] p"));
    c.target.slab_mean = get<double>(*t, "target", "slab_mean").value_or(0.0);
    c.target.slab_var = get<double>(*t, "target", "slab_var").value_or(1.0);
    c.target.obs = get<double>(*t, "target", "obs");
    c.target.obs_var = get<double>(*t, "target", "obs_var");
  }
  if (const auto* s = section(root, "sampler")) {
    check_keys(*s, "sampler", {"kind", "p_jump", "lambda_refresh", "subsampling", "init", "cv_model"});
    c.sampler.kind = get<std::string>(*s, "sampler", "kind").value_or("zigzag");
    c.sampler.p_jump = get<double>(*s, "sampler", "p_jump").value_or(0.6);
    c.sampler.lambda_refresh = get<double>(*s, "sampler", "lambda_refresh").value_or(0.1);
    c.sampler.subsampling = get<std::string>(*s, "sampler", "subsampling").value_or("none");
    c.sampler.init = get<std::string>(*s, "sampler", "init").value_or("full");
    for (auto v : get_array<std::int64_t>(*s, "sampler", "cv_model"))
      c.sampler.cv_model.push_back(static_cast<Index>(nonneg(v, "[sampler] cv_model entries")));
  }
  if (const auto* r = section(root, "run")) {
    check_keys(*r, "run",
               {"T", "events", "iterations", "burn_in", "seed", "checkpoint_interval", "pred_stride", "out_dir",
                "write_path", "per_model"});
    c.run.T = get<double>(*r, "run", "T").value_or(0.0);
    c.run.events = nonneg(get<std::int64_t>(*r, "run", "events").value_or(0), "[run] events");
    c.run.iterations = nonneg(get<std::int64_t>(*r, "run", "iterations").value_or(0), "[run] iterations");
    c.run.burn_in = get<double>(*r, "run", "burn_in").value_or(0.1);
    c.run.seed = nonneg(get<std::int64_t>(*r, "run", "seed").value_or(1), "[run] seed");
    c.run.checkpoint_interval = get<double>(*r, "run", "checkpoint_interval").value_or(0.0);
    c.run.pred_stride = get<double>(*r, "run", "pred_stride").value_or(0.0);
    c.run.out_dir = get<std::string>(*r, "run", "out_dir").value_or("out");
    c.run.write_path = get<bool>(*r, "run", "write_path").value_or(true);
    c.run.per_model = get<bool>(*r, "run", "per_model").value_or(false);
  }
  if (const auto* b = section(root, "bench")) {
    check_keys(*b, "bench",
               {"scenario", "grid", "samplers", "replicates", "reference", "reference_iterations", "truth_iterations",
                "threads"});
    c.bench.scenario = static_cast<int>(get<std::int64_t>(*b, "bench", "scenario").value_or(1));
    if (const toml::node* g = b->get("grid")) {
      const toml::array* arr = g->as_array();
      if (!arr) throw ConfigError("[bench] grid must be an array of [n, p] pairs");
      for (const auto& cell : *arr) {
        const toml::array* pair = cell.as_array();
        if (!pair || pair->size() != 2 || !(*pair)[0].as_integer() || !(*pair)[1].as_integer())
          throw ConfigError("[bench] grid entries must be [n, p] integer pairs");
        const auto n = (*pair)[0].as_integer()->get(), p = (*pair)[1].as_integer()->get();
        if (n < 1 || p < 1) throw ConfigError("[bench] grid entries must be positive");
        c.bench.grid.push_back({static_cast<Index>(n), static_cast<Index>(p)});
      }
    }
    c.bench.samplers = get_array<std::string>(*b, "bench", "samplers");
    c.bench.replicates = nonneg(get<std::int64_t>(*b, "bench", "replicates").value_or(10), "[bench] replicates");
    c.bench.reference = get<std::string>(*b, "bench", "reference").value_or("");
    c.bench.reference_iterations =
        nonneg(get<std::int64_t>(*b, "bench", "reference_iterations").value_or(0), "[bench] reference_iterations");
    c.bench.truth_iterations =
        nonneg(get<std::int64_t>(*b, "bench", "truth_iterations").value_or(0), "[bench] truth_iterations");
    c.bench.threads = static_cast<unsigned>(nonneg(get<std::int64_t>(*b, "bench", "threads").value_or(1), "[bench] threads"));
  }
  if (const auto* s = section(root, "sweep")) {
    check_keys(*s, "sweep", {"families", "p_jump", "lambda_refresh", "replicates", "threads"});
    c.sweep.families = get_array<std::string>(*s, "sweep", "families");
    c.sweep.p_jump = get_array<double>(*s, "sweep", "p_jump");
    c.sweep.lambda_refresh = get_array<double>(*s, "sweep", "lambda_refresh");
    c.sweep.replicates = nonneg(get<std::int64_t>(*s, "sweep", "replicates").value_or(10), "[sweep] replicates");
    c.sweep.threads = static_cast<unsigned>(nonneg(get<std::int64_t>(*s, "sweep", "threads").value_or(1), "[sweep] threads"));
  }
  return c;
}

inline Config load_config(const std::string& path) {
  try {
    const toml::table root = toml::parse_file(path);
    return parse_config(root, std::filesystem::path(path).parent_path());
  } catch (const toml::parse_error& e) {
    throw ConfigError(path + ": " + std::string(e.description()));
  }
}

inline Config parse_config_string(std::string_view text) {
  try {
    return parse_config(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw ConfigError("config: " + std::string(e.description()));
  }
}

// ---------------------------------------------------------------------------
// Conversion into library specs

inline std::string resolve(const Config& c, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() || c.base_dir.empty() ? path : (c.base_dir / p).string();
}

inline SpikeSlabPrior make_prior(const TargetSection& t, Index p) {
  if (t.w && t.p0) throw ConfigError("[target] give either w or p0, not both");
  SpikeSlabPrior prior;
  prior.sigma2 = t.sigma2;
  prior.mu = t.mu;
  if (t.p0) {
    if (!(*t.p0 > 0.0)) throw ConfigError("[target] p0 must be positive");
    prior.w = *t.p0 / static_cast<double>(p);
  } else if (t.w) {
    prior.w = *t.w;
  }
  prior.validate();
  return prior;
}

inline TargetSpec make_target(const Config& c, bool need_data = true) {
  TargetSpec t;
  t.kind = c.target.kind;
  if (t.kind == TargetKind::SpikeSlab) {
    if (c.target.p < 1) throw ConfigError("[target] spike_slab needs p >= 1");
    t.p = c.target.p;
    t.coordinate.w = c.target.w.value_or(0.5);
    t.coordinate.mu = c.target.slab_mean;
    t.coordinate.sigma2 = c.target.slab_var;
    if (c.target.obs_var) {
      t.coordinate.obs = c.target.obs.value_or(0.0);
      t.coordinate.obs_var = *c.target.obs_var;
    } else if (c.target.obs) {
      throw ConfigError("[target] obs needs obs_var");
    }
    t.validate();
    return t;
  }
  if (!need_data) return t;
  if (c.target.data.empty()) throw ConfigError("[target] data path is required for regression targets");
  t.data = std::make_shared<const Dataset>(io::read_dataset_csv(resolve(c, c.target.data)));
  if (!c.target.holdout.empty())
    t.holdout = std::make_shared<const Dataset>(io::read_dataset_csv(resolve(c, c.target.holdout)));
  t.prior = make_prior(c.target, t.data->p());
  t.validate();
  return t;
}

/// Parses "zigzag", "bps_gauss", "bps_sphere", "gibbs", optionally suffixed
/// with "_global" or "_cv" for subsampled PDMP samplers.
inline SamplerSpec make_sampler(const std::string& name, const SamplerSection& s, Index p) {
  SamplerSpec out;
  std::string base = name;
  std::optional<SubsampleMode> mode;
  for (const char* suffix : {"_global", "_cv"}) {
    const std::string suf(suffix);
    if (base.size() > suf.size() && base.compare(base.size() - suf.size(), suf.size(), suf) == 0) {
      mode = subsample_mode_from_string(suf.substr(1));
      base.resize(base.size() - suf.size());
    }
  }
  const auto kind = sampler_kind_from_string(base);
  if (!kind) throw ConfigError("unknown sampler '" + name + "' (zigzag, bps_gauss, bps_sphere, gibbs)");
  out.kind = *kind;
  out.p_jump = s.p_jump;
  out.lambda_refresh = s.lambda_refresh;
  if (!mode && s.subsampling != "none") {
    mode = subsample_mode_from_string(s.subsampling);
    if (!mode) throw ConfigError("[sampler] subsampling must be none, global or cv, got '" + s.subsampling + "'");
  }
  out.subsample = mode;
  const auto init = init_kind_from_string(s.init);
  if (!init) throw ConfigError("[sampler] init must be full, empty or cv, got '" + s.init + "'");
  out.init = *init;
  if (!s.cv_model.empty()) {
    out.cv_model.assign(static_cast<std::size_t>(p), false);
    for (Index j : s.cv_model) {
      if (j >= p) throw ConfigError("[sampler] cv_model index " + std::to_string(j) + " out of range");
      out.cv_model[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

inline Budget make_budget(const RunSection& r) {
  Budget b;
  b.T = r.T;
  b.events = r.events;
  b.gibbs_iterations = r.iterations;
  b.burn_in = r.burn_in;
  return b;
}

inline BenchConfig make_bench(const Config& c) {
  BenchConfig b;
  b.target = c.target.kind;
  b.scenario = c.bench.scenario;
  if (b.scenario < 1 || b.scenario > 3) throw ConfigError("[bench] scenario must be 1, 2 or 3");
  b.grid = c.bench.grid;
  b.w = c.target.w;
  b.p0 = c.target.p0;
  b.sigma2 = c.target.sigma2;
  if (b.target == TargetKind::SpikeSlab) b.analytic = make_target(c);
  const Index p_for_masks = b.target == TargetKind::SpikeSlab ? b.analytic.p : (b.grid.empty() ? 0 : b.grid.front().p);
  if (c.bench.samplers.empty()) throw ConfigError("[bench] samplers must list at least one sampler");
  for (const auto& name : c.bench.samplers) b.samplers.push_back(make_sampler(name, c.sampler, p_for_masks));
  b.budget = make_budget(c.run);
  b.reference_budget = b.budget;
  if (c.bench.reference_iterations > 0) b.reference_budget.gibbs_iterations = c.bench.reference_iterations;
  b.truth_budget = b.budget;
  b.truth_budget.gibbs_iterations = c.bench.truth_iterations > 0 ? c.bench.truth_iterations : 10 * std::max<std::uint64_t>(b.budget.gibbs_iterations, b.budget.events);
  if (!c.bench.reference.empty()) b.reference_sampler = make_sampler(c.bench.reference, c.sampler, p_for_masks);
  b.replicates = c.bench.replicates;
  b.seed = c.run.seed;
  b.threads = std::max(1u, c.bench.threads);
  return b;
}

inline SweepConfig make_sweep(const Config& c) {
  SweepConfig s;
  s.target = make_target(c);
  for (const auto& f : c.sweep.families) {
    const auto k = sampler_kind_from_string(f);
    if (!k) throw ConfigError("[sweep] unknown family '" + f + "'");
    s.families.push_back(*k);
  }
  s.p_jump = c.sweep.p_jump;
  s.lambda_refresh = c.sweep.lambda_refresh.empty() ? std::vector<double>{c.sampler.lambda_refresh} : c.sweep.lambda_refresh;
  s.budget = make_budget(c.run);
  s.replicates = c.sweep.replicates;
  s.seed = c.run.seed;
  s.threads = std::max(1u, c.sweep.threads);
  return s;
}

}  // namespace rjpdmp::cli
