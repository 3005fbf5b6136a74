// rjpdmp: data generation, sampling, benchmarking and summaries from the command line.
//
// Exit status: 0 success, 1 usage/configuration/IO error, 2 numerical failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli_config.hpp"
#include "rjpdmp/bench.hpp"
#include "rjpdmp/estimators.hpp"
#include "rjpdmp/generate.hpp"
#include "rjpdmp/io.hpp"
#include "rjpdmp/runner.hpp"

namespace fs = std::filesystem;
using namespace rjpdmp;
using io::json;

namespace {

constexpr const char* kSummarySchema = "rjpdmp-run-summary-v1";
constexpr const char* kBenchSchema = "rjpdmp-bench-report-v1";

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create directory '" + dir + "': " + ec.message());
}

json summary_json(const SummarySet& s) {
  json j;
  j["ppi"] = io::to_json(s.ppi);
  j["mean"] = io::to_json(s.mean);
  if (s.pred_mse) j["pred_mse"] = *s.pred_mse;
  if (!s.cond_mean.empty()) {
    json cm = json::object();
    for (const auto& [k, v] : s.cond_mean) cm[k] = io::to_json(v);
    j["cond_mean"] = cm;
  }
  return j;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string recipe;
  long n = 0;
  long p = 0;
  std::uint64_t seed = 1;
  std::string out;
  long holdout = 0;
};

int cmd_generate(const GenerateArgs& a) {
  const bool scenario = a.recipe == "scenario1" || a.recipe == "scenario2" || a.recipe == "scenario3";
  if (a.holdout > 0 && scenario) throw ConfigError("holdout rows are available for robust recipes only");
  Rng rng(a.seed);
  GeneratedData g;
  if (scenario) {
    g = generate_scenario(a.recipe.back() - '0', a.n, a.p, rng);
  } else if (a.recipe == "robust") {
    g = generate_robust(a.n, a.p, rng, a.holdout);
  } else if (a.recipe == "robust_small") {
    if (a.p != 4) throw ConfigError("robust_small has p = 4");
    g = generate_robust_small(a.n, rng, a.holdout);
  } else {
    throw ConfigError("unknown recipe '" + a.recipe + "' (scenario1, scenario2, scenario3, robust, robust_small)");
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path().string());
  io::write_dataset_csv(a.out, g.data);
  json meta;
  meta["recipe"] = a.recipe;
  meta["seed"] = a.seed;
  meta["n"] = a.n;
  meta["p"] = a.p;
  meta["theta_true"] = io::to_json(g.theta_true);
  if (a.holdout > 0) {
    fs::path hold = out;
    hold.replace_filename(out.stem().string() + "_holdout" + out.extension().string());
    io::write_dataset_csv(hold.string(), g.holdout);
    meta["holdout"] = hold.filename().string();
    meta["n_holdout"] = a.holdout;
  }
  fs::path meta_path = out;
  meta_path.replace_extension(".json");
  io::write_json(meta_path.string(), meta);
  return 0;
}

// ---------------------------------------------------------------------------
// run / bench / sweep share the config overrides

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> T;
  std::optional<std::uint64_t> events;
  std::optional<std::uint64_t> iterations;
  std::optional<double> burn_in;
  std::optional<std::string> sampler;
  std::optional<std::string> out_dir;
  std::optional<std::string> data;
  std::optional<double> p_jump;
  std::optional<double> lambda_refresh;
  std::optional<std::string> subsampling;
  std::optional<std::string> init;
  std::optional<unsigned> threads;
  std::optional<std::size_t> replicates;
  bool omit_timing = false;
};

void apply(cli::Config& c, const Overrides& o) {
  if (o.seed) c.run.seed = *o.seed;
  if (o.T) c.run.T = *o.T;
  if (o.events) c.run.events = *o.events;
  if (o.iterations) c.run.iterations = *o.iterations;
  if (o.burn_in) c.run.burn_in = *o.burn_in;
  if (o.sampler) c.sampler.kind = *o.sampler;
  if (o.out_dir) c.run.out_dir = *o.out_dir;
  if (o.data) c.target.data = fs::absolute(*o.data).string();
  if (o.p_jump) c.sampler.p_jump = *o.p_jump;
  if (o.lambda_refresh) c.sampler.lambda_refresh = *o.lambda_refresh;
  if (o.subsampling) c.sampler.subsampling = *o.subsampling;
  if (o.init) c.sampler.init = *o.init;
  if (o.threads) c.bench.threads = c.sweep.threads = *o.threads;
  if (o.replicates) c.bench.replicates = c.sweep.replicates = *o.replicates;
}

cli::Config configure(const std::string& path, const Overrides& o) {
  cli::Config c = cli::load_config(path);
  apply(c, o);
  return c;
}

int cmd_run(const std::string& config_path, const Overrides& o) {
  const cli::Config c = configure(config_path, o);
  const TargetSpec target = cli::make_target(c);
  const SamplerSpec sampler = cli::make_sampler(c.sampler.kind, c.sampler, target.dim());
  const Budget budget = cli::make_budget(c.run);
  ChainOptions opt;
  opt.keep_path = c.run.write_path;
  opt.per_model = c.run.per_model;
  opt.pred_stride = c.run.pred_stride;
  opt.checkpoint_interval = c.run.checkpoint_interval;
  const ChainOutput out = run_chain(target, sampler, budget, c.run.seed, opt);

  ensure_dir(c.run.out_dir);
  const fs::path dir(c.run.out_dir);
  json j;
  j["schema"] = kSummarySchema;
  j["sampler"] = sampler.label();
  j["target"] = std::string(to_string(target.kind));
  j["p"] = target.dim();
  j["seed"] = c.run.seed;
  j["budget"] = {{"T", budget.T},
                 {"events", budget.events},
                 {"iterations", budget.gibbs_iterations},
                 {"burn_in", budget.burn_in}};
  j["iterations"] = out.iterations;
  if (sampler.kind != SamplerKind::Gibbs) {
    if (out.skeleton) j["t_final"] = out.skeleton->t_final;
    j["n_events"] = out.stats.n_events;
    j["n_thinning_rejects"] = out.stats.n_thinning_rejects;
    j["n_grad_component_evals"] = out.stats.n_grad_component_evals;
    j["n_births"] = out.stats.n_births;
    j["n_deaths"] = out.stats.n_deaths;
    j["n_zero_crossings"] = out.stats.n_zero_crossings;
    if (sampler.subsample) j["cv_fallbacks"] = out.cv_fallbacks;
  }
  j["summary"] = out.summary ? summary_json(*out.summary) : json(nullptr);
  if (!o.omit_timing) j["timing"] = {{"wall_time_s", out.wall_time}};

  if (c.run.write_path) {
    if (out.skeleton) {
      io::write_skeleton_csv((dir / "skeleton.csv").string(), *out.skeleton);
      j["path_file"] = "skeleton.csv";
    } else {
      auto f = io::open_out((dir / "chain.csv").string());
      io::write_chain_header(f, target.dim());
      for (std::size_t it = 0; it < out.chain.size(); ++it)
        io::write_chain_row(f, it, out.chain[it].gamma, out.chain[it].theta);
      if (!f) throw io::IoError("write failed: chain.csv");
      j["path_file"] = "chain.csv";
    }
  }
  io::write_json((dir / "summary.json").string(), j);
  return 0;
}

json quantity_json(const QuantityReport& q, bool timing) {
  json j;
  j["sigma2"] = q.sigma2;
  j["ref_sigma2"] = q.ref_sigma2;
  j["iterations"] = q.iterations;
  j["ref_iterations"] = q.ref_iterations;
  j["rse"] = q.infinite ? json("inf") : json(q.rse);
  j["infinite"] = q.infinite;
  if (timing) {
    j["wall_time_s"] = q.wall_time;
    j["ref_wall_time_s"] = q.ref_wall_time;
    j["re"] = q.infinite ? json("inf") : json(q.re);
  }
  return j;
}

int cmd_bench(const std::string& config_path, const Overrides& o) {
  const cli::Config c = configure(config_path, o);
  const BenchConfig cfg = cli::make_bench(c);
  const auto cells = run_bench(cfg);
  ensure_dir(c.run.out_dir);
  const fs::path dir(c.run.out_dir);
  const bool timing = !o.omit_timing;

  json report;
  report["schema"] = kBenchSchema;
  report["seed"] = cfg.seed;
  report["replicates"] = cfg.replicates;
  json jcells = json::array();
  auto reps = io::open_out((dir / "replicates.csv").string());
  reps << "n,p,sampler,replicate,quantity,coord,value\n";
  auto table = io::open_out((dir / "table.csv").string());
  table << "n,p";
  for (const auto& s : cfg.samplers) {
    const std::string l = s.label();
    table << ',' << l << "_PI_RSE," << l << "_Mean_RSE";
    if (timing) table << ',' << l << "_PI_RE," << l << "_Mean_RE";
  }
  table << '\n';
  for (const auto& cell : cells) {
    json jc;
    jc["n"] = cell.cell.n;
    jc["p"] = cell.cell.p;
    jc["reference"] = cell.reference;
    jc["truth_ppi"] = io::to_json(cell.truth_ppi);
    jc["truth_mean"] = io::to_json(cell.truth_mean);
    json js = json::array();
    table << cell.cell.n << ',' << cell.cell.p;
    for (const auto& s : cell.samplers) {
      js.push_back({{"sampler", s.sampler}, {"ppi", quantity_json(s.ppi, timing)}, {"mean", quantity_json(s.mean, timing)}});
      table << ',' << io::fmt(s.ppi.rse) << ',' << io::fmt(s.mean.rse);
      if (timing) table << ',' << io::fmt(s.ppi.re) << ',' << io::fmt(s.mean.re);
      for (std::size_t r = 0; r < s.ppi_estimates.size(); ++r) {
        const std::pair<const char*, const Vector*> qs[] = {{"ppi", &s.ppi_estimates[r]}, {"mean", &s.mean_estimates[r]}};
        for (const auto& [name, v] : qs)
          for (Index j = 0; j < v->size(); ++j)
            reps << cell.cell.n << ',' << cell.cell.p << ',' << s.sampler << ',' << r << ',' << name << ',' << j << ','
                 << io::fmt((*v)[j]) << '\n';
      }
    }
    table << '\n';
    jc["samplers"] = js;
    jcells.push_back(jc);
  }
  report["cells"] = jcells;
  io::write_json((dir / "report.json").string(), report);
  if (!reps || !table) throw io::IoError("write failed in " + c.run.out_dir);
  return 0;
}

int cmd_sweep(const std::string& config_path, const Overrides& o) {
  const cli::Config c = configure(config_path, o);
  const SweepConfig cfg = cli::make_sweep(c);
  const auto cells = run_sweep(cfg);
  ensure_dir(c.run.out_dir);
  auto f = io::open_out((fs::path(c.run.out_dir) / "sweep.csv").string());
  f << "family,p_jump,lambda_refresh,mse_ppi,mse_mean,var_ppi,var_mean\n";
  for (const auto& s : cells)
    f << to_string(s.family) << ',' << io::fmt(s.p_jump) << ',' << io::fmt(s.lambda_refresh) << ','
      << io::fmt(s.mse_ppi) << ',' << io::fmt(s.mse_mean) << ',' << io::fmt(s.var_ppi) << ',' << io::fmt(s.var_mean)
      << '\n';
  if (!f) throw io::IoError("write failed: sweep.csv");
  return 0;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeArgs {
  std::string skeleton;
  std::string chain;
  double burn_in = 0.1;
  std::string holdout;
  double stride = 0.0;
  std::string mask;
  std::string out;
};

Mask parse_mask(const std::string& s, Index p) {
  if (static_cast<Index>(s.size()) != p) throw ConfigError("--mask needs one 0/1 character per coordinate");
  Mask m(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw ConfigError("--mask may contain only 0 and 1");
    m[i] = s[i] == '1';
  }
  return m;
}

json summarize_chain(const SummarizeArgs& a) {
  auto f = io::open_in(a.chain);
  std::string line;
  if (!std::getline(f, line)) throw io::IoError(a.chain + ": empty file");
  const auto header = io::split(line);
  if (header.size() < 3 || (header.size() - 1) % 2 != 0) throw io::IoError(a.chain + ": malformed chain header");
  const Index p = static_cast<Index>((header.size() - 1) / 2);
  std::vector<GibbsSample> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto c = io::split(line);
    if (c.size() != header.size()) throw io::IoError(a.chain + ": wrong field count");
    GibbsSample s{Mask(static_cast<std::size_t>(p)), Vector(p)};
    for (Index j = 0; j < p; ++j) {
      s.gamma[j] = io::parse_double(c[1 + j], a.chain) != 0.0;
      s.theta[j] = io::parse_double(c[1 + p + j], a.chain);
    }
    rows.push_back(std::move(s));
  }
  const auto burn = static_cast<std::size_t>(a.burn_in * static_cast<double>(rows.size()));
  if (rows.size() <= burn) throw ConfigError("chain has no samples after burn-in");
  Vector ppi = Vector::Zero(p), mean = Vector::Zero(p);
  Matrix draws(static_cast<Index>(rows.size() - burn), p);
  for (std::size_t r = burn; r < rows.size(); ++r) {
    for (Index j = 0; j < p; ++j) ppi[j] += rows[r].gamma[j] ? 1.0 : 0.0;
    mean += rows[r].theta;
    draws.row(static_cast<Index>(r - burn)) = rows[r].theta.transpose();
  }
  const double cnt = static_cast<double>(rows.size() - burn);
  json j;
  j["n_samples"] = rows.size() - burn;
  j["ppi"] = io::to_json(ppi / cnt);
  j["mean"] = io::to_json(mean / cnt);
  if (!a.mask.empty()) {
    const Mask target = parse_mask(a.mask, p);
    Vector cm = Vector::Zero(p);
    std::size_t hits = 0;
    for (std::size_t r = burn; r < rows.size(); ++r)
      if (rows[r].gamma == target) {
        cm += rows[r].theta;
        ++hits;
      }
    j["cond_mean"] = hits ? io::to_json(cm / static_cast<double>(hits)) : json(nullptr);
  }
  if (!a.holdout.empty()) j["pred_mse"] = predictive_mse(draws, io::read_dataset_csv(a.holdout));
  return j;
}

json summarize_skeleton(const SummarizeArgs& a) {
  const Skeleton sk = io::read_skeleton_csv(a.skeleton);
  json j;
  j["t_final"] = sk.t_final;
  j["n_records"] = sk.events.size();
  j["ppi"] = io::to_json(path_ppi(sk, a.burn_in));
  j["mean"] = io::to_json(path_integral_mean(sk, a.burn_in));
  if (!a.mask.empty()) {
    const auto cm = conditional_mean(sk, parse_mask(a.mask, sk.dim()), a.burn_in);
    j["cond_mean"] = cm ? io::to_json(*cm) : json(nullptr);
  }
  if (!a.holdout.empty()) {
    if (!(a.stride > 0.0)) throw ConfigError("--holdout needs a positive --stride for skeletons");
    j["pred_mse"] = predictive_mse(sk, io::read_dataset_csv(a.holdout), a.stride, a.burn_in);
  }
  return j;
}

int cmd_summarize(const SummarizeArgs& a) {
  if (a.skeleton.empty() == a.chain.empty()) throw ConfigError("give exactly one of --skeleton or --chain");
  if (!(a.burn_in >= 0.0 && a.burn_in < 1.0)) throw ConfigError("--burn-in must lie in [0, 1)");
  const json j = a.chain.empty() ? summarize_skeleton(a) : summarize_chain(a);
  if (a.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_json(a.out, j);
  }
  return 0;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "generator seed");
  cmd->add_option("--T", o.T, "process time horizon");
  cmd->add_option("--events", o.events, "accepted-event budget (takes precedence over T when positive)");
  cmd->add_option("--iterations", o.iterations, "Gibbs sweeps");
  cmd->add_option("--burn-in", o.burn_in, "burn-in fraction of the budget");
  cmd->add_option("--sampler", o.sampler, "zigzag, bps_gauss, bps_sphere or gibbs");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--data", o.data, "dataset CSV");
  cmd->add_option("--p-jump", o.p_jump, "probability of a death move at a zero crossing");
  cmd->add_option("--lambda-refresh", o.lambda_refresh, "BPS refresh rate");
  cmd->add_option("--subsampling", o.subsampling, "none, global or cv");
  cmd->add_option("--init", o.init, "full, empty or cv");
  cmd->add_option("--threads", o.threads, "worker threads for replicates");
  cmd->add_option("--replicates", o.replicates, "replicates per sampler");
  cmd->add_flag("--omit-timing", o.omit_timing, "leave wall-clock fields out of the outputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reversible-jump PDMP samplers for Bayesian variable selection"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic dataset and its metadata");
  g->add_option("--recipe", gen.recipe, "scenario1, scenario2, scenario3, robust or robust_small")->required();
  g->add_option("--n", gen.n, "observations")->required()->check(CLI::PositiveNumber);
  g->add_option("--p", gen.p, "covariates")->required()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--out", gen.out, "dataset CSV path")->required();
  g->add_option("--holdout", gen.holdout, "extra holdout rows (robust recipes)")->check(CLI::NonNegativeNumber);

  std::string config;
  Overrides run_o, bench_o, sweep_o;
  auto* r = app.add_subcommand("run", "run one chain");
  r->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  add_overrides(r, run_o);
  auto* b = app.add_subcommand("bench", "replicated efficiency benchmark");
  b->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  add_overrides(b, bench_o);
  auto* s = app.add_subcommand("sweep", "tuning grid on the analytic spike-and-slab target");
  s->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  add_overrides(s, sweep_o);

  SummarizeArgs sum;
  auto* m = app.add_subcommand("summarize", "posterior summaries from a skeleton or chain file");
  m->add_option("--skeleton", sum.skeleton, "skeleton CSV");
  m->add_option("--chain", sum.chain, "Gibbs chain CSV");
  m->add_option("--burn-in", sum.burn_in, "burn-in fraction");
  m->add_option("--holdout", sum.holdout, "holdout dataset CSV for predictive MSE");
  m->add_option("--stride", sum.stride, "time stride for discretizing skeletons");
  m->add_option("--mask", sum.mask, "model mask such as 0110 for a conditional mean");
  m->add_option("--out", sum.out, "write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*r) return cmd_run(config, run_o);
    if (*b) return cmd_bench(config, bench_o);
    if (*s) return cmd_sweep(config, sweep_o);
    if (*m) return cmd_summarize(sum);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
