#include <gtest/gtest.h>

#include "cli_config.hpp"

using namespace rjpdmp;
using namespace rjpdmp::cli;

TEST(Config, ParsesAllSections) {
  const Config c = parse_config_string(R"(
[target]
kind = "robust"
data = "d.csv"
p0 = 2.0
sigma2 = 4

[sampler]
kind = "bps_sphere"
p_jump = 0.3
lambda_refresh = 0.5
subsampling = "cv"
cv_model = [0, 2]

[run]
T = 100.0
seed = 9
burn_in = 0.2
per_model = true

[bench]
grid = [[100, 5], [200, 10]]
samplers = ["gibbs", "zigzag"]
replicates = 3
)");
  EXPECT_EQ(c.target.kind, TargetKind::Robust);
  EXPECT_EQ(c.target.p0.value(), 2.0);
  EXPECT_FALSE(c.target.w.has_value());
  EXPECT_EQ(c.target.sigma2, 4.0);
  EXPECT_EQ(c.sampler.kind, "bps_sphere");
  EXPECT_EQ(c.sampler.cv_model, (std::vector<Index>{0, 2}));
  EXPECT_EQ(c.run.T, 100.0);
  EXPECT_EQ(c.run.seed, 9u);
  EXPECT_TRUE(c.run.per_model);
  ASSERT_EQ(c.bench.grid.size(), 2u);
  EXPECT_EQ(c.bench.grid[1].p, 10);
  EXPECT_EQ(c.bench.replicates, 3u);
}

TEST(Config, DefaultsWhenSectionsMissing) {
  const Config c = parse_config_string("");
  EXPECT_EQ(c.target.kind, TargetKind::Logistic);
  EXPECT_EQ(c.sampler.kind, "zigzag");
  EXPECT_EQ(c.sampler.p_jump, 0.6);
  EXPECT_EQ(c.run.burn_in, 0.1);
  EXPECT_EQ(c.run.checkpoint_interval, 0.0);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config_string("[target]\nkindd = \"logistic\"\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[samplers]\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[run]\nTT = 1.0\n"), ConfigError);
}

TEST(Config, WrongTypesRejected) {
  EXPECT_THROW(parse_config_string("[run]\nT = \"long\"\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[run]\nevents = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[run]\nseed = -1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[bench]\ngrid = [[1, 2, 3]]\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[target]\nkind = \"probit\"\n"), ConfigError);
  EXPECT_THROW(parse_config_string("target = 3\n"), ConfigError);
  EXPECT_THROW(parse_config_string("[run\n"), ConfigError);
}

TEST(Config, IntegersAcceptedForFloats) {
  const Config c = parse_config_string("[run]\nT = 50\n");
  EXPECT_EQ(c.run.T, 50.0);
}

TEST(Config, WeightAndExpectedSizeAreExclusive) {
  const Config c = parse_config_string("[target]\nw = 0.2\np0 = 3\n");
  EXPECT_THROW(make_prior(c.target, 10), ConfigError);
  const Config d = parse_config_string("[target]\np0 = 3\n");
  EXPECT_DOUBLE_EQ(make_prior(d.target, 10).w, 0.3);
  const Config e = parse_config_string("[target]\nw = 1.0\n");
  EXPECT_THROW(make_prior(e.target, 10), ConfigError);
}

TEST(Config, SamplerNamesAndSuffixes) {
  SamplerSection s;
  EXPECT_EQ(make_sampler("zigzag", s, 3).kind, SamplerKind::ZigZag);
  EXPECT_FALSE(make_sampler("zigzag", s, 3).subsample.has_value());
  const auto cv = make_sampler("zigzag_cv", s, 3);
  EXPECT_EQ(cv.kind, SamplerKind::ZigZag);
  EXPECT_EQ(cv.subsample, SubsampleMode::ControlVariate);
  const auto g = make_sampler("bps_gauss_global", s, 3);
  EXPECT_EQ(g.kind, SamplerKind::BpsGauss);
  EXPECT_EQ(g.subsample, SubsampleMode::Global);
  EXPECT_EQ(make_sampler("gibbs", s, 3).kind, SamplerKind::Gibbs);
  EXPECT_THROW(make_sampler("hmc", s, 3), ConfigError);
  EXPECT_EQ(make_sampler("bps_sphere", s, 3).label(), "bps_sphere");
  EXPECT_EQ(cv.label(), "zigzag_cv");
}

TEST(Config, SamplerSectionOptions) {
  SamplerSection s;
  s.subsampling = "global";
  EXPECT_EQ(make_sampler("zigzag", s, 3).subsample, SubsampleMode::Global);
  s.subsampling = "sometimes";
  EXPECT_THROW(make_sampler("zigzag", s, 3), ConfigError);
  s.subsampling = "none";
  s.init = "middle";
  EXPECT_THROW(make_sampler("zigzag", s, 3), ConfigError);
  s.init = "empty";
  s.cv_model = {1};
  const auto spec = make_sampler("zigzag", s, 3);
  EXPECT_EQ(spec.init, InitKind::Empty);
  EXPECT_EQ(spec.cv_model, (Mask{false, true, false}));
  s.cv_model = {3};
  EXPECT_THROW(make_sampler("zigzag", s, 3), ConfigError);
}

TEST(Config, SpikeSlabTargetNeedsNoData) {
  const Config c = parse_config_string("[target]\nkind = \"spike_slab\"\np = 4\nw = 0.3\nslab_var = 2\n");
  const TargetSpec t = make_target(c);
  EXPECT_EQ(t.dim(), 4);
  EXPECT_EQ(t.coordinate.w, 0.3);
  EXPECT_EQ(t.coordinate.sigma2, 2.0);
  EXPECT_THROW(make_target(parse_config_string("[target]\nkind = \"spike_slab\"\n")), ConfigError);
  EXPECT_THROW(make_target(parse_config_string("[target]\nkind = \"logistic\"\n")), ConfigError);
}

TEST(Config, BenchValidation) {
  EXPECT_THROW(make_bench(parse_config_string("[bench]\nscenario = 4\nsamplers = [\"zigzag\"]\n")), ConfigError);
  EXPECT_THROW(make_bench(parse_config_string("[bench]\ngrid = [[10, 2]]\n")), ConfigError);
  const BenchConfig b = make_bench(parse_config_string(
      "[target]\np0 = 1\n[run]\nevents = 100\n[bench]\ngrid = [[10, 2]]\nsamplers = [\"zigzag\", \"bps_gauss_cv\"]\n"));
  EXPECT_EQ(b.samplers.size(), 2u);
  EXPECT_EQ(b.truth_budget.gibbs_iterations, 1000u);
  EXPECT_EQ(b.p0.value(), 1.0);
}

TEST(Config, SweepValidation) {
  const Config c = parse_config_string(
      "[target]\nkind = \"spike_slab\"\np = 2\n[sweep]\nfamilies = [\"zigzag\", \"gibbs\"]\np_jump = [0.5]\n");
  EXPECT_THROW(make_sweep(c).validate(), ConfigError);
  EXPECT_THROW(make_sweep(parse_config_string("[target]\nkind = \"spike_slab\"\np = 2\n[sweep]\nfamilies = [\"x\"]\n")),
               ConfigError);
}
