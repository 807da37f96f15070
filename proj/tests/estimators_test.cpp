#include <gtest/gtest.h>

#include <cmath>

#include "protavail/estimators.hpp"

namespace protavail {
namespace {

FailureModeSpec mode(std::string id, double rate, DistributionSpec repair = DistributionSpec::zero(),
                     bool latent = false) {
  FailureModeSpec m;
  m.id = std::move(id);
  m.latent = latent;
  m.occurrence = DistributionSpec::exponential(rate);
  m.repair = repair;
  return m;
}

ScenarioConfig two_mode(double known_rate, double latent_rate, std::uint64_t seed = 2002) {
  auto c = *find_builtin("two-mode-latent");
  c.modes[0].occurrence = DistributionSpec::exponential(known_rate);
  c.modes[1].occurrence = DistributionSpec::exponential(latent_rate);
  c.base_seed = seed;
  return c;
}

ScenarioConfig quiet() {
  ScenarioConfig c;
  c.name = "quiet";
  c.horizon = 5;
  c.modes = {mode("a", 0.0), mode("b", 0.0, DistributionSpec::zero(), true)};
  c.replications = 1000;
  return c;
}

void expect_within(const EstimateWithCI& e, double target, double sigmas = 3.0) {
  EXPECT_LE(std::abs(e.point - target), sigmas * e.std_error)
      << "point " << e.point << " target " << target << " stderr " << e.std_error;
}

void expect_identical(const EstimateWithCI& a, const EstimateWithCI& b) {
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.n, b.n);
}

TEST(EstimateMean, SampleStandardDeviation) {
  const std::vector<double> x{1, 0, 1, 0};
  const auto e = estimate_mean(x);
  EXPECT_EQ(e.point, 0.5);
  EXPECT_NEAR(e.std_error, std::sqrt(1.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(e.n, 4u);
}

TEST(TrueUnavailability, ZeroRate) {
  const auto e = true_unavailability(quiet(), 3.0, 500);
  EXPECT_EQ(e.point, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.n, 500u);
}

TEST(TrueUnavailability, TwoIndependentModes) {
  const auto e = true_unavailability(*find_builtin("two-mode-latent"), 1.0, 100000);
  expect_within(e, 1.0 - std::exp(-0.15));
}

TEST(TrueUnavailability, MarkovSteadyState) {
  const auto e = true_unavailability(*find_builtin("markov-single"), 100.0, 20000);
  expect_within(e, 0.1);
}

TEST(TrueUnavailability, Preconditions) {
  const auto c = *find_builtin("two-mode-latent");
  EXPECT_THROW(true_unavailability(c, 1.5, 100), OutOfHorizon);
  EXPECT_THROW(true_unavailability(c, 0.5, 1), std::invalid_argument);
}

TEST(BelievedUnavailability, NoLatentModesMatchesTruthExactly) {
  const auto c = *find_builtin("common-cause");
  expect_identical(believed_unavailability(c, 40.0, 3000), true_unavailability(c, 40.0, 3000));
}

TEST(BelievedUnavailability, TwoModeLatentAtDeployment) {
  const auto e = believed_unavailability(*find_builtin("two-mode-latent"), 1.0, 100000);
  expect_within(e, 1.0 - std::exp(-0.1));
}

TEST(BelievedUnavailability, ConvergesWhenLatentModeIsAlwaysFound) {
  const auto c = two_mode(0.1, 1000.0);
  const auto truth = true_unavailability(c, 1.0, 20000);
  const auto believed = believed_unavailability(c, 1.0, 20000, 0.5);
  expect_identical(believed, truth);
}

TEST(OptimismGap, TwoModeLatentClosedForm) {
  const auto r = optimism_gap(*find_builtin("two-mode-latent"), 1.0, 100000);
  expect_within(r.true_estimate, 1.0 - std::exp(-0.15));
  expect_within(r.believed_estimate, 1.0 - std::exp(-0.1));
  expect_within(r.gap, std::exp(-0.1) * (1.0 - std::exp(-0.05)));
  EXPECT_EQ(r.pathwise_violations, 0u);
  EXPECT_DOUBLE_EQ(r.gap.point, r.true_estimate.point - r.believed_estimate.point);
}

TEST(OptimismGap, NoLatentModesGiveZeroGap) {
  const auto r = optimism_gap(*find_builtin("markov-single"), 50.0, 2000);
  EXPECT_EQ(r.gap.point, 0.0);
  EXPECT_EQ(r.gap.std_error, 0.0);
  EXPECT_EQ(r.pathwise_violations, 0u);
}

TEST(OptimismGap, NoPathwiseViolationsOnBundledScenarios) {
  for (const auto& [name, c] : builtin_scenarios()) {
    const double t = std::min(c.horizon, 20.0);
    for (double s : {0.0, t / 2}) {
      const auto r = optimism_gap(c, t, 2000, s);
      EXPECT_EQ(r.pathwise_violations, 0u) << name;
      EXPECT_GE(r.gap.point, 0.0) << name;
    }
  }
}

// Conditioning at s: the latent mode is missing from the believed model only
// when it manifests in (s, t] while the known mode is still up at t.
TEST(OptimismGap, VanishesAsDiscoveryBecomesCertain) {
  const double s = 0.5, t = 1.0;
  double previous = 1.0;
  for (double rate : {5.0, 20.0, 80.0}) {
    const auto r = optimism_gap(two_mode(0.1, rate), t, 50000, s);
    const double analytic = std::exp(-0.1 * t) * (std::exp(-rate * s) - std::exp(-rate * t));
    EXPECT_LE(std::abs(r.gap.point - analytic), 3.0 * r.gap.std_error + 1e-12) << rate;
    EXPECT_LE(r.gap.point, previous);
    EXPECT_EQ(r.pathwise_violations, 0u);
    previous = r.gap.point;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(DemandUnavailability, DamagingDemandsAlwaysFail) {
  const auto c = *find_builtin("common-cause");
  for (auto v : {DemandVariant::first_demand, DemandVariant::all_demands}) {
    const auto d = demand_unavailability(c, 2000, v);
    EXPECT_EQ(d.estimate.point, 1.0);
    EXPECT_EQ(d.replications_without_demand, 0u);
  }
}

TEST(DemandUnavailability, PoissonDemandsSeeSteadyState) {
  auto c = *find_builtin("markov-single");
  c.horizon = 200;
  const auto d = demand_unavailability(c, 500, DemandVariant::all_demands);
  expect_within(d.estimate, 0.1);
  EXPECT_GT(d.demand_records, 5000u);
}

TEST(DemandUnavailability, CoupledToLatentDemandAlwaysFails) {
  auto c = *find_builtin("two-mode-latent");
  c.events.push_back(InitiatingEventSpec::coupled("latent-demand", "latent"));
  const auto d = demand_unavailability(c, 100000, DemandVariant::first_demand);
  EXPECT_EQ(d.estimate.point, 1.0);
  EXPECT_GT(d.replications_without_demand, 0u);
  EXPECT_EQ(d.estimate.n + d.replications_without_demand, 100000u);
  for (double t : {0.25, 0.5, 1.0}) EXPECT_LT(true_unavailability(c, t, 20000).point, 0.14);
}

TEST(DemandUnavailability, NoEvents) {
  EXPECT_THROW(demand_unavailability(*find_builtin("two-mode-latent"), 100, DemandVariant::first_demand),
               NoDemands);
}

TEST(BelievedDemandUnavailability, CoupledOnlyScenario) {
  auto c = *find_builtin("two-mode-latent");
  c.events.push_back(InitiatingEventSpec::coupled("latent-demand", "latent"));
  try {
    believed_demand_unavailability(c, 100, DemandVariant::first_demand);
    FAIL() << "expected NoDemands";
  } catch (const NoDemands& e) {
    EXPECT_EQ(e.excluded_events(), std::vector<std::string>{"latent-demand"});
  }
}

TEST(BelievedDemandUnavailability, ExcludesCoupledEvents) {
  const auto c = *find_builtin("latent-demand");
  const auto d = believed_demand_unavailability(c, 5000, DemandVariant::all_demands);
  EXPECT_EQ(d.excluded_events, std::vector<std::string>{"hidden-demand"});
  const auto full = demand_unavailability(c, 5000, DemandVariant::all_demands);
  EXPECT_LT(d.estimate.point, full.estimate.point);
}

TEST(BelievedDemandUnavailability, NoLatentModesMatchesTruthExactly) {
  const auto c = *find_builtin("common-cause");
  for (auto v : {DemandVariant::first_demand, DemandVariant::all_demands}) {
    const auto a = believed_demand_unavailability(c, 1000, v);
    const auto b = demand_unavailability(c, 1000, v);
    expect_identical(a.estimate, b.estimate);
    EXPECT_EQ(a.demand_records, b.demand_records);
    EXPECT_TRUE(a.excluded_events.empty());
  }
}

TEST(LongRun, MarkovSingle) {
  const auto c = *find_builtin("markov-single");
  const auto s = long_run(c, {10.0, 100.0, 1000.0, 10000.0}, 100);
  ASSERT_TRUE(s.target.has_value());
  EXPECT_NEAR(*s.target, 0.9, 1e-15);
  EXPECT_NEAR(s.values.back(), 0.9, 0.005);
  EXPECT_LT(std::abs(s.values.back() - 0.9), std::abs(s.values.front() - 0.9) + 1e-3);
}

TEST(LongRun, TargetOnlyForBirthDeathModels) {
  EXPECT_FALSE(analytic_long_run_availability(*find_builtin("common-cause")).has_value());
  EXPECT_FALSE(analytic_long_run_availability(*find_builtin("stp-control-rods")).has_value());
  EXPECT_EQ(*analytic_long_run_availability(quiet()), 1.0);
  EXPECT_THROW(long_run(quiet(), {2.0, 1.0}, 10), std::invalid_argument);
  EXPECT_THROW(long_run(quiet(), {9.0}, 10), OutOfHorizon);
}

TEST(LongRun, AlwaysAvailable) {
  const auto s = long_run(quiet(), {0.0, 1.0, 5.0}, 10);
  EXPECT_EQ(s.values, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(DiscoveryFraction, AlmostSurely) {
  auto c = two_mode(0.1, 0.05);
  c.horizon = 200;
  EXPECT_GE(discovery_fraction(c, 10000).point, 0.999);
}

TEST(DiscoveryFraction, ShortHorizon) {
  auto c = two_mode(0.1, 0.05);
  c.horizon = 1e-4;
  EXPECT_LE(discovery_fraction(c, 10000).point, 0.002);
}

TEST(DiscoveryFraction, NoLatentModes) {
  EXPECT_THROW(discovery_fraction(*find_builtin("markov-single"), 100), NoLatentModes);
}

TEST(TowerMcCheck, Examples) {
  auto no_latent = tower_mc_check(*find_builtin("common-cause"), 50.0, 20000);
  EXPECT_TRUE(no_latent.agrees(3.0));

  const auto c = *find_builtin("two-mode-latent");
  const auto tower = tower_mc_check(c, 1.0, 100000);
  EXPECT_TRUE(tower.agrees(3.0)) << tower.lhs.point << " vs " << tower.rhs.point;
  const auto believed = believed_unavailability(c, 1.0, 100000);
  EXPECT_NEAR(tower.lhs.point - believed.point, 0.044, 0.005);
  EXPECT_NEAR(tower.rhs.point - believed.point, 0.044, 0.006);

  const auto zero = tower_mc_check(quiet(), 2.0, 100);
  EXPECT_EQ(zero.lhs.point, 0.0);
  EXPECT_EQ(zero.rhs.point, 0.0);
  EXPECT_THROW(tower_mc_check(c, 2.0, 100), OutOfHorizon);
}

TEST(TowerMcCheck, ConditioningAtEndpointsReproducesTruth) {
  const auto c = *find_builtin("common-cause");
  const auto at_t = tower_mc_check(c, 30.0, 2000, 30.0);
  expect_identical(at_t.lhs, at_t.rhs);
  const auto at_zero = tower_mc_check(c, 30.0, 20000, 0.0);
  EXPECT_TRUE(at_zero.agrees(3.0));
}

TEST(Reproducibility, WorkerCountDoesNotChangeResults) {
  const auto c = *find_builtin("stp-control-rods");
  const RunOptions one{1}, many{4};
  expect_identical(true_unavailability(c, 1.5, 3000, one), true_unavailability(c, 1.5, 3000, many));
  const auto g1 = optimism_gap(c, 2.0, 3000, 0.0, one), g4 = optimism_gap(c, 2.0, 3000, 0.0, many);
  expect_identical(g1.gap, g4.gap);
  expect_identical(g1.believed_estimate, g4.believed_estimate);
  const auto d1 = demand_unavailability(c, 3000, DemandVariant::all_demands, one);
  const auto d4 = demand_unavailability(c, 3000, DemandVariant::all_demands, many);
  expect_identical(d1.estimate, d4.estimate);
  const auto t1 = tower_mc_check(c, 2.0, 3000, std::nullopt, one);
  const auto t4 = tower_mc_check(c, 2.0, 3000, std::nullopt, many);
  expect_identical(t1.rhs, t4.rhs);
}

// 3-sigma intervals from independent seeds cover the analytic value.
TEST(Calibration, ThreeSigmaCoverage) {
  int true_hits = 0, gap_hits = 0, markov_hits = 0;
  const int runs = 200;
  for (int k = 0; k < runs; ++k) {
    const auto r = optimism_gap(two_mode(0.1, 0.05, 777000 + k), 1.0, 4000);
    true_hits += std::abs(r.true_estimate.point - (1.0 - std::exp(-0.15))) <= 3 * r.true_estimate.std_error;
    gap_hits += std::abs(r.gap.point - std::exp(-0.1) * (1.0 - std::exp(-0.05))) <= 3 * r.gap.std_error;
    auto m = *find_builtin("markov-single");
    m.base_seed = 888000 + k;
    const auto e = true_unavailability(m, 20.0, 2000);
    markov_hits += std::abs(e.point - 0.1) <= 3 * e.std_error;
  }
  EXPECT_GE(true_hits, 198);
  EXPECT_GE(gap_hits, 198);
  EXPECT_GE(markov_hits, 198);
}

}  // namespace
}  // namespace protavail
