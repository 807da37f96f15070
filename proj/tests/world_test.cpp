#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "protavail/finite_measure.hpp"
#include "protavail/world.hpp"
#include "witness.hpp"

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

ScenarioConfig config(std::string name, double horizon, std::vector<FailureModeSpec> modes,
                      std::vector<InitiatingEventSpec> events = {}, std::size_t replications = 1000,
                      std::uint64_t seed = 99) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.horizon = horizon;
  c.modes = std::move(modes);
  c.events = std::move(events);
  c.replications = replications;
  c.base_seed = seed;
  return c;
}

// A world with hand-placed intervals, for the deterministic examples.
WorldSample world_with(std::vector<std::vector<Interval>> per_mode, double horizon = 10.0) {
  WorldSample w;
  w.scenario_name = "manual";
  w.horizon = horizon;
  w.simulated_until = horizon;
  for (std::size_t m = 0; m < per_mode.size(); ++m) {
    ModeTimeline tl;
    tl.mode_id = "m" + std::to_string(m);
    tl.intervals = per_mode[m];
    tl.natural = per_mode[m];
    w.timelines.push_back(tl);
  }
  return w;
}

TEST(SampleWorld, ZeroRateModesNeverFail) {
  const auto c = config("quiet", 50, {mode("a", 0.0), mode("b", 0.0, DistributionSpec::exponential(1))});
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto w = sample_world(c, i);
    for (const auto& tl : w.timelines) EXPECT_TRUE(tl.intervals.empty());
    const auto tr = trajectory(w);
    EXPECT_TRUE(tr.breakpoints.empty());
    EXPECT_EQ(tr.values, std::vector<int>{1});
  }
}

TEST(SampleWorld, TwoModeLatentHasAtMostOneIntervalPerMode) {
  const auto c = *find_builtin("two-mode-latent");
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto w = sample_world(c, i);
    for (const auto& tl : w.timelines) {
      ASSERT_LE(tl.intervals.size(), 1u);
      if (tl.intervals.empty()) continue;
      EXPECT_EQ(tl.intervals[0].restore, kNever);
    }
    const auto& latent = w.timelines[1];
    ASSERT_TRUE(latent.latent);
    EXPECT_EQ(latent.discovery_time, latent.first_manifestation());
    EXPECT_EQ(w.timelines[0].discovery_time, 0.0);
  }
}

TEST(SampleWorld, FirstManifestationIsExponential) {
  const auto c = config("ks", 400, {mode("a", 0.1)}, {}, 100000, 5150);
  std::vector<double> first;
  for (std::uint64_t i = 0; i < c.replications; ++i) first.push_back(sample_world(c, i).timelines[0].first_manifestation());
  std::sort(first.begin(), first.end());
  const double n = static_cast<double>(first.size());
  double ks = 0.0;
  for (std::size_t j = 0; j < first.size(); ++j) {
    const double cdf = std::isinf(first[j]) ? 1.0 : 1.0 - std::exp(-0.1 * first[j]);
    ks = std::max({ks, std::abs(cdf - j / n), std::abs(cdf - (j + 1) / n)});
  }
  EXPECT_LE(ks, 0.01);
}

TEST(SampleWorld, Deterministic) {
  const auto c = *find_builtin("stp-control-rods");
  for (std::uint64_t i : {0u, 7u, 999u})
    EXPECT_EQ(world_to_json_line(sample_world(c, i)), world_to_json_line(sample_world(c, i)));
  EXPECT_NE(world_to_json_line(sample_world(c, 1)), world_to_json_line(sample_world(c, 2)));
  EXPECT_THROW(sample_world(c, c.replications), std::out_of_range);
}

TEST(SampleWorld, PrefixMatchesFullWorld) {
  const auto c = *find_builtin("common-cause");
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto full = sample_world(c, i);
    const auto part = sample_world_until(c, i, 30.0);
    EXPECT_EQ(restrict_trajectory(trajectory(full), 30.0), trajectory(part));
    EXPECT_EQ(information_state(full, 30.0), information_state(part, 30.0));
  }
}

TEST(SampleWorld, IntervalsDisjointOrderedAndInHorizon) {
  for (const auto& [name, c] : builtin_scenarios()) {
    const std::size_t reps = std::min<std::size_t>(c.replications, 50);
    for (std::uint64_t i = 0; i < reps; ++i) {
      const auto w = sample_world(c, i);
      for (const auto& tl : w.timelines)
        for (std::size_t j = 0; j < tl.intervals.size(); ++j) {
          EXPECT_LT(tl.intervals[j].manifest, tl.intervals[j].restore) << name;
          EXPECT_LE(tl.intervals[j].manifest, c.horizon) << name;
          if (j) {
            EXPECT_LT(tl.intervals[j - 1].restore, tl.intervals[j].manifest) << name;
          }
        }
    }
  }
}

TEST(SampleWorld, CoupledArrivalsAtFirstManifestation) {
  const auto c = *find_builtin("latent-demand");
  for (std::uint64_t i = 0; i < 500; ++i) {
    const auto w = sample_world(c, i);
    for (const auto& ev : w.demand_times) {
      if (ev.coupled_mode.empty()) continue;
      const double first = w.timeline(ev.coupled_mode)->first_manifestation();
      if (std::isinf(first))
        EXPECT_TRUE(ev.times.empty());
      else
        EXPECT_EQ(ev.times, std::vector<double>{first});
    }
  }
}

TEST(SampleWorld, DamagesStartAtDemandTime) {
  const auto c = *find_builtin("common-cause");
  std::size_t demands = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto w = sample_world(c, i);
    const auto* pump = w.timeline("pump");
    for (double t : w.demand_times[0].times) {
      ++demands;
      EXPECT_TRUE(std::any_of(pump->forced.begin(), pump->forced.end(),
                              [&](const Interval& iv) { return iv.manifest == t; }));
      EXPECT_TRUE(pump->manifest_at(t));
    }
  }
  EXPECT_GT(demands, 0u);
}

TEST(Availability, Examples) {
  const auto w = world_with({{{2.0, 5.0}}});
  EXPECT_EQ(availability(w, 0.0), 1);
  EXPECT_EQ(availability(w, 1.999), 1);
  EXPECT_EQ(availability(w, 2.0), 0);
  EXPECT_EQ(availability(w, 4.5), 0);
  EXPECT_EQ(availability(w, 5.0), 1);
  EXPECT_THROW(availability(w, 10.5), OutOfHorizon);
  EXPECT_THROW(availability(w, -1.0), OutOfHorizon);
}

TEST(Availability, StartsAvailableOnEveryBundledScenario) {
  for (const auto& [name, c] : builtin_scenarios())
    for (std::uint64_t i = 0; i < 20; ++i) EXPECT_EQ(availability(sample_world_until(c, i, 0.0), 0.0), 1) << name;
}

TEST(Trajectory, Examples) {
  EXPECT_EQ(trajectory(world_with({{}})).values, std::vector<int>{1});
  const auto tr = trajectory(world_with({{{2.0, 5.0}}}));
  EXPECT_EQ(tr.breakpoints, (std::vector<double>{2.0, 5.0}));
  EXPECT_EQ(tr.values, (std::vector<int>{1, 0, 1}));
}

TEST(Trajectory, OverlappingModesFormUnion) {
  const auto w = world_with({{{1.0, 4.0}, {6.0, 7.0}}, {{3.0, 5.0}, {7.0, 8.0}, {9.0, kNever}}});
  const auto tr = trajectory(w);
  EXPECT_EQ(tr.breakpoints, (std::vector<double>{1.0, 5.0, 6.0, 8.0, 9.0}));
  for (int k = 0; k <= 10000; ++k) {
    const double t = 10.0 * k / 10000;
    ASSERT_EQ(tr.value_at(t), availability(w, t)) << t;
  }
}

TEST(Trajectory, AgreesWithAvailabilityOnSampledWorlds) {
  const auto c = *find_builtin("stp-control-rods");
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto w = sample_world(c, i);
    const auto tr = trajectory(w);
    for (std::size_t j = 1; j < tr.breakpoints.size(); ++j) EXPECT_LT(tr.breakpoints[j - 1], tr.breakpoints[j]);
    for (std::size_t j = 1; j < tr.values.size(); ++j) EXPECT_NE(tr.values[j - 1], tr.values[j]);
    for (int k = 0; k <= 2000; ++k) {
      const double t = c.horizon * k / 2000;
      ASSERT_EQ(tr.value_at(t), availability(w, t));
    }
    // Right-continuity at each breakpoint.
    for (std::size_t j = 0; j < tr.breakpoints.size(); ++j)
      if (tr.breakpoints[j] <= c.horizon) {
        EXPECT_EQ(availability(w, tr.breakpoints[j]), tr.values[j + 1]);
      }
  }
}

TEST(TimeAverage, Examples) {
  EXPECT_EQ(time_average(world_with({{}}), 7.0), 1.0);
  EXPECT_DOUBLE_EQ(time_average(world_with({{{2.0, 5.0}}}), 10.0), 0.7);
  EXPECT_EQ(time_average(world_with({{{2.0, 5.0}}}), 0.0), 1.0);
  EXPECT_THROW(time_average(world_with({{}}), 11.0), OutOfHorizon);
}

TEST(InformationState, AtZeroHoldsTheNonLatentModes) {
  const auto c = *find_builtin("stp-control-rods");
  const auto s = information_state(sample_world(c, 3), 0.0);
  EXPECT_EQ(s.discovered_modes.size(), 54u);
  for (const char* id : {"F10", "C9", "N7"}) EXPECT_FALSE(s.knows(id));
  EXPECT_TRUE(s.knows("rod-01"));
}

TEST(InformationState, LatentModeKnownAfterManifestation) {
  const auto c = *find_builtin("two-mode-latent");
  std::size_t seen = 0;
  for (std::uint64_t i = 0; i < 2000 && seen < 20; ++i) {
    const auto w = sample_world(c, i);
    const double h = w.timelines[1].first_manifestation();
    if (std::isinf(h)) continue;
    ++seen;
    EXPECT_FALSE(information_state(w, std::nextafter(h, 0.0)).knows("latent"));
    EXPECT_TRUE(information_state(w, h).knows("latent"));
    EXPECT_TRUE(information_state(w, c.horizon).knows("latent"));
  }
  EXPECT_GT(seen, 0u);
  EXPECT_THROW(information_state(sample_world(c, 0), 2.0), OutOfHorizon);
}

TEST(InformationState, DiscoveredSetsAreMonotone) {
  const auto c = *find_builtin("stp-control-rods");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, c.horizon);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto w = sample_world_until(c, i % c.replications, c.horizon);
    double s = u(rng), t = u(rng);
    if (s > t) std::swap(s, t);
    const auto early = information_state(w, s).discovered_modes;
    const auto late = information_state(w, t).discovered_modes;
    ASSERT_TRUE(std::includes(late.begin(), late.end(), early.begin(), early.end(),
                              [&](const std::string& a, const std::string& b) {
                                return *c.mode_index(a) < *c.mode_index(b);
                              }));
  }
}

// On-first-manifestation scenarios: the path on [0, t] can be rebuilt from
// the discovered modes' histories alone.
TEST(InformationState, TrajectoryIsAdapted) {
  for (const char* name : {"two-mode-latent", "common-cause", "stp-control-rods", "markov-single"}) {
    auto c = *find_builtin(name);
    if (std::string(name) == "markov-single") c.horizon = 50;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto w = sample_world(c, i);
      for (double t : {c.horizon / 3, c.horizon / 2, c.horizon}) {
        const auto s = information_state(w, t);
        for (int k = 0; k <= 500; ++k) {
          const double r = t * k / 500;
          int rebuilt = 1;
          for (const auto& h : s.mode_histories)
            for (const auto& iv : h.intervals)
              if (iv.contains(r)) rebuilt = 0;
          ASSERT_EQ(rebuilt, availability(w, r)) << name << " rep " << i << " at " << r;
          ASSERT_EQ(s.observed_history.value_at(r), rebuilt);
        }
      }
    }
  }
}

TEST(DemandOutcomes, NoDemandsGiveEmptyList) {
  EXPECT_TRUE(demand_outcomes(world_with({{{1.0, 2.0}}})).empty());
}

TEST(DemandOutcomes, DamagingDemandSeesUnavailable) {
  const auto c = *find_builtin("common-cause");
  std::size_t records = 0;
  for (std::uint64_t i = 0; i < 100; ++i)
    for (const auto& r : demand_outcomes(sample_world(c, i))) {
      ++records;
      EXPECT_EQ(r.available, 0);
    }
  EXPECT_GT(records, 0u);
}

TEST(DemandOutcomes, PoissonArrivalsSeeTimeAverages) {
  const auto c = *find_builtin("markov-single");
  double available = 0.0, records = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i)
    for (const auto& r : demand_outcomes(sample_world(c, i))) {
      available += r.available;
      records += 1.0;
    }
  ASSERT_GT(records, 10000.0);
  EXPECT_NEAR(available / records, 0.9, 0.01);
}

TEST(Witness, IndistinguishableWorldsDisagreeOnCoupledArrival) {
  const auto c = *find_builtin("latent-demand");
  const auto w = test::find_witness(c);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(information_state(w->seen, w->t), information_state(w->unseen, w->t));
  EXPECT_LE(test::first_arrival(w->seen, "hidden-demand"), w->t);
  EXPECT_GT(test::first_arrival(w->unseen, "hidden-demand"), w->t);
}

TEST(Witness, DiscretizedProjectionClassification) {
  const auto c = *find_builtin("latent-demand");
  const auto w = test::find_witness(c);
  ASSERT_TRUE(w.has_value());
  std::vector<WorldSample> worlds{w->seen, w->unseen};
  for (std::uint64_t i = 0; worlds.size() < 8; ++i) worlds.push_back(sample_world(c, i));
  const auto p = test::discretize(worlds, {0.5, 1.0, 1.5, 2.0}, "hidden-demand", "routine");
  EXPECT_TRUE(finite::check_refinement(p.filtration));
  EXPECT_FALSE(finite::is_stopping_time(p.coupled, p.filtration));
  EXPECT_TRUE(finite::is_stopping_time(p.poisson, p.filtration));
}

TEST(WorldDump, JsonLineWritesNeverAsNull) {
  const auto line = world_to_json_line(world_with({{{2.0, kNever}}}));
  EXPECT_NE(line.find("[2.0,null]"), std::string::npos) << line;
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

}  // namespace
}  // namespace protavail
