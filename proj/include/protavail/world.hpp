#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protavail/error.hpp"
#include "protavail/rng.hpp"
#include "protavail/scenario.hpp"

namespace protavail {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Half-open [manifest, restore). restore is +inf for a non-repairable mode
// and may lie beyond the simulated span.
struct Interval {
  double manifest;
  double restore;

  bool contains(double t) const noexcept { return manifest <= t && t < restore; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ModeTimeline {
  std::string mode_id;
  bool latent = false;
  std::vector<Interval> intervals;  // union of the two components below
  double discovery_time = 0.0;      // +inf if not discovered within the span
  std::vector<Interval> natural;    // occurrence/repair alternation
  std::vector<Interval> forced;     // manifestations induced by damaging demands

  double first_manifestation() const noexcept {
    return intervals.empty() ? kNever : intervals.front().manifest;
  }
  bool manifest_at(double t) const noexcept {
    for (const auto& iv : intervals) {
      if (iv.manifest > t) break;
      if (iv.contains(t)) return true;
    }
    return false;
  }
};

struct EventArrivals {
  std::string event_id;
  std::string coupled_mode;  // empty for Poisson events
  std::vector<double> times;
};

struct WorldSample {
  std::string scenario_name;
  std::uint64_t replication_index = 0;
  double horizon = 0.0;
  double simulated_until = 0.0;  // timelines are complete on [0, simulated_until]
  std::vector<ModeTimeline> timelines;
  std::vector<EventArrivals> demand_times;

  const ModeTimeline* timeline(std::string_view id) const {
    for (const auto& tl : timelines)
      if (tl.mode_id == id) return &tl;
    return nullptr;
  }
};

// Right-continuous 0/1 step function on [0, end]. values[0] holds on
// [0, breakpoints[0]), values[j] on [breakpoints[j-1], breakpoints[j]).
struct Trajectory {
  double end = 0.0;
  std::vector<double> breakpoints;
  std::vector<int> values{1};

  int value_at(double t) const {
    auto idx = std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin();
    return values[static_cast<std::size_t>(idx)];
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct ModeHistory {
  std::string mode_id;
  std::vector<Interval> intervals;  // restore beyond the state's time shows as +inf

  friend bool operator==(const ModeHistory&, const ModeHistory&) = default;
};

struct DemandObservation {
  std::string event_id;
  double time;

  friend bool operator==(const DemandObservation&, const DemandObservation&) = default;
};

// What a non-clairvoyant knows at `time`: the modes discovered so far with
// their histories, the observed availability path, and the arrivals of the
// events whose existence is known.
struct InformationState {
  double time = 0.0;
  std::vector<std::string> discovered_modes;  // scenario declaration order
  std::vector<ModeHistory> mode_histories;    // aligned with discovered_modes
  Trajectory observed_history;
  std::vector<DemandObservation> observed_demands;

  bool knows(std::string_view mode_id) const {
    return std::find(discovered_modes.begin(), discovered_modes.end(), mode_id) !=
           discovered_modes.end();
  }

  friend bool operator==(const InformationState&, const InformationState&) = default;
};

struct DemandRecord {
  std::string event_id;
  double time;
  int available;  // X_T
};

// Which parts of a scenario a model contains. The believed model keeps only
// discovered modes and the events it can represent.
struct SubModel {
  std::vector<bool> modes;
  std::vector<bool> events;

  static SubModel full(const ScenarioConfig& c) {
    return {std::vector<bool>(c.modes.size(), true), std::vector<bool>(c.events.size(), true)};
  }
};

namespace detail {

inline double sample_duration(const DistributionSpec& d, SplitMix64& rng) {
  switch (d.kind) {
    case DistributionSpec::Kind::exponential:
      return d.parameter > 0.0 ? rng.exponential(d.parameter) : kNever;
    case DistributionSpec::Kind::fixed:
      return d.parameter;
    case DistributionSpec::Kind::degenerate_zero:
      break;
  }
  return kNever;
}

// End of a duration that started at `start` and is known to be running at
// `now`. Exponential laws forget their age; fixed ones do not.
inline double residual_end(const DistributionSpec& d, double start, double now,
                           SplitMix64& rng) {
  switch (d.kind) {
    case DistributionSpec::Kind::exponential:
      return d.parameter > 0.0 ? now + rng.exponential(d.parameter) : kNever;
    case DistributionSpec::Kind::fixed:
      return start + d.parameter;
    case DistributionSpec::Kind::degenerate_zero:
      break;
  }
  return kNever;
}

inline void run_from_manifest(const FailureModeSpec& m, SplitMix64& rng, double next_manifest,
                              double until, std::vector<Interval>& out) {
  while (next_manifest <= until) {
    const double restore = next_manifest + sample_duration(m.repair, rng);
    out.push_back({next_manifest, restore});
    if (!(restore <= until)) return;
    next_manifest = restore + sample_duration(m.occurrence, rng);
  }
}

inline std::vector<Interval> merge_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
    return a.manifest < b.manifest || (a.manifest == b.manifest && a.restore < b.restore);
  });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.manifest <= out.back().restore)
      out.back().restore = std::max(out.back().restore, iv.restore);
    else
      out.push_back(iv);
  }
  return out;
}

inline bool damages(const InitiatingEventSpec& e, std::string_view mode_id) {
  return std::find(e.damages.begin(), e.damages.end(), mode_id) != e.damages.end();
}

inline constexpr std::uint64_t kEventStride = std::uint64_t{1} << 20;

// Continuation point for conditional resampling: keep everything the world
// settled on [0, at] and redraw the future from fresh streams.
struct Resume {
  const WorldSample* world;
  double at;
};

inline std::uint64_t resample_index(std::uint64_t kind, std::uint64_t index) {
  return (kind << 40) | index;
}

inline double discover_by_inspection(const FailureModeSpec& spec,
                                     const std::vector<Interval>& merged, SplitMix64& rng,
                                     double from, double until) {
  const double step = spec.discovery.interval;
  for (std::uint64_t k = 1;; ++k) {
    const double when = static_cast<double>(k) * step;
    if (when > until) break;
    if (when <= from) continue;
    bool manifest = false;
    for (const auto& iv : merged) manifest = manifest || iv.contains(when);
    if (manifest && rng.uniform_open() < spec.discovery.detect_prob) return when;
  }
  return kNever;
}

inline WorldSample simulate(const ScenarioConfig& c, std::uint64_t replication, double until,
                            const SubModel& model, std::optional<Resume> resume = std::nullopt) {
  auto order = dependency_order(c);
  if (!order) throw std::invalid_argument("scenario has a coupling cycle");
  const std::uint64_t rep_seed = replication_seed(c.base_seed, replication);
  auto stream = [&](StreamTag tag, std::uint64_t index) {
    return SplitMix64(stream_seed(rep_seed, tag, index));
  };
  const double at = resume ? resume->at : 0.0;

  std::vector<std::vector<double>> arrivals(c.events.size());
  for (std::size_t e = 0; e < c.events.size(); ++e) {
    const auto& ev = c.events[e];
    if (!model.events[e] || ev.is_coupled()) continue;
    double t = 0.0;
    SplitMix64 rng = stream(StreamTag::arrival, e);
    if (resume) {
      for (double a : resume->world->demand_times[e].times)
        if (a <= at) arrivals[e].push_back(a);
      t = at;
      rng = stream(StreamTag::resample, resample_index(2, e));
    }
    for (;;) {
      t += rng.exponential(ev.rate);
      if (t > until) break;
      arrivals[e].push_back(t);
    }
  }

  std::vector<std::optional<ModeTimeline>> built(c.modes.size());
  for (std::size_t m : *order) {
    if (!model.modes[m]) continue;
    const auto& spec = c.modes[m];
    ModeTimeline tl;
    tl.mode_id = spec.id;
    tl.latent = spec.latent;

    if (!resume) {
      SplitMix64 rng = stream(StreamTag::mode, m);
      run_from_manifest(spec, rng, sample_duration(spec.occurrence, rng), until, tl.natural);
    } else {
      const ModeTimeline& prior = resume->world->timelines[m];
      SplitMix64 rng = stream(StreamTag::resample, resample_index(1, m));
      for (const auto& iv : prior.natural)
        if (iv.manifest <= at) tl.natural.push_back(iv);
      if (!tl.natural.empty() && tl.natural.back().restore > at) {
        Interval& open = tl.natural.back();
        open.restore = residual_end(spec.repair, open.manifest, at, rng);
        if (open.restore <= until)
          run_from_manifest(spec, rng, open.restore + sample_duration(spec.occurrence, rng),
                            until, tl.natural);
      } else {
        const double last_restore = tl.natural.empty() ? 0.0 : tl.natural.back().restore;
        run_from_manifest(spec, rng, residual_end(spec.occurrence, last_restore, at, rng),
                          until, tl.natural);
      }
      for (auto iv : prior.forced) {
        if (iv.manifest > at) continue;
        if (iv.restore > at) {
          SplitMix64 r = stream(StreamTag::resample,
                                resample_index(3, tl.forced.size() * kEventStride + m));
          iv.restore = residual_end(spec.repair, iv.manifest, at, r);
        }
        tl.forced.push_back(iv);
      }
    }

    for (std::size_t e = 0; e < c.events.size(); ++e) {
      if (!model.events[e] || !damages(c.events[e], spec.id)) continue;
      SplitMix64 rng = resume ? stream(StreamTag::resample, resample_index(4, e * kEventStride + m))
                              : stream(StreamTag::damage, e * kEventStride + m);
      for (double t : arrivals[e]) {
        if (t <= at && resume) continue;  // already carried over from the prior world
        tl.forced.push_back({t, t + sample_duration(spec.repair, rng)});
      }
    }

    std::vector<Interval> all = tl.natural;
    all.insert(all.end(), tl.forced.begin(), tl.forced.end());
    tl.intervals = merge_intervals(std::move(all));

    for (std::size_t e = 0; e < c.events.size(); ++e) {
      const auto& ev = c.events[e];
      if (model.events[e] && ev.is_coupled() && ev.mode_id == spec.id && !tl.intervals.empty())
        arrivals[e].push_back(tl.intervals.front().manifest);
    }

    if (!spec.latent) {
      tl.discovery_time = 0.0;
    } else if (spec.discovery.kind == DiscoveryPolicy::Kind::on_first_manifestation) {
      tl.discovery_time = tl.first_manifestation();
    } else if (resume && resume->world->timelines[m].discovery_time <= at) {
      tl.discovery_time = resume->world->timelines[m].discovery_time;
    } else {
      SplitMix64 rng = resume ? stream(StreamTag::resample, resample_index(5, m))
                              : stream(StreamTag::inspection, m);
      tl.discovery_time = discover_by_inspection(spec, tl.intervals, rng, at, until);
    }
    built[m] = std::move(tl);
  }

  WorldSample w;
  w.scenario_name = c.name;
  w.replication_index = replication;
  w.horizon = c.horizon;
  w.simulated_until = until;
  for (auto& tl : built)
    if (tl) w.timelines.push_back(std::move(*tl));
  for (std::size_t e = 0; e < c.events.size(); ++e) {
    if (!model.events[e]) continue;
    const auto& ev = c.events[e];
    w.demand_times.push_back({ev.id, ev.is_coupled() ? ev.mode_id : std::string{},
                              std::move(arrivals[e])});
  }
  return w;
}

inline void check_time(double t, double horizon) {
  if (!(t >= 0.0 && t <= horizon)) throw OutOfHorizon(t, horizon);
}

}  // namespace detail

// One realized lifecycle. Bit-identical for identical (base_seed, index).
inline WorldSample sample_world(const ScenarioConfig& config, std::uint64_t replication_index) {
  if (replication_index >= config.replications)
    throw std::out_of_range("replication index beyond the scenario's replication plan");
  return detail::simulate(config, replication_index, config.horizon, SubModel::full(config));
}

// Same world restricted to [0, until]; identical to sample_world on that span.
inline WorldSample sample_world_until(const ScenarioConfig& config,
                                      std::uint64_t replication_index, double until) {
  return detail::simulate(config, replication_index, std::min(until, config.horizon),
                          SubModel::full(config));
}

inline int availability(const WorldSample& world, double t) {
  detail::check_time(t, world.horizon);
  if (t > world.simulated_until)
    throw std::logic_error("world was not simulated up to the requested time");
  for (const auto& tl : world.timelines)
    if (tl.manifest_at(t)) return 0;
  return 1;
}

namespace detail {

inline std::vector<Interval> union_of(const WorldSample& world) {
  std::vector<Interval> all;
  for (const auto& tl : world.timelines) all.insert(all.end(), tl.intervals.begin(), tl.intervals.end());
  return merge_intervals(std::move(all));
}

inline Trajectory trajectory_from(const std::vector<Interval>& merged, double end) {
  Trajectory tr;
  tr.end = end;
  for (const auto& iv : merged) {
    if (iv.manifest > end) break;
    tr.breakpoints.push_back(iv.manifest);
    tr.values.push_back(0);
    if (iv.restore > end) break;
    tr.breakpoints.push_back(iv.restore);
    tr.values.push_back(1);
  }
  return tr;
}

}  // namespace detail

inline Trajectory trajectory(const WorldSample& world) {
  return detail::trajectory_from(detail::union_of(world), world.simulated_until);
}

inline Trajectory restrict_trajectory(const Trajectory& tr, double t) {
  Trajectory out;
  out.end = t;
  out.values = {tr.values.front()};
  for (std::size_t j = 0; j < tr.breakpoints.size() && tr.breakpoints[j] <= t; ++j) {
    out.breakpoints.push_back(tr.breakpoints[j]);
    out.values.push_back(tr.values[j + 1]);
  }
  return out;
}

inline InformationState information_state(const WorldSample& world, double t) {
  detail::check_time(t, world.horizon);
  if (t > world.simulated_until)
    throw std::logic_error("world was not simulated up to the requested time");
  InformationState s;
  s.time = t;
  for (const auto& tl : world.timelines) {
    if (tl.discovery_time > t) continue;
    s.discovered_modes.push_back(tl.mode_id);
    ModeHistory h{tl.mode_id, {}};
    for (auto iv : tl.intervals) {
      if (iv.manifest > t) break;
      if (iv.restore > t) iv.restore = kNever;
      h.intervals.push_back(iv);
    }
    s.mode_histories.push_back(std::move(h));
  }
  s.observed_history = restrict_trajectory(trajectory(world), t);
  for (const auto& ev : world.demand_times) {
    if (!ev.coupled_mode.empty() && !s.knows(ev.coupled_mode)) continue;
    for (double a : ev.times)
      if (a <= t) s.observed_demands.push_back({ev.event_id, a});
  }
  std::stable_sort(s.observed_demands.begin(), s.observed_demands.end(),
                   [](const DemandObservation& a, const DemandObservation& b) {
                     return a.time < b.time;
                   });
  return s;
}

// One record per arrival, ordered by time then by event declaration order.
// Damage applies before X_T is read, so a damaging demand sees X_T = 0.
inline std::vector<DemandRecord> demand_outcomes(const WorldSample& world) {
  std::vector<DemandRecord> out;
  for (const auto& ev : world.demand_times)
    for (double t : ev.times)
      if (t <= world.horizon) out.push_back({ev.event_id, t, availability(world, t)});
  std::stable_sort(out.begin(), out.end(),
                   [](const DemandRecord& a, const DemandRecord& b) { return a.time < b.time; });
  return out;
}

// (1/t) * integral of X over [0, t]; 1 at t = 0 since systems start available.
inline double time_average(const WorldSample& world, double t) {
  detail::check_time(t, world.horizon);
  if (t == 0.0) return 1.0;
  double down = 0.0;
  for (const auto& iv : detail::union_of(world)) {
    if (iv.manifest >= t) break;
    down += std::min(iv.restore, t) - iv.manifest;
  }
  return (t - down) / t;
}

// The modes and events a non-clairvoyant can represent once it knows the
// given set of modes.
inline SubModel believed_model(const ScenarioConfig& c,
                               const std::vector<std::string>& discovered) {
  SubModel m{std::vector<bool>(c.modes.size(), false), std::vector<bool>(c.events.size(), false)};
  for (std::size_t i = 0; i < c.modes.size(); ++i)
    m.modes[i] = std::find(discovered.begin(), discovered.end(), c.modes[i].id) != discovered.end();
  for (std::size_t e = 0; e < c.events.size(); ++e) {
    const auto& ev = c.events[e];
    m.events[e] = !ev.is_coupled() || m.modes[*c.mode_index(ev.mode_id)];
  }
  return m;
}

// The same replication replayed in a sub-model, sharing every random draw
// with the full world for the parts both contain.
inline WorldSample simulate_submodel(const ScenarioConfig& c, std::uint64_t replication,
                                     double until, const SubModel& model) {
  return detail::simulate(c, replication, std::min(until, c.horizon), model);
}

// Keeps what `world` settled on [0, at] and redraws the future from fresh
// streams under every mode's true law.
inline WorldSample resample_after(const ScenarioConfig& c, const WorldSample& world, double at,
                                  double until) {
  if (at > world.simulated_until)
    throw std::logic_error("conditioning time beyond the simulated span");
  if (world.timelines.size() != c.modes.size() || world.demand_times.size() != c.events.size())
    throw std::invalid_argument("resampling needs a full-model world");
  return detail::simulate(c, world.replication_index, std::min(until, c.horizon),
                          SubModel::full(c), detail::Resume{&world, at});
}

namespace detail {

inline nlohmann::ordered_json time_json(double t) {
  if (std::isinf(t)) return nullptr;
  return t;
}

inline nlohmann::ordered_json intervals_json(const std::vector<Interval>& v) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& iv : v) out.push_back({time_json(iv.manifest), time_json(iv.restore)});
  return out;
}

}  // namespace detail

// JSON-lines world dump record. +inf is written as null.
inline std::string world_to_json_line(const WorldSample& w) {
  nlohmann::ordered_json j;
  j["scenario"] = w.scenario_name;
  j["replication"] = w.replication_index;
  j["horizon"] = w.horizon;
  j["timelines"] = nlohmann::ordered_json::array();
  for (const auto& tl : w.timelines) {
    j["timelines"].push_back({{"mode_id", tl.mode_id},
                              {"latent", tl.latent},
                              {"intervals", detail::intervals_json(tl.intervals)},
                              {"discovery_time", detail::time_json(tl.discovery_time)}});
  }
  j["demands"] = nlohmann::ordered_json::object();
  for (const auto& ev : w.demand_times) j["demands"][ev.event_id] = ev.times;
  return j.dump();
}

}  // namespace protavail
