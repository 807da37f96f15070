#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "protavail/error.hpp"
#include "protavail/parallel.hpp"
#include "protavail/scenario.hpp"
#include "protavail/world.hpp"

namespace protavail {

struct EstimateWithCI {
  double point = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;

  friend bool operator==(const EstimateWithCI&, const EstimateWithCI&) = default;
};

struct RunOptions {
  unsigned workers = 1;
};

// Sample mean and standard error (n - 1 denominator), summed in index order.
inline EstimateWithCI estimate_mean(std::span<const double> samples) {
  EstimateWithCI e;
  e.n = samples.size();
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double x : samples) sum += x;
  e.point = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - e.point) * (x - e.point);
    e.std_error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

struct GapReport {
  double t = 0.0;
  double condition_at = 0.0;
  EstimateWithCI true_estimate;
  EstimateWithCI believed_estimate;
  EstimateWithCI gap;  // paired true - believed
  std::size_t pathwise_violations = 0;
};

enum class DemandVariant { first_demand, all_demands };

inline const char* to_string(DemandVariant v) {
  return v == DemandVariant::first_demand ? "first-demand" : "all-demands";
}

struct DemandEstimate {
  EstimateWithCI estimate;  // n counts replications that saw a demand
  std::size_t demand_records = 0;
  std::size_t replications_without_demand = 0;
  std::vector<std::string> excluded_events;
};

struct ConvergenceSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::optional<double> target;
  std::size_t n = 0;
};

struct TowerCheck {
  double t = 0.0;
  double condition_at = 0.0;
  EstimateWithCI lhs;  // E[1 - X_t]
  EstimateWithCI rhs;  // E[E[1 - X_t | history up to condition_at]]

  double combined_std_error() const {
    return std::sqrt(lhs.std_error * lhs.std_error + rhs.std_error * rhs.std_error);
  }
  bool agrees(double sigmas = 3.0) const {
    return std::abs(lhs.point - rhs.point) <= sigmas * combined_std_error();
  }
};

namespace detail {

inline void require_replications(std::size_t n) {
  if (n < 2) throw std::invalid_argument("estimators need at least 2 replications");
}

inline std::vector<std::string> discovered_at(const WorldSample& w, double s) {
  std::vector<std::string> out;
  for (const auto& tl : w.timelines)
    if (tl.discovery_time <= s) out.push_back(tl.mode_id);
  return out;
}

struct PairedIndicator {
  double truth;
  double believed;
};

inline PairedIndicator paired_unavailability(const ScenarioConfig& c, std::uint64_t i, double t,
                                             double condition_at) {
  const WorldSample world = sample_world_until(c, i, std::max(t, condition_at));
  const double truth = 1.0 - availability(world, t);
  const auto known = discovered_at(world, condition_at);
  if (known.size() == c.modes.size()) return {truth, truth};
  const WorldSample believed = simulate_submodel(c, i, t, believed_model(c, known));
  return {truth, 1.0 - availability(believed, t)};
}

inline DemandEstimate summarize_demands(const std::vector<std::vector<DemandRecord>>& per_rep,
                                        DemandVariant variant,
                                        std::vector<std::string> excluded) {
  DemandEstimate out;
  out.excluded_events = std::move(excluded);
  std::vector<double> failed, counts;
  for (const auto& records : per_rep) {
    if (records.empty()) {
      ++out.replications_without_demand;
      continue;
    }
    if (variant == DemandVariant::first_demand) {
      failed.push_back(1.0 - records.front().available);
      counts.push_back(1.0);
    } else {
      double f = 0.0;
      for (const auto& r : records) f += 1.0 - r.available;
      failed.push_back(f);
      counts.push_back(static_cast<double>(records.size()));
    }
  }
  if (failed.empty()) throw NoDemands(out.excluded_events);

  if (variant == DemandVariant::first_demand) {
    out.estimate = estimate_mean(failed);
    out.demand_records = failed.size();
    return out;
  }
  // Ratio estimator over all records with a replication-clustered standard
  // error, since demands within one lifecycle are correlated.
  double total_failed = 0.0, total = 0.0;
  for (std::size_t i = 0; i < failed.size(); ++i) {
    total_failed += failed[i];
    total += counts[i];
  }
  const double ratio = total_failed / total;
  const std::size_t m = failed.size();
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = failed[i] - ratio * counts[i];
    ss += r * r;
  }
  out.estimate.point = ratio;
  out.estimate.n = m;
  out.estimate.std_error =
      m > 1 ? std::sqrt(ss * static_cast<double>(m) / static_cast<double>(m - 1)) / total : 0.0;
  out.demand_records = static_cast<std::size_t>(total);
  return out;
}

}  // namespace detail

// P(X_t = 0) under the full model.
inline EstimateWithCI true_unavailability(const ScenarioConfig& c, double t, std::size_t n,
                                          const RunOptions& opts = {}) {
  detail::check_time(t, c.horizon);
  detail::require_replications(n);
  auto samples = parallel_map(n, opts.workers, [&](std::size_t i) {
    return 1.0 - availability(sample_world_until(c, i, t), t);
  });
  return estimate_mean(samples);
}

// Unavailability at t predicted by the model a non-clairvoyant holds at
// `condition_at`: only the modes discovered by then, each under its true law,
// replayed on the same random draws as the full world.
inline EstimateWithCI believed_unavailability(const ScenarioConfig& c, double t, std::size_t n,
                                              double condition_at = 0.0,
                                              const RunOptions& opts = {}) {
  detail::check_time(t, c.horizon);
  detail::check_time(condition_at, c.horizon);
  detail::require_replications(n);
  auto samples = parallel_map(n, opts.workers, [&](std::size_t i) {
    return detail::paired_unavailability(c, i, t, condition_at).believed;
  });
  return estimate_mean(samples);
}

inline GapReport optimism_gap(const ScenarioConfig& c, double t, std::size_t n,
                              double condition_at = 0.0, const RunOptions& opts = {}) {
  detail::check_time(t, c.horizon);
  detail::check_time(condition_at, c.horizon);
  detail::require_replications(n);
  auto pairs = parallel_map(n, opts.workers, [&](std::size_t i) {
    return detail::paired_unavailability(c, i, t, condition_at);
  });
  std::vector<double> truth(n), believed(n), diff(n);
  GapReport r;
  r.t = t;
  r.condition_at = condition_at;
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = pairs[i].truth;
    believed[i] = pairs[i].believed;
    diff[i] = truth[i] - believed[i];
    if (pairs[i].believed > pairs[i].truth) ++r.pathwise_violations;
  }
  r.true_estimate = estimate_mean(truth);
  r.believed_estimate = estimate_mean(believed);
  r.gap = estimate_mean(diff);
  return r;
}

// P(X_T = 0) at demand arrivals of the full model. Replications without a
// demand are left out of the denominator and counted.
inline DemandEstimate demand_unavailability(const ScenarioConfig& c, std::size_t n,
                                            DemandVariant variant, const RunOptions& opts = {}) {
  detail::require_replications(n);
  if (c.events.empty()) throw NoDemands();
  auto per_rep = parallel_map(n, opts.workers, [&](std::size_t i) {
    return demand_outcomes(sample_world_until(c, i, c.horizon));
  });
  return detail::summarize_demands(per_rep, variant, {});
}

// Demand unavailability in the deployment-time model. Events coupled to
// latent modes do not exist in that model; they are listed, not estimated.
inline DemandEstimate believed_demand_unavailability(const ScenarioConfig& c, std::size_t n,
                                                     DemandVariant variant,
                                                     const RunOptions& opts = {}) {
  detail::require_replications(n);
  std::vector<std::string> known;
  for (const auto& m : c.modes)
    if (!m.latent) known.push_back(m.id);
  const SubModel model = believed_model(c, known);
  std::vector<std::string> excluded;
  bool any_event = false;
  for (std::size_t e = 0; e < c.events.size(); ++e) {
    if (model.events[e])
      any_event = true;
    else
      excluded.push_back(c.events[e].id);
  }
  if (!any_event) throw NoDemands(excluded);
  auto per_rep = parallel_map(n, opts.workers, [&](std::size_t i) {
    return demand_outcomes(simulate_submodel(c, i, c.horizon, model));
  });
  return detail::summarize_demands(per_rep, variant, std::move(excluded));
}

// Steady-state availability when every mode is an independent exponential
// birth-death pair and no demand damages anything.
inline std::optional<double> analytic_long_run_availability(const ScenarioConfig& c) {
  for (const auto& e : c.events)
    if (!e.damages.empty()) return std::nullopt;
  double a = 1.0;
  for (const auto& m : c.modes) {
    if (!m.occurrence.is_exponential()) return std::nullopt;
    const double lambda = m.occurrence.parameter;
    if (lambda == 0.0) continue;
    if (!m.repair.is_exponential()) return m.repair.is_zero() ? std::optional<double>(0.0) : std::nullopt;
    const double mu = m.repair.parameter;
    a *= mu / (lambda + mu);
  }
  return a;
}

inline ConvergenceSeries long_run(const ScenarioConfig& c, const std::vector<double>& sample_times,
                                  std::size_t n, const RunOptions& opts = {}) {
  detail::require_replications(n);
  if (sample_times.empty()) throw std::invalid_argument("sample_times must not be empty");
  for (std::size_t k = 0; k < sample_times.size(); ++k) {
    detail::check_time(sample_times[k], c.horizon);
    if (k && !(sample_times[k] > sample_times[k - 1]))
      throw std::invalid_argument("sample_times must be strictly increasing");
  }
  const double until = sample_times.back();
  auto per_rep = parallel_map(n, opts.workers, [&](std::size_t i) {
    const WorldSample w = sample_world_until(c, i, until);
    std::vector<double> avg;
    for (double t : sample_times) avg.push_back(time_average(w, t));
    return avg;
  });
  ConvergenceSeries s;
  s.times = sample_times;
  s.n = n;
  s.target = analytic_long_run_availability(c);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < sample_times.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = per_rep[i][k];
    const auto e = estimate_mean(column);
    s.values.push_back(e.point);
    s.std_errors.push_back(e.std_error);
  }
  return s;
}

// Fraction of lifecycles in which every latent consequential mode is found
// by the horizon.
inline EstimateWithCI discovery_fraction(const ScenarioConfig& c, std::size_t n,
                                         const RunOptions& opts = {}) {
  detail::require_replications(n);
  std::vector<std::size_t> latent;
  for (std::size_t m = 0; m < c.modes.size(); ++m)
    if (c.modes[m].latent && c.modes[m].consequential) latent.push_back(m);
  if (latent.empty()) throw NoLatentModes();
  auto samples = parallel_map(n, opts.workers, [&](std::size_t i) {
    const WorldSample w = sample_world_until(c, i, c.horizon);
    for (std::size_t m : latent)
      if (!(w.timelines[m].discovery_time <= c.horizon)) return 0.0;
    return 1.0;
  });
  return estimate_mean(samples);
}

// Monte Carlo tower identity: lhs averages 1 - X_t, rhs averages a draw of
// 1 - X_t from its conditional law given the full history up to
// `condition_at` (default t/2), with all modes under their true laws.
inline TowerCheck tower_mc_check(const ScenarioConfig& c, double t, std::size_t n,
                                 std::optional<double> condition_at = std::nullopt,
                                 const RunOptions& opts = {}) {
  detail::check_time(t, c.horizon);
  detail::require_replications(n);
  const double s = condition_at.value_or(t / 2.0);
  if (!(s >= 0.0 && s <= t)) throw OutOfHorizon(s, t);
  auto pairs = parallel_map(n, opts.workers, [&](std::size_t i) {
    const WorldSample w = sample_world_until(c, i, t);
    const WorldSample cont = resample_after(c, w, s, t);
    return detail::PairedIndicator{1.0 - availability(w, t), 1.0 - availability(cont, t)};
  });
  std::vector<double> lhs(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    lhs[i] = pairs[i].truth;
    rhs[i] = pairs[i].believed;
  }
  return {t, s, estimate_mean(lhs), estimate_mean(rhs)};
}

}  // namespace protavail
