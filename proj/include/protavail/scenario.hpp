#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protavail/error.hpp"

namespace protavail {

// A duration law. Its meaning depends on the role it plays:
//  - occurrence: exponential(rate >= 0, rate 0 = never) or fixed(value > 0);
//  - repair: exponential(rate > 0), fixed(value > 0), or degenerate-zero,
//    which marks the mode non-repairable (it stays manifest forever).
struct DistributionSpec {
  enum class Kind { exponential, fixed, degenerate_zero };

  Kind kind = Kind::degenerate_zero;
  double parameter = 0.0;  // rate for exponential, value for fixed

  static DistributionSpec exponential(double rate) { return {Kind::exponential, rate}; }
  static DistributionSpec fixed(double value) { return {Kind::fixed, value}; }
  static DistributionSpec zero() { return {Kind::degenerate_zero, 0.0}; }

  bool is_exponential() const noexcept { return kind == Kind::exponential; }
  bool is_fixed() const noexcept { return kind == Kind::fixed; }
  bool is_zero() const noexcept { return kind == Kind::degenerate_zero; }

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

struct DiscoveryPolicy {
  enum class Kind { on_first_manifestation, inspection };

  Kind kind = Kind::on_first_manifestation;
  double interval = 0.0;
  double detect_prob = 1.0;

  static DiscoveryPolicy on_first_manifestation() { return {}; }
  static DiscoveryPolicy inspection(double interval, double detect_prob) {
    return {Kind::inspection, interval, detect_prob};
  }

  friend bool operator==(const DiscoveryPolicy&, const DiscoveryPolicy&) = default;
};

struct FailureModeSpec {
  std::string id;
  bool latent = false;  // absent from the deployment-time information
  DistributionSpec occurrence = DistributionSpec::exponential(0.0);
  DistributionSpec repair = DistributionSpec::zero();
  bool consequential = true;
  DiscoveryPolicy discovery;

  bool repairable() const noexcept { return !repair.is_zero(); }

  friend bool operator==(const FailureModeSpec&, const FailureModeSpec&) = default;
};

struct InitiatingEventSpec {
  enum class Arrival { poisson, coupled };

  std::string id;
  Arrival arrival = Arrival::poisson;
  double rate = 0.0;     // poisson only
  std::string mode_id;   // coupled only: arrives at this mode's first manifestation
  std::vector<std::string> damages;  // modes forced to manifest at each arrival

  static InitiatingEventSpec poisson(std::string id, double rate,
                                     std::vector<std::string> damages = {}) {
    return {std::move(id), Arrival::poisson, rate, {}, std::move(damages)};
  }
  static InitiatingEventSpec coupled(std::string id, std::string mode_id,
                                     std::vector<std::string> damages = {}) {
    return {std::move(id), Arrival::coupled, 0.0, std::move(mode_id), std::move(damages)};
  }

  bool is_coupled() const noexcept { return arrival == Arrival::coupled; }

  friend bool operator==(const InitiatingEventSpec&, const InitiatingEventSpec&) = default;
};

struct ScenarioConfig {
  std::string name;
  double horizon = 0.0;
  std::vector<FailureModeSpec> modes;
  std::vector<InitiatingEventSpec> events;
  std::uint64_t replications = 1;
  std::uint64_t base_seed = 0;

  std::optional<std::size_t> mode_index(std::string_view id) const {
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (modes[i].id == id) return i;
    return std::nullopt;
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Violation {
  enum class Rule { range, duplicate, reference, cycle, empty };

  std::string field;
  Rule rule;
  std::string message;

  std::string to_string() const { return field + ": " + message; }
};

namespace detail {

inline void check_occurrence(const DistributionSpec& d, const std::string& field,
                             std::vector<Violation>& out) {
  using R = Violation::Rule;
  switch (d.kind) {
    case DistributionSpec::Kind::exponential:
      if (!(d.parameter >= 0.0) || !std::isfinite(d.parameter))
        out.push_back({field + ".rate", R::range, "occurrence rate must be finite and >= 0"});
      break;
    case DistributionSpec::Kind::fixed:
      if (!(d.parameter > 0.0) || !std::isfinite(d.parameter))
        out.push_back({field + ".value", R::range, "occurrence time must be finite and > 0"});
      break;
    case DistributionSpec::Kind::degenerate_zero:
      out.push_back({field + ".kind", R::range,
                     "degenerate-zero occurrence would manifest at deployment"});
      break;
  }
}

inline void check_repair(const DistributionSpec& d, const std::string& field,
                         std::vector<Violation>& out) {
  using R = Violation::Rule;
  if (d.is_zero()) return;
  const char* what = d.is_exponential() ? ".rate" : ".value";
  if (!(d.parameter > 0.0) || !std::isfinite(d.parameter))
    out.push_back({field + what, R::range, "repair parameter must be finite and > 0"});
}

// Mode b depends on mode a when an event coupled to a damages b. The
// simulator resolves modes in topological order of this relation.
inline std::optional<std::vector<std::size_t>> dependency_order(const ScenarioConfig& c) {
  const std::size_t n = c.modes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : c.events) {
    if (!e.is_coupled()) continue;
    auto a = c.mode_index(e.mode_id);
    if (!a) continue;
    for (const auto& d : e.damages) {
      auto b = c.mode_index(d);
      if (!b) continue;
      succ[*a].push_back(*b);
      ++indegree[*b];
    }
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = n; i-- > 0;)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    // Smallest index first keeps the order canonical.
    auto it = std::min_element(ready.begin(), ready.end());
    std::size_t v = *it;
    ready.erase(it);
    order.push_back(v);
    for (std::size_t w : succ[v])
      if (--indegree[w] == 0) ready.push_back(w);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

}  // namespace detail

// Every rule violated by the config. Empty iff the config is usable.
inline std::vector<Violation> validate(const ScenarioConfig& c) {
  using R = Violation::Rule;
  std::vector<Violation> out;

  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon))
    out.push_back({"horizon", R::range, "horizon must be finite and > 0"});
  if (c.replications < 1)
    out.push_back({"replications", R::range, "replications must be >= 1"});
  if (c.modes.empty() && c.events.empty())
    out.push_back({"modes", R::empty, "scenario declares no modes and no events"});

  std::map<std::string, std::size_t> seen_modes;
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    const auto& m = c.modes[i];
    const std::string base = "modes[" + std::to_string(i) + "]";
    if (m.id.empty()) out.push_back({base + ".id", R::range, "mode id must be non-empty"});
    auto [it, fresh] = seen_modes.emplace(m.id, i);
    if (!fresh)
      out.push_back({base + ".id", R::duplicate,
                     "duplicate mode id '" + m.id + "' (modes[" +
                         std::to_string(it->second) + "] and " + base + ")"});
    detail::check_occurrence(m.occurrence, base + ".occurrence", out);
    detail::check_repair(m.repair, base + ".repair", out);
    if (m.discovery.kind == DiscoveryPolicy::Kind::inspection) {
      if (!(m.discovery.interval > 0.0) || !std::isfinite(m.discovery.interval))
        out.push_back({base + ".discovery.interval", R::range, "interval must be > 0"});
      if (!(m.discovery.detect_prob > 0.0 && m.discovery.detect_prob <= 1.0))
        out.push_back({base + ".discovery.detect_prob", R::range,
                       "detect_prob must lie in (0, 1]"});
    }
  }

  std::map<std::string, std::size_t> seen_events;
  for (std::size_t i = 0; i < c.events.size(); ++i) {
    const auto& e = c.events[i];
    const std::string base = "events[" + std::to_string(i) + "]";
    if (e.id.empty()) out.push_back({base + ".id", R::range, "event id must be non-empty"});
    auto [it, fresh] = seen_events.emplace(e.id, i);
    if (!fresh)
      out.push_back({base + ".id", R::duplicate,
                     "duplicate event id '" + e.id + "' (events[" +
                         std::to_string(it->second) + "] and " + base + ")"});
    if (e.is_coupled()) {
      if (!c.mode_index(e.mode_id))
        out.push_back({base + ".arrival.mode_id", R::reference,
                       "undeclared mode '" + e.mode_id + "'"});
    } else if (!(e.rate > 0.0) || !std::isfinite(e.rate)) {
      out.push_back({base + ".arrival.rate", R::range, "poisson rate must be finite and > 0"});
    }
    std::set<std::string> damaged;
    for (std::size_t j = 0; j < e.damages.size(); ++j) {
      const std::string f = base + ".damages[" + std::to_string(j) + "]";
      if (!c.mode_index(e.damages[j]))
        out.push_back({f, R::reference, "undeclared mode '" + e.damages[j] + "'"});
      else if (!damaged.insert(e.damages[j]).second)
        out.push_back({f, R::duplicate, "mode '" + e.damages[j] + "' damaged twice"});
    }
  }

  if (!detail::dependency_order(c))
    out.push_back({"events", R::cycle,
                   "coupled events and damages form a cycle between modes"});
  return out;
}

namespace detail {

using json = nlohmann::ordered_json;

inline void expect_keys(const json& obj, const std::string& where,
                        std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(where + ": unknown field '" + key + "'");
  }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  return v.get<double>();
}

inline std::uint64_t as_unsigned(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw SchemaError(where + ": expected an unsigned integer");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw SchemaError(where + ": expected an unsigned integer");
}

inline std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + ": expected a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw SchemaError(where + ": expected a boolean");
  return v.get<bool>();
}

inline DistributionSpec parse_distribution(const json& v, const std::string& where) {
  if (!v.is_object()) throw SchemaError(where + ": expected an object");
  const std::string kind = as_string(require(v, where, "kind"), where + ".kind");
  if (kind == "exponential") {
    expect_keys(v, where, {"kind", "rate"});
    return DistributionSpec::exponential(as_number(require(v, where, "rate"), where + ".rate"));
  }
  if (kind == "fixed") {
    expect_keys(v, where, {"kind", "value"});
    return DistributionSpec::fixed(as_number(require(v, where, "value"), where + ".value"));
  }
  if (kind == "degenerate-zero") {
    expect_keys(v, where, {"kind"});
    return DistributionSpec::zero();
  }
  throw SchemaError(where + ".kind: unknown distribution '" + kind + "'");
}

inline DiscoveryPolicy parse_discovery(const json& v, const std::string& where) {
  if (!v.is_object()) throw SchemaError(where + ": expected an object");
  const std::string policy = as_string(require(v, where, "policy"), where + ".policy");
  if (policy == "on-first-manifestation") {
    expect_keys(v, where, {"policy"});
    return DiscoveryPolicy::on_first_manifestation();
  }
  if (policy == "inspection") {
    expect_keys(v, where, {"policy", "interval", "detect_prob"});
    double interval = as_number(require(v, where, "interval"), where + ".interval");
    double p = 1.0;
    if (auto it = v.find("detect_prob"); it != v.end()) p = as_number(*it, where + ".detect_prob");
    return DiscoveryPolicy::inspection(interval, p);
  }
  throw SchemaError(where + ".policy: unknown policy '" + policy + "'");
}

inline FailureModeSpec parse_mode(const json& v, const std::string& where) {
  expect_keys(v, where, {"id", "latent", "occurrence", "repair", "consequential", "discovery"});
  FailureModeSpec m;
  m.id = as_string(require(v, where, "id"), where + ".id");
  if (auto it = v.find("latent"); it != v.end()) m.latent = as_bool(*it, where + ".latent");
  m.occurrence = parse_distribution(require(v, where, "occurrence"), where + ".occurrence");
  if (auto it = v.find("repair"); it != v.end()) m.repair = parse_distribution(*it, where + ".repair");
  if (auto it = v.find("consequential"); it != v.end())
    m.consequential = as_bool(*it, where + ".consequential");
  if (auto it = v.find("discovery"); it != v.end())
    m.discovery = parse_discovery(*it, where + ".discovery");
  return m;
}

inline InitiatingEventSpec parse_event(const json& v, const std::string& where) {
  expect_keys(v, where, {"id", "arrival", "damages"});
  InitiatingEventSpec e;
  e.id = as_string(require(v, where, "id"), where + ".id");
  const json& a = require(v, where, "arrival");
  const std::string aw = where + ".arrival";
  if (!a.is_object()) throw SchemaError(aw + ": expected an object");
  const std::string kind = as_string(require(a, aw, "kind"), aw + ".kind");
  if (kind == "poisson") {
    expect_keys(a, aw, {"kind", "rate"});
    e.arrival = InitiatingEventSpec::Arrival::poisson;
    e.rate = as_number(require(a, aw, "rate"), aw + ".rate");
  } else if (kind == "coupled") {
    expect_keys(a, aw, {"kind", "mode_id"});
    e.arrival = InitiatingEventSpec::Arrival::coupled;
    e.mode_id = as_string(require(a, aw, "mode_id"), aw + ".mode_id");
  } else {
    throw SchemaError(aw + ".kind: unknown arrival kind '" + kind + "'");
  }
  if (auto it = v.find("damages"); it != v.end()) {
    if (!it->is_array()) throw SchemaError(where + ".damages: expected an array");
    for (std::size_t j = 0; j < it->size(); ++j)
      e.damages.push_back(as_string((*it)[j], where + ".damages[" + std::to_string(j) + "]"));
  }
  return e;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  // nlohmann reports the 1-based byte index of the offending character.
  std::size_t line = 1, column = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace detail

// Structural parse only: syntax and schema. Range and reference rules are
// left to validate() so callers can list every violation at once.
inline ScenarioConfig parse_scenario_document(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, column] = detail::line_column(text, e.byte);
    throw SyntaxError("malformed scenario document", line, column);
  }
  const std::string root = "scenario";
  detail::expect_keys(doc, root,
                      {"name", "horizon", "base_seed", "replications", "modes", "events"});
  ScenarioConfig c;
  c.name = detail::as_string(detail::require(doc, root, "name"), "name");
  c.horizon = detail::as_number(detail::require(doc, root, "horizon"), "horizon");
  if (auto it = doc.find("base_seed"); it != doc.end())
    c.base_seed = detail::as_unsigned(*it, "base_seed");
  if (auto it = doc.find("replications"); it != doc.end())
    c.replications = detail::as_unsigned(*it, "replications");
  if (auto it = doc.find("modes"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("modes: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i)
      c.modes.push_back(detail::parse_mode((*it)[i], "modes[" + std::to_string(i) + "]"));
  }
  if (auto it = doc.find("events"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("events: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i)
      c.events.push_back(detail::parse_event((*it)[i], "events[" + std::to_string(i) + "]"));
  }
  return c;
}

// Full parse: the returned config satisfies every validate() rule.
inline ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig c = parse_scenario_document(text);
  auto violations = validate(c);
  if (violations.empty()) return c;
  // Dangling references take precedence, then ranges, then the rest.
  for (const auto& v : violations)
    if (v.rule == Violation::Rule::reference) throw ReferenceError(v.to_string());
  for (const auto& v : violations)
    if (v.rule == Violation::Rule::range) throw RangeError(v.to_string());
  throw SchemaError(violations.front().to_string());
}

namespace detail {

inline json to_json(const DistributionSpec& d) {
  switch (d.kind) {
    case DistributionSpec::Kind::exponential:
      return json{{"kind", "exponential"}, {"rate", d.parameter}};
    case DistributionSpec::Kind::fixed:
      return json{{"kind", "fixed"}, {"value", d.parameter}};
    case DistributionSpec::Kind::degenerate_zero:
      break;
  }
  return json{{"kind", "degenerate-zero"}};
}

inline json to_json(const DiscoveryPolicy& p) {
  if (p.kind == DiscoveryPolicy::Kind::on_first_manifestation)
    return json{{"policy", "on-first-manifestation"}};
  return json{{"policy", "inspection"}, {"interval", p.interval}, {"detect_prob", p.detect_prob}};
}

inline json to_json(const ScenarioConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["horizon"] = c.horizon;
  doc["base_seed"] = c.base_seed;
  doc["replications"] = c.replications;
  doc["modes"] = json::array();
  for (const auto& m : c.modes) {
    doc["modes"].push_back(json{{"id", m.id},
                                {"latent", m.latent},
                                {"occurrence", to_json(m.occurrence)},
                                {"repair", to_json(m.repair)},
                                {"consequential", m.consequential},
                                {"discovery", to_json(m.discovery)}});
  }
  doc["events"] = json::array();
  for (const auto& e : c.events) {
    json ev;
    ev["id"] = e.id;
    if (e.is_coupled())
      ev["arrival"] = json{{"kind", "coupled"}, {"mode_id", e.mode_id}};
    else
      ev["arrival"] = json{{"kind", "poisson"}, {"rate", e.rate}};
    if (!e.damages.empty()) ev["damages"] = e.damages;
    doc["events"].push_back(std::move(ev));
  }
  return doc;
}

}  // namespace detail

// Canonical document text; parse_scenario_document inverts it exactly.
inline std::string serialize_scenario(const ScenarioConfig& c) {
  return detail::to_json(c).dump(2) + "\n";
}

// Bundled scenarios.
//
//  markov-single     one repairable mode, occurrence rate 1, repair rate 9, so
//                    steady-state unavailability is 1/(1+9) = 0.1; independent
//                    Poisson demands observe it.
//  two-mode-latent   known mode rate 0.1 and latent mode rate 0.05, both
//                    non-repairable, horizon 1.
//  common-cause      Poisson demand that instantly damages the pump it calls on.
//  stp-control-rods  57 rod-insertion modes; rods F10, C9 and N7 carry latent
//                    stuck-rod variants absent from the design analysis.
//  latent-demand     a demand coupled to a latent mode that inspection never
//                    reveals within the horizon, next to an ordinary Poisson
//                    demand.
inline std::map<std::string, ScenarioConfig> builtin_scenarios() {
  std::map<std::string, ScenarioConfig> out;

  {
    ScenarioConfig c;
    c.name = "markov-single";
    c.horizon = 10000.0;
    c.replications = 100;
    c.base_seed = 1001;
    c.modes.push_back({"unit", false, DistributionSpec::exponential(1.0),
                       DistributionSpec::exponential(9.0), true, {}});
    c.events.push_back(InitiatingEventSpec::poisson("demand", 0.1));
    out.emplace(c.name, c);
  }
  {
    ScenarioConfig c;
    c.name = "two-mode-latent";
    c.horizon = 1.0;
    c.replications = 100000;
    c.base_seed = 2002;
    c.modes.push_back({"known", false, DistributionSpec::exponential(0.1),
                       DistributionSpec::zero(), true, {}});
    c.modes.push_back({"latent", true, DistributionSpec::exponential(0.05),
                       DistributionSpec::zero(), true, {}});
    out.emplace(c.name, c);
  }
  {
    ScenarioConfig c;
    c.name = "common-cause";
    c.horizon = 100.0;
    c.replications = 10000;
    c.base_seed = 3003;
    c.modes.push_back({"pump", false, DistributionSpec::exponential(0.1),
                       DistributionSpec::exponential(10.0), true, {}});
    c.events.push_back(InitiatingEventSpec::poisson("seismic", 0.5, {"pump"}));
    out.emplace(c.name, c);
  }
  {
    ScenarioConfig c;
    c.name = "stp-control-rods";
    c.horizon = 2.0;
    c.replications = 1000;
    c.base_seed = 19951218;
    for (int i = 1; i <= 54; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "rod-%02d", i);
      c.modes.push_back({id, false, DistributionSpec::exponential(0.002),
                         DistributionSpec::fixed(0.02), true, {}});
    }
    for (const char* rod : {"F10", "C9", "N7"}) {
      c.modes.push_back({rod, true, DistributionSpec::exponential(0.5),
                         DistributionSpec::exponential(20.0), true, {}});
    }
    c.events.push_back(InitiatingEventSpec::poisson("reactor-trip", 1.0));
    out.emplace(c.name, c);
  }
  {
    ScenarioConfig c;
    c.name = "latent-demand";
    c.horizon = 2.0;
    c.replications = 10000;
    c.base_seed = 4004;
    c.modes.push_back({"known", false, DistributionSpec::exponential(1.0),
                       DistributionSpec::zero(), true, {}});
    c.modes.push_back({"hidden", true, DistributionSpec::exponential(0.5),
                       DistributionSpec::zero(), true, DiscoveryPolicy::inspection(5.0, 1.0)});
    c.events.push_back(InitiatingEventSpec::coupled("hidden-demand", "hidden"));
    c.events.push_back(InitiatingEventSpec::poisson("routine", 1.0));
    out.emplace(c.name, c);
  }
  return out;
}

inline std::optional<ScenarioConfig> find_builtin(std::string_view name) {
  auto all = builtin_scenarios();
  auto it = all.find(std::string(name));
  if (it == all.end()) return std::nullopt;
  return it->second;
}

}  // namespace protavail
