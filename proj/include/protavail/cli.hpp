#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protavail/estimators.hpp"
#include "protavail/report.hpp"
#include "protavail/scenario.hpp"
#include "protavail/world.hpp"

// Command-line front end. Exit codes: 0 success, 1 usage or validation
// failure, 2 unreadable or malformed scenario, 3 estimator error.
namespace protavail::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kParse = 2, kEstimator = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunArgs {
  std::string command = "run";  // run | compare
  std::string scenario;
  std::vector<std::string> ops;
  std::vector<double> t;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string out;
  std::string format = "json";
  std::optional<double> condition_at;
  std::string variant = "first-demand";
};

inline const std::vector<std::string>& known_ops() {
  static const std::vector<std::string> ops = {
      "true_unavailability",   "believed_unavailability",        "optimism_gap",
      "demand_unavailability", "believed_demand_unavailability", "long_run",
      "discovery_fraction",    "tower_mc_check"};
  return ops;
}

inline bool needs_times(const std::string& op) {
  return op != "demand_unavailability" && op != "believed_demand_unavailability" &&
         op != "discovery_fraction";
}

inline report::LoadedScenario load_scenario(const std::string& source) {
  report::LoadedScenario s;
  s.source = source;
  s.bytes = report::scenario_bytes(source);
  s.config = parse_scenario(s.bytes);
  return s;
}

namespace detail {

using report::json;
using report::number;

inline DemandVariant parse_variant(const std::string& v) {
  if (v == "first-demand") return DemandVariant::first_demand;
  if (v == "all-demands") return DemandVariant::all_demands;
  throw UsageError("unknown variant '" + v + "' (expected first-demand or all-demands)");
}

// "" is an empty grid; any other malformed entry is a usage error.
inline std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    char* end = nullptr;
    const double t = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !std::isfinite(t))
      throw CLI::ValidationError("--t", "'" + item + "' is not a time");
    out.push_back(t);
  }
  if (text.back() == ',') throw CLI::ValidationError("--t", "trailing comma");
  return out;
}

inline json with_op(const std::string& op, const json& body) {
  json r{{"op", op}};
  for (const auto& [k, v] : body.items()) r[k] = v;
  return r;
}

struct CsvRow {
  std::string op;
  double t;
  EstimateWithCI e;
};

inline std::string csv_line(const CsvRow& r) {
  return r.op + "," + report::format12(r.t) + "," + report::format12(r.e.point) + "," +
         report::format12(r.e.std_error) + "," + std::to_string(r.e.n) + "\n";
}

struct Outcome {
  std::string body;
  report::RunManifest manifest;
};

inline void check_common(const RunArgs& a, std::size_t n) {
  if (n < 2) throw UsageError("--n must be at least 2");
  if (a.format != "json" && a.format != "csv")
    throw UsageError("--format must be json or csv");
}

inline report::RunManifest make_manifest(const RunArgs& a, const report::LoadedScenario& s,
                                         const ScenarioConfig& c, std::size_t n) {
  report::RunManifest m;
  m.command = a.command;
  m.scenario_name = c.name;
  m.scenario_source = s.source;
  m.scenario_digest = s.digest();
  m.base_seed = c.base_seed;
  m.replications = n;
  m.operations = a.ops;
  json times = json::array();
  for (double t : a.t) times.push_back(number(t));
  m.params = json{{"t", times},
                  {"condition_at", a.condition_at ? number(*a.condition_at) : json(nullptr)},
                  {"variant", a.variant},
                  {"format", a.format}};
  return m;
}

inline Outcome execute_run(const RunArgs& a, const report::LoadedScenario& s) {
  ScenarioConfig c = s.config;
  if (a.seed) c.base_seed = *a.seed;
  const std::size_t n = a.n.value_or(c.replications);
  check_common(a, n);
  if (a.ops.empty()) throw UsageError("--op is required");
  for (const auto& op : a.ops) {
    if (std::find(known_ops().begin(), known_ops().end(), op) == known_ops().end())
      throw UsageError("unknown operation '" + op + "'");
    if (needs_times(op) && a.t.empty()) throw UsageError("operation '" + op + "' needs --t");
  }
  const RunOptions opts{a.workers};
  const DemandVariant variant = parse_variant(a.variant);

  json results = json::array();
  std::string csv = "op,t,point,stderr,n\n";
  for (const auto& op : a.ops) {
    if (op == "long_run") {
      const auto series = long_run(c, a.t, n, opts);
      results.push_back(json{{"op", op}, {"series", report::to_json(series)}});
      for (std::size_t k = 0; k < series.times.size(); ++k)
        csv += csv_line({op, series.times[k], {series.values[k], series.std_errors[k], n}});
      continue;
    }
    if (op == "demand_unavailability" || op == "believed_demand_unavailability") {
      const auto d = op == "demand_unavailability"
                         ? demand_unavailability(c, n, variant, opts)
                         : believed_demand_unavailability(c, n, variant, opts);
      results.push_back(with_op(op, report::to_json(d, variant)));
      csv += csv_line({op, c.horizon, d.estimate});
      continue;
    }
    if (op == "discovery_fraction") {
      const auto e = discovery_fraction(c, n, opts);
      results.push_back(json{{"op", op}, {"horizon", number(c.horizon)}, {"estimate", report::to_json(e)}});
      csv += csv_line({op, c.horizon, e});
      continue;
    }
    for (double t : a.t) {
      if (op == "true_unavailability") {
        const auto e = true_unavailability(c, t, n, opts);
        results.push_back(json{{"op", op}, {"t", number(t)}, {"estimate", report::to_json(e)}});
        csv += csv_line({op, t, e});
      } else if (op == "believed_unavailability") {
        const double s_at = a.condition_at.value_or(0.0);
        const auto e = believed_unavailability(c, t, n, s_at, opts);
        results.push_back(json{{"op", op},
                               {"t", number(t)},
                               {"condition_at", number(s_at)},
                               {"estimate", report::to_json(e)}});
        csv += csv_line({op, t, e});
      } else if (op == "optimism_gap") {
        const auto g = optimism_gap(c, t, n, a.condition_at.value_or(0.0), opts);
        results.push_back(with_op(op, report::to_json(g)));
        csv += csv_line({op + ".true", t, g.true_estimate});
        csv += csv_line({op + ".believed", t, g.believed_estimate});
        csv += csv_line({op + ".gap", t, g.gap});
      } else if (op == "tower_mc_check") {
        const auto tc = tower_mc_check(c, t, n, a.condition_at, opts);
        results.push_back(with_op(op, report::to_json(tc)));
        csv += csv_line({op + ".lhs", t, tc.lhs});
        csv += csv_line({op + ".rhs", t, tc.rhs});
      }
    }
  }

  Outcome out;
  out.manifest = make_manifest(a, s, c, n);
  if (a.format == "csv") {
    out.body = csv;
  } else {
    out.body = report::dump(json{{"manifest", out.manifest.to_json()}, {"results", results}});
  }
  return out;
}

inline Outcome execute_compare(const RunArgs& a, const report::LoadedScenario& s) {
  ScenarioConfig c = s.config;
  if (a.seed) c.base_seed = *a.seed;
  const std::size_t n = a.n.value_or(c.replications);
  check_common(a, n);
  if (a.t.empty()) throw UsageError("--t grid must not be empty");
  const RunOptions opts{a.workers};
  const double s_at = a.condition_at.value_or(0.0);

  std::vector<GapReport> rows;
  for (double t : a.t) rows.push_back(optimism_gap(c, t, n, s_at, opts));
  std::optional<EstimateWithCI> discovered;
  try {
    discovered = discovery_fraction(c, n, opts);
  } catch (const NoLatentModes&) {
  }

  RunArgs recorded = a;
  recorded.ops = {"optimism_gap", "discovery_fraction"};
  Outcome out;
  out.manifest = make_manifest(recorded, s, c, n);
  if (a.format == "csv") {
    std::string csv = "t,true,true_stderr,believed,believed_stderr,gap,gap_stderr\n";
    using report::format12;
    for (const auto& g : rows) {
      csv += format12(g.t) + "," + format12(g.true_estimate.point) + "," +
             format12(g.true_estimate.std_error) + "," + format12(g.believed_estimate.point) +
             "," + format12(g.believed_estimate.std_error) + "," + format12(g.gap.point) + "," +
             format12(g.gap.std_error) + "\n";
    }
    if (discovered)
      csv += "discovery_fraction," + format12(discovered->point) + "," +
             format12(discovered->std_error) + ",,,,\n";
    out.body = csv;
  } else {
    json series = json::array();
    for (const auto& g : rows) series.push_back(report::to_json(g));
    out.body = report::dump(json{
        {"manifest", out.manifest.to_json()},
        {"series", series},
        {"discovery_fraction", discovered ? report::to_json(*discovered) : json(nullptr)}});
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

}  // namespace detail

// Runs one run/compare invocation end to end and writes its outputs.
inline int execute(const RunArgs& a, std::ostream& out, std::ostream& err) {
  report::LoadedScenario s;
  try {
    s = load_scenario(a.scenario);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }
  const auto started = std::chrono::steady_clock::now();
  detail::Outcome result;
  try {
    result = a.command == "compare" ? detail::execute_compare(a, s) : detail::execute_run(a, s);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kInvalid;
  } catch (const Error& e) {
    err << "estimator error: " << e.what() << "\n";
    return kEstimator;
  } catch (const std::invalid_argument& e) {
    err << "estimator error: " << e.what() << "\n";
    return kEstimator;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (a.out.empty()) {
    out << result.body;
    return kOk;
  }
  try {
    detail::write_text(a.out, result.body);
    auto manifest = result.manifest.to_json();
    manifest["wall_clock_seconds"] = seconds;
    detail::write_text(a.out + ".manifest.json", report::dump(manifest));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}

inline int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  ScenarioConfig c;
  try {
    c = parse_scenario_document(report::scenario_bytes(path));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }
  const auto violations = validate(c);
  for (const auto& v : violations) out << v.to_string() << "\n";
  if (!violations.empty()) return kInvalid;
  out << "ok: " << c.name << "\n";
  return kOk;
}

// Re-runs the command recorded in a report or manifest sidecar.
inline int cmd_replay(const std::string& manifest_path, const std::string& out_path,
                      unsigned workers, std::ostream& out, std::ostream& err) {
  report::RunManifest m;
  try {
    auto j = report::json::parse(report::read_file(manifest_path));
    m = report::RunManifest::from_json(j.contains("manifest") ? j.at("manifest") : j);
  } catch (const std::exception& e) {
    err << "error: unreadable manifest: " << e.what() << "\n";
    return kParse;
  }
  try {
    if ("sha256:" + report::sha256_hex(report::scenario_bytes(m.scenario_source)) !=
        m.scenario_digest) {
      err << "error: scenario '" << m.scenario_source << "' no longer matches the recorded digest\n";
      return kParse;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }
  RunArgs a;
  a.command = m.command;
  a.scenario = m.scenario_source;
  a.ops = m.operations;
  for (const auto& t : m.params.at("t")) a.t.push_back(t.get<double>());
  a.n = m.replications;
  a.seed = m.base_seed;
  a.workers = workers;
  a.out = out_path;
  a.format = m.params.at("format").get<std::string>();
  if (!m.params.at("condition_at").is_null()) a.condition_at = m.params.at("condition_at").get<double>();
  a.variant = m.params.at("variant").get<std::string>();
  return execute(a, out, err);
}

inline int cmd_dump(const std::string& source, std::size_t n, std::optional<std::uint64_t> seed,
                    const std::string& out_path, std::ostream& out, std::ostream& err) {
  report::LoadedScenario s;
  try {
    s = load_scenario(source);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kParse;
  }
  ScenarioConfig c = s.config;
  if (seed) c.base_seed = *seed;
  std::string lines;
  for (std::size_t i = 0; i < n; ++i) lines += world_to_json_line(sample_world_until(c, i, c.horizon)) + "\n";
  if (out_path.empty()) {
    out << lines;
  } else {
    detail::write_text(out_path, lines);
  }
  return kOk;
}

inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Protection availability simulator and estimator toolkit", "protavail"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario document");
  validate_cmd->add_option("--scenario", validate_path, "Scenario file or builtin:<name>")->required();

  RunArgs run_args, compare_args;
  auto add_common = [](CLI::App* sub, RunArgs& a) {
    sub->add_option("--scenario", a.scenario, "Scenario file or builtin:<name>")->required();
    sub->add_option_function<std::string>(
        "--t", [&a](const std::string& text) { a.t = detail::parse_times(text); },
        "Comma-separated evaluation times");
    sub->add_option("--n", a.n, "Replications (default: the scenario's plan)");
    sub->add_option("--seed", a.seed, "Override base_seed");
    sub->add_option("--workers", a.workers, "Worker threads; never changes output")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", a.out, "Output path (default stdout)");
    sub->add_option("--condition-at", a.condition_at, "Time the believed model conditions on");
  };
  auto* run_cmd = app.add_subcommand("run", "Run estimators and write a report");
  add_common(run_cmd, run_args);
  run_cmd->add_option("--op", run_args.ops, "Estimator name(s), comma-separated")
      ->delimiter(',')
      ->required();
  run_cmd->add_option("--format", run_args.format, "json or csv");
  run_cmd->add_option("--variant", run_args.variant, "first-demand or all-demands");

  auto* compare_cmd = app.add_subcommand("compare", "True vs believed unavailability series");
  add_common(compare_cmd, compare_args);
  compare_args.format = "csv";
  compare_cmd->add_option("--format", compare_args.format, "csv or json");

  std::string replay_path, replay_out;
  unsigned replay_workers = 1;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("--manifest", replay_path, "Report or manifest file")->required();
  replay_cmd->add_option("--out", replay_out, "Output path (default stdout)");
  replay_cmd->add_option("--workers", replay_workers)->check(CLI::PositiveNumber);

  std::string dump_source, dump_out;
  std::size_t dump_n = 1;
  std::optional<std::uint64_t> dump_seed;
  auto* dump_cmd = app.add_subcommand("dump", "Write sampled worlds as JSON lines");
  dump_cmd->add_option("--scenario", dump_source)->required();
  dump_cmd->add_option("--n", dump_n, "Number of worlds");
  dump_cmd->add_option("--seed", dump_seed);
  dump_cmd->add_option("--out", dump_out);

  std::string builtin_name;
  auto* builtin_cmd = app.add_subcommand("builtin", "Print a bundled scenario document");
  builtin_cmd->add_option("--name", builtin_name, "Scenario name; omit to list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kInvalid;
  }

  if (*validate_cmd) return cmd_validate(validate_path, out, err);
  if (*run_cmd) {
    run_args.command = "run";
    return execute(run_args, out, err);
  }
  if (*compare_cmd) {
    compare_args.command = "compare";
    return execute(compare_args, out, err);
  }
  if (*replay_cmd) return cmd_replay(replay_path, replay_out, replay_workers, out, err);
  if (*dump_cmd) return cmd_dump(dump_source, dump_n, dump_seed, dump_out, out, err);
  if (*builtin_cmd) {
    if (builtin_name.empty()) {
      for (const auto& [name, _] : builtin_scenarios()) out << name << "\n";
      return kOk;
    }
    auto c = find_builtin(builtin_name);
    if (!c) {
      err << "error: unknown builtin scenario '" << builtin_name << "'\n";
      return kInvalid;
    }
    out << serialize_scenario(*c);
    return kOk;
  }
  return kInvalid;
}

}  // namespace protavail::cli
