#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "protavail/estimators.hpp"
#include "protavail/scenario.hpp"

namespace protavail::report {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "protavail";
inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

inline std::string format12(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Rounds to 12 significant digits; the JSON writer then prints the shortest
// representation of the rounded value, which keeps reports byte-stable.
inline json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return std::strtod(format12(x).c_str(), nullptr);
}

inline json to_json(const EstimateWithCI& e) {
  return json{{"point", number(e.point)}, {"stderr", number(e.std_error)}, {"n", e.n}};
}

inline json to_json(const GapReport& g) {
  return json{{"t", number(g.t)},
              {"condition_at", number(g.condition_at)},
              {"true", to_json(g.true_estimate)},
              {"believed", to_json(g.believed_estimate)},
              {"gap", to_json(g.gap)},
              {"pathwise_violations", g.pathwise_violations}};
}

inline json to_json(const DemandEstimate& d, DemandVariant variant) {
  return json{{"variant", to_string(variant)},
              {"estimate", to_json(d.estimate)},
              {"demand_records", d.demand_records},
              {"replications_without_demand", d.replications_without_demand},
              {"excluded_events", d.excluded_events}};
}

inline json to_json(const ConvergenceSeries& s) {
  json times = json::array(), values = json::array(), errors = json::array();
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    times.push_back(number(s.times[k]));
    values.push_back(number(s.values[k]));
    errors.push_back(number(s.std_errors[k]));
  }
  return json{{"t", times},
              {"value", values},
              {"stderr", errors},
              {"target", s.target ? number(*s.target) : json(nullptr)},
              {"n", s.n}};
}

inline json to_json(const TowerCheck& c) {
  return json{{"t", number(c.t)},
              {"condition_at", number(c.condition_at)},
              {"lhs", to_json(c.lhs)},
              {"rhs", to_json(c.rhs)},
              {"combined_stderr", number(c.combined_std_error())},
              {"agrees_3sigma", c.agrees(3.0)}};
}

// A scenario together with the exact bytes it was read from.
struct LoadedScenario {
  std::string source;  // file path, or builtin:<name>
  std::string bytes;
  ScenarioConfig config;

  std::string digest() const { return "sha256:" + sha256_hex(bytes); }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string scenario_bytes(const std::string& source) {
  constexpr std::string_view prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) {
    auto c = find_builtin(source.substr(prefix.size()));
    if (!c) throw std::runtime_error("unknown builtin scenario '" + source + "'");
    return serialize_scenario(*c);
  }
  return read_file(source);
}

// Identical scenario bytes and arguments give an identical manifest. Wall
// clock time is kept out so that reports embedding it stay byte-stable.
struct RunManifest {
  std::string command;
  std::string scenario_name;
  std::string scenario_source;
  std::string scenario_digest;
  std::uint64_t base_seed = 0;
  std::size_t replications = 0;
  std::vector<std::string> operations;
  json params = json::object();

  json to_json() const {
    return json{{"tool", kToolName},
                {"version", kToolVersion},
                {"command", command},
                {"scenario",
                 {{"name", scenario_name}, {"source", scenario_source}, {"digest", scenario_digest}}},
                {"base_seed", base_seed},
                {"replications", replications},
                {"operations", operations},
                {"params", params}};
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.scenario_name = j.at("scenario").at("name").get<std::string>();
    m.scenario_source = j.at("scenario").at("source").get<std::string>();
    m.scenario_digest = j.at("scenario").at("digest").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.replications = j.at("replications").get<std::size_t>();
    m.operations = j.at("operations").get<std::vector<std::string>>();
    m.params = j.at("params");
    return m;
  }
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace protavail::report
