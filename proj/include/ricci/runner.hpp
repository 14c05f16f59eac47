#pragma once

// Scenario catalog, configuration, checks and report emission.

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ricci/flow.hpp"
#include "ricci/measure.hpp"
#include "ricci/qform.hpp"

namespace ricci {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// One ladder/shell/time series written as trace_<check>.csv.
struct Trace {
  std::vector<double> values;
  std::vector<double> errors;
};

struct CheckRecord {
  std::string name;
  double computed = 0.0;
  double oracle = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  /// Oracle key: which closed form or derived identity the value is held to.
  std::string source;
  /// Non-empty when the check threw instead of producing a value.
  std::string error;
  Json detail = Json::object();
  Trace trace;
  double seconds = 0.0;
};

struct ScenarioSpec {
  std::string name;
  std::string summary;
  /// Oracle key shown by `list`.
  std::string oracle;
  Json params = Json::object();
  /// Config entries that differ from the global defaults for this scenario.
  Json config = Json::object();
  std::vector<std::string> checks;
  bool time_dependent = false;
};

const std::vector<ScenarioSpec>& scenario_catalog();
/// Entries whose name contains `filter`; an empty filter returns all.
std::vector<ScenarioSpec> list_scenarios(const std::string& filter = "");
/// Throws UnknownScenarioError.
const ScenarioSpec& find_scenario(const std::string& name);

/// Validated configuration: defaults, then the scenario's own defaults, then
/// the config file, then dotted command-line overrides.
struct RunConfig {
  Json doc;

  QuadratureScheme scheme() const;
  const Json& params() const { return doc.at("params"); }
  unsigned seed() const { return doc.at("seed").get<unsigned>(); }
  std::vector<double> times() const { return doc.at("flow").at("times").get<std::vector<double>>(); }
  MeasureConfig measure() const;
};

Json default_config();

/// Throws ConfigError naming the offending key path. Override keys are
/// dotted paths ("quadrature.rel_tol"); a bare key names a scenario
/// parameter ("alpha" is "params.alpha"), and "t" names "flow.times".
RunConfig make_config(const ScenarioSpec& spec, const Json& file = Json::object(),
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Everything a check needs, built once per run.
struct Scenario {
  std::string name;
  RunConfig config;
  QuadratureScheme scheme;
  MetricField metric;
  ChristoffelField gamma;
  std::optional<ConformalFactor> phi;
  std::optional<TimeDependentMetric> flow;
  HalfDensityField v;
  HalfDensityField w;
};

Scenario build_scenario(const std::string& name, const RunConfig& config);

/// "half-square", "constant:c" or "linear:a1,..,an".
WeightFunction parse_weight(const std::string& spec, std::size_t n);

/// Seeded plateau bump with random centre, direction and linear part.
HalfDensityField random_bump(const Chart& chart, std::mt19937& rng, double spread = 0.3);

struct RunReport {
  std::string version = kToolVersion;
  std::string scenario;
  Json config;
  std::vector<CheckRecord> checks;

  bool pass() const;
  bool errored() const;
  /// Timing lives under "timing" only, so the rest is reproducible byte for byte.
  Json to_json(bool with_timing = true) const;
};

/// Runs the scenario's checks (in parallel up to worker_threads()) and
/// orders the records by check name.
RunReport run_scenario(const std::string& name, const RunConfig& config);

struct VerbOutput {
  Json doc;
  std::map<std::string, Trace> traces;
  /// 0 pass, 2 a verdict the verb reports failed.
  int status = 0;
};

const std::vector<std::string>& verbs();
/// Dispatches every verb except run and list.
VerbOutput run_verb(const std::string& verb, const std::string& scenario, const RunConfig& config);

/// Writes report.json (or `file`) and one CSV per trace into `dir`.
void write_outputs(const std::string& dir, const Json& doc, const std::map<std::string, Trace>& traces,
                   const std::string& file = "report.json");
std::map<std::string, Trace> traces_of(const RunReport& r);

/// Exit status of the CLI contract: 0 pass, 2 check failure, 1 error.
int exit_code(const RunReport& r);

}  // namespace ricci
