#include "ricci/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "checks.hpp"

namespace ricci {

namespace {

Json field(const std::string& kind = "bump") {
  return {{"kind", kind},  {"center", nullptr}, {"inner", 0.15},   {"outer", 0.45},
          {"eps", 0.5},    {"coef", nullptr},   {"linear", nullptr}};
}

Json radial_fields() {
  Json f = {{"v", field("radial")}, {"w", field("radial")}};
  f["v"]["coef"] = {1.0, 0.0};
  f["w"]["coef"] = {1.0, 0.0};
  return f;
}

Json vanishing_fields() {
  Json f = {{"v", field("vanishing")}, {"w", field("vanishing")}};
  f["v"]["linear"] = {{1.0, 0.5}, {-0.3, 2.0}};
  f["w"]["linear"] = {{0.0, 1.0}, {1.0, 0.2}};
  for (const char* k : {"v", "w"}) {
    f[k]["inner"] = 0.2;
    f[k]["outer"] = 0.5;
  }
  return f;
}

std::vector<ScenarioSpec> make_catalog() {
  std::vector<ScenarioSpec> c;
  auto add = [&](std::string name, std::string summary, std::string oracle, Json params, Json config,
                 std::vector<std::string> checks, bool td = false) {
    c.push_back({std::move(name), std::move(summary), std::move(oracle), std::move(params), std::move(config),
                 std::move(checks), td});
  };
  add("flat-2d", "flat plane", "flat-zero", Json::object(), Json::object(),
      {"q-zero", "ac-zero", "flow-static", "killing-sign", "pairing-consistency"});
  add("cone", "2D cone |x|^(-2 alpha) delta", "cone-vertex-atom", {{"alpha", 0.5}}, {{"fields", radial_fields()}},
      {"vertex-atom", "vertex-atom-offdiagonal", "integrability-l1", "integrability-l2", "quadratic-zero",
       "tame-flow-rejected", "cone-preserving-flow", "pairing-consistency"});
  add("cone-3d", "3D cone, no vertex atom", "cone-3d-no-atom", {{"alpha", 0.5}},
      {{"quadrature", {{"rel_tol", 1e-4}}}}, {"vertex-atom-3d"});
  add("edge", "edge phi = -c|x1|", "edge-line-density", {{"c", 1.0}}, Json::object(),
      {"edge-qvv", "edge-line-density"});
  add("glued-cones", "truncated cones glued along circles", "glued-cones-density", {{"c", 0.8}, {"L", 2.0}},
      {{"measure", {{"eps0", 0.4}, {"curve_samples", 1}}}}, {"gluing-normal", "gluing-tangential"});
  add("glued-caps", "spherical caps glued along circles", "caps-jump", {{"R1", 1.0}, {"r1", 1.0}, {"R2", 1.5}},
      {{"measure", {{"eps0", 0.3}, {"curve_samples", 1}}}},
      {"caps-jump-normal", "caps-jump-tangential", "caps-interior", "pairing-consistency"});
  add("cone-family", "trivial family of 2D cones over a segment", "cone-family-density",
      {{"alpha", 0.25}, {"base_length", 2.0}},
      {{"quadrature", {{"rel_tol", 1e-4}}},
       {"measure", {{"eps0", 0.5}, {"rungs", 3}, {"curve_samples", 1}, {"inner", 0.3}, {"outer", 0.6},
                    {"full_frame", false}}}},
      {"zero-section-normal", "zero-section-tangential"});
  add("sphere", "stereographic round sphere chart", "stereographic-ricci", {{"r0", 1.0}}, Json::object(),
      {"smooth-oracle", "chart-invariance", "ac-density", "bilinearity", "symmetry", "killing-sign",
       "pairing-consistency"});
  add("conformal", "smooth conformal metric", "smooth-ricci", {{"phi", "gauss:amp=0.5,width=0.7"}}, Json::object(),
      {"smooth-oracle"});
  add("bakry-emery", "flat metric with a weight", "weighted-hessian", Json::object(), Json::object(),
      {"bakry-emery"});
  add("kahler", "Kahler metric on complex dimension one", "kahler-real-parts", {{"phi", "gauss:amp=0.5,width=0.7"}},
      Json::object(), {"kahler-cross-check"});
  add("cone-perturbation", "bounded perturbations of the cone connection", "perturbation-linear", {{"alpha", 0.5}},
      {{"fields", radial_fields()}}, {"perturbation-linear"});
  add("sphere-flow", "shrinking round sphere", "sphere-flow-identity", {{"r0", 1.0}}, Json::object(),
      {"flow-identity", "flow-equation"}, true);
  add("flat-flow", "static flat metric", "flat-zero", Json::object(), Json::object(), {"flow-static"}, true);
  add("static-cone-flow", "static cone as a flow", "static-cone-residual", {{"alpha", 0.5}},
      {{"fields", vanishing_fields()}, {"flow", {{"mode", "cone-preserving"}}}},
      {"tame-flow-rejected", "tame-residual-linear", "cone-preserving-flow"}, true);
  add("pulled-back-flow", "shrinking sphere pulled back by a shear", "pulled-back-identity",
      {{"r0", 1.0}, {"shear", 0.3}}, Json::object(), {"tame-flow", "lipschitz-limit"}, true);
  add("mollified-cone-flow", "static smoothing of the cone", "mollified-precondition",
      {{"alpha", 0.5}, {"delta", 0.1}}, {{"fields", radial_fields()}}, {"mollified-precondition"}, true);
  return c;
}

const char* type_name(const Json& j) { return j.type_name(); }

bool compatible(const Json& base, const Json& value) {
  if (base.is_null()) return true;
  if (base.is_number()) return value.is_number();
  if (base.is_boolean()) return value.is_boolean();
  if (base.is_string()) return value.is_string();
  if (base.is_array()) return value.is_array();
  if (base.is_object()) return value.is_object();
  return false;
}

void merge_into(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(key, "unknown key");
    Json& slot = base[it.key()];
    if (!compatible(slot, it.value()))
      throw ConfigError(key, std::string("expected ") + type_name(slot) + ", got " + type_name(it.value()));
    if (slot.is_object())
      merge_into(slot, it.value(), key);
    else
      slot = it.value();
  }
}

Json parse_value(const Json& target, const std::string& raw, const std::string& key) {
  if (target.is_array() && !raw.empty() && raw.front() != '[') {
    Json arr = Json::array();
    std::stringstream ss(raw);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        arr.push_back(Json::parse(part));
      } catch (const Json::exception&) {
        throw ConfigError(key, "cannot parse list element '" + part + "'");
      }
    }
    return arr;
  }
  if (target.is_string()) return raw;
  try {
    return Json::parse(raw);
  } catch (const Json::exception&) {
    return raw;
  }
}

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

double num(const Json& params, const char* key) { return params.at(key).get<double>(); }

Vec vec_or(const Json& j, const Vec& fallback, const std::string& key) {
  if (j.is_null()) return fallback;
  const auto v = j.get<std::vector<double>>();
  if (v.size() != fallback.size()) throw ConfigError(key, "expected " + std::to_string(fallback.size()) + " entries");
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

Vec default_coef(std::size_t n, bool second) {
  Vec c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = second ? (i == 0 ? -0.4 : 1.0 / double(i)) : 1.0 / double(1 + i);
  return c;
}

HalfDensityField make_field(const Json& spec, const std::string& key, const MetricField& m, bool second) {
  const std::size_t n = m.chart.dim;
  const std::string kind = spec.at("kind").get<std::string>();
  const Point center = vec_or(spec.at("center"), m.chart.domain.center(), key + ".center");
  const Vec coef = vec_or(spec.at("coef"), default_coef(n, second), key + ".coef");
  Matrix lin(n);
  if (!spec.at("linear").is_null()) {
    const auto rows = spec.at("linear").get<std::vector<std::vector<double>>>();
    if (rows.size() != n) throw ConfigError(key + ".linear", "expected an n x n matrix");
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw ConfigError(key + ".linear", "expected an n x n matrix");
      for (std::size_t j = 0; j < n; ++j) lin(i, j) = rows[i][j];
    }
  }
  const double inner = spec.at("inner").get<double>(), outer = spec.at("outer").get<double>();
  if (kind == "bump" || kind == "vanishing") {
    BumpSpec s = bump_spec(center, inner, outer, kind == "vanishing" ? Vec(n) : coef);
    s.linear = lin;
    return plateau_bump(m.chart, s);
  }
  if (kind == "radial") return radial_cutoff(m.chart, center, spec.at("eps").get<double>(), coef);
  if (kind == "rotation") {
    if (m.name.rfind("sphere", 0) == 0 && n == 2) {
      const double r0 = std::sqrt(m.eval(Point(2))(0, 0)) / 2.0;
      return sphere_rotation_field(m.chart, r0);
    }
    if (n == 2) return flat_rotation_field(m.chart);
    throw ConfigError(key + ".kind", "rotation fields need a 2D chart");
  }
  throw ConfigError(key + ".kind", "unknown field kind '" + kind + "'");
}

struct Geometry {
  MetricField metric;
  std::optional<ConformalFactor> phi;
  std::optional<TimeDependentMetric> flow;
};

Geometry make_geometry(const std::string& name, const Json& p) {
  const Box box2 = default_box(2);
  Geometry g;
  auto from_flow = [&](TimeDependentMetric f) {
    g.metric = f.at(0.0);
    g.flow = std::move(f);
  };
  if (name == "flat-2d" || name == "bakry-emery" || name == "flat-flow") {
    g.metric = flat(2, box2);
    g.phi = phi_zero(2);
  } else if (name == "cone" || name == "cone-perturbation") {
    g.phi = phi_cone(2, num(p, "alpha"));
    g.metric = cone(2, num(p, "alpha"), box2);
    if (name == "cone") g.flow = static_cone(num(p, "alpha"), box2);
  } else if (name == "cone-3d") {
    g.metric = cone(3, num(p, "alpha"), default_box(3));
  } else if (name == "edge") {
    g.phi = phi_edge(num(p, "c"));
    g.metric = edge(num(p, "c"), box2);
  } else if (name == "glued-cones") {
    g.metric = glued_cones(num(p, "c"), num(p, "L"));
  } else if (name == "glued-caps") {
    g.metric = glued_caps(caps_geometry(num(p, "R1"), num(p, "r1"), num(p, "R2")));
  } else if (name == "cone-family") {
    g.metric = cone_family_trivial(num(p, "alpha"), num(p, "base_length"));
  } else if (name == "sphere") {
    g.phi = phi_sphere(num(p, "r0"));
    g.metric = sphere_chart(num(p, "r0"), box2);
  } else if (name == "conformal") {
    g.phi = parse_phi(p.at("phi").get<std::string>());
    g.metric = conformal(*g.phi, box2);
  } else if (name == "kahler") {
    g.phi = parse_phi(p.at("phi").get<std::string>());
    g.metric = kahler1d(*g.phi, box2);
  } else if (name == "sphere-flow") {
    from_flow(shrinking_sphere(num(p, "r0"), box2));
  } else if (name == "static-cone-flow") {
    g.phi = phi_cone(2, num(p, "alpha"));
    from_flow(static_cone(num(p, "alpha"), box2));
  } else if (name == "pulled-back-flow") {
    from_flow(pulled_back_sphere(num(p, "r0"), shear_map(num(p, "shear"), 0.0), box2));
  } else if (name == "mollified-cone-flow") {
    from_flow(static_mollified_cone(num(p, "alpha"), num(p, "delta"), box2));
  } else {
    throw UnknownScenarioError(name);
  }
  if (!g.flow) g.flow = static_flow(g.metric);
  return g;
}

std::string number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- catalog

const std::vector<ScenarioSpec>& scenario_catalog() {
  static const std::vector<ScenarioSpec> c = make_catalog();
  return c;
}

std::vector<ScenarioSpec> list_scenarios(const std::string& filter) {
  std::vector<ScenarioSpec> out;
  for (const ScenarioSpec& s : scenario_catalog())
    if (filter.empty() || s.name.find(filter) != std::string::npos) out.push_back(s);
  return out;
}

const ScenarioSpec& find_scenario(const std::string& name) {
  for (const ScenarioSpec& s : scenario_catalog())
    if (s.name == name) return s;
  throw UnknownScenarioError(name);
}

// ---------------------------------------------------------------- config

Json default_config() {
  return {
      {"seed", 1},
      {"params", Json::object()},
      {"quadrature", {{"order", 5}, {"rel_tol", 1e-6}, {"abs_tol", 1e-10}, {"shell_ratio", 0.5}, {"max_depth", 30}}},
      {"fields", {{"v", field()}, {"w", field()}}},
      {"measure",
       {{"eps0", 0.5},
        {"rungs", 5},
        {"grid", 8},
        {"curve_samples", 3},
        {"inner", 0.1},
        {"outer", 0.3},
        {"full_frame", true},
        {"pairs", 5},
        {"pairing_tol", 0.02}}},
      {"flow", {{"times", {0.1, 0.2, 0.4}}, {"mode", "tame"}, {"time_order", 5}}},
      {"weight", "half-square"},
      {"oracle_pairs", 10},
  };
}

QuadratureScheme RunConfig::scheme() const {
  const Json& q = doc.at("quadrature");
  QuadratureScheme s;
  s.order = q.at("order").get<int>();
  s.rel_tol = q.at("rel_tol").get<double>();
  s.abs_tol = q.at("abs_tol").get<double>();
  s.shell_ratio = q.at("shell_ratio").get<double>();
  s.max_depth = q.at("max_depth").get<int>();
  return s;
}

MeasureConfig RunConfig::measure() const {
  const Json& m = doc.at("measure");
  MeasureConfig c;
  c.ladder.eps0 = m.at("eps0").get<double>();
  c.ladder.rungs = m.at("rungs").get<int>();
  c.curve.samples = m.at("curve_samples").get<int>();
  c.curve.inner = m.at("inner").get<double>();
  c.curve.outer = m.at("outer").get<double>();
  c.curve.full = m.at("full_frame").get<bool>();
  c.grid = m.at("grid").get<int>();
  c.seed = seed();
  c.pairs = m.at("pairs").get<int>();
  c.pairing_tol = m.at("pairing_tol").get<double>();
  return c;
}

WeightFunction parse_weight(const std::string& spec, std::size_t n) {
  if (spec == "half-square") return weight_half_square(n);
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::vector<double> xs;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        xs.push_back(std::stod(part));
      } catch (const std::exception&) {
        throw ConfigError("weight", "cannot parse '" + part + "'");
      }
    }
  }
  if (kind == "constant" && xs.size() == 1) return weight_constant(xs[0]);
  if (kind == "linear" && xs.size() == n) {
    Vec a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = xs[i];
    return weight_linear(a);
  }
  throw ConfigError("weight", "expected half-square, constant:c or linear:a1,..,an");
}

RunConfig make_config(const ScenarioSpec& spec, const Json& file,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  Json doc = default_config();
  doc["params"] = spec.params;
  merge_into(doc, spec.config, "");
  if (!file.is_null()) merge_into(doc, file, "");
  for (const auto& [raw_key, raw_value] : overrides) {
    std::string key = raw_key;
    if (key == "t")
      key = "flow.times";
    else if (key.find('.') == std::string::npos && spec.params.contains(key))
      key = "params." + key;
    const std::vector<std::string> parts = split_path(key);
    const Json* target = &doc;
    for (const std::string& p : parts) {
      if (!target->is_object() || !target->contains(p)) throw ConfigError(key, "unknown key");
      target = &target->at(p);
    }
    Json patch = parse_value(*target, raw_value, key);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge_into(doc, patch, "");
  }
  RunConfig cfg{doc};
  cfg.scheme().validate();
  const std::string mode = doc["flow"]["mode"].get<std::string>();
  if (mode != "tame" && mode != "cone-preserving") throw ConfigError("flow.mode", "expected tame or cone-preserving");
  const std::vector<double> ts = cfg.times();
  if (ts.empty()) throw ConfigError("flow.times", "empty list");
  for (double t : ts)
    if (!(t > 0)) throw ConfigError("flow.times", "times must be positive");
  if (doc["oracle_pairs"].get<int>() < 1) throw ConfigError("oracle_pairs", "must be positive");
  return cfg;
}

// ---------------------------------------------------------------- scenarios

HalfDensityField random_bump(const Chart& chart, std::mt19937& rng, double spread) {
  std::uniform_real_distribution<double> c(-spread, spread), a(-1.0, 1.0);
  const std::size_t n = chart.dim;
  Point center = chart.domain.center();
  Vec coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    center[i] += c(rng);
    coef[i] = a(rng);
  }
  BumpSpec s = bump_spec(center, 0.15, 0.45, coef);
  Matrix lin(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) lin(i, j) = a(rng);
  s.linear = lin;
  return plateau_bump(chart, s);
}

Scenario build_scenario(const std::string& name, const RunConfig& config) {
  find_scenario(name);
  Geometry g = make_geometry(name, config.params());
  Scenario s;
  s.name = name;
  s.config = config;
  s.scheme = config.scheme();
  s.metric = std::move(g.metric);
  s.gamma = christoffel_from_metric(s.metric);
  s.phi = std::move(g.phi);
  s.flow = std::move(g.flow);
  const Json& f = config.doc.at("fields");
  s.v = make_field(f.at("v"), "fields.v", s.metric, false);
  s.w = make_field(f.at("w"), "fields.w", s.metric, true);
  return s;
}

// ---------------------------------------------------------------- reports

bool RunReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.pass; });
}

bool RunReport::errored() const {
  return std::any_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return !c.error.empty(); });
}

Json RunReport::to_json(bool with_timing) const {
  Json out;
  out["tool"] = "ricci";
  out["version"] = version;
  out["scenario"] = scenario;
  out["seed"] = config.at("seed");
  out["config"] = config;
  Json cs = Json::array();
  Json timing = Json::object();
  double total = 0.0;
  for (const CheckRecord& c : checks) {
    Json r = {{"name", c.name},           {"computed", c.computed}, {"oracle", c.oracle},
              {"tolerance", c.tolerance}, {"pass", c.pass},         {"source", c.source},
              {"detail", c.detail}};
    if (!c.error.empty()) r["error"] = c.error;
    cs.push_back(std::move(r));
    timing[c.name] = c.seconds;
    total += c.seconds;
  }
  out["checks"] = std::move(cs);
  out["pass"] = pass();
  if (with_timing) out["timing"] = {{"checks", timing}, {"total", total}};
  return out;
}

RunReport run_scenario(const std::string& name, const RunConfig& config) {
  const ScenarioSpec& spec = find_scenario(name);
  const Scenario sc = build_scenario(name, config);
  RunReport rep;
  rep.scenario = name;
  rep.config = config.doc;
  rep.checks.resize(spec.checks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.checks.size(); i = next++) {
      const auto start = std::chrono::steady_clock::now();
      CheckRecord r;
      try {
        r = detail::check_function(spec.checks[i])(sc);
      } catch (const std::exception& e) {
        r = CheckRecord{};
        r.error = e.what();
        r.pass = false;
      }
      r.name = spec.checks[i];
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rep.checks[i] = std::move(r);
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(std::max(1u, worker_threads()), spec.checks.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  std::sort(rep.checks.begin(), rep.checks.end(),
            [](const CheckRecord& a, const CheckRecord& b) { return a.name < b.name; });
  return rep;
}

std::map<std::string, Trace> traces_of(const RunReport& r) {
  std::map<std::string, Trace> out;
  for (const CheckRecord& c : r.checks)
    if (!c.trace.values.empty()) out[c.name] = c.trace;
  return out;
}

void write_outputs(const std::string& dir, const Json& doc, const std::map<std::string, Trace>& traces,
                   const std::string& file) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / file) << doc.dump(2) << "\n";
  for (const auto& [name, t] : traces) {
    std::ofstream csv(fs::path(dir) / ("trace_" + name + ".csv"));
    csv << "index,value,error\n";
    for (std::size_t i = 0; i < t.values.size(); ++i)
      csv << i << "," << number(t.values[i]) << "," << number(i < t.errors.size() ? t.errors[i] : 0.0) << "\n";
  }
}

int exit_code(const RunReport& r) {
  if (r.errored()) return 1;
  return r.pass() ? 0 : 2;
}

}  // namespace ricci
