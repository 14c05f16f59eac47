#include <algorithm>
#include <cmath>
#include <sstream>

#include "checks.hpp"

namespace ricci {

namespace {

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (std::size_t i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

Json to_json(const IntegrabilityVerdict& v) {
  return {{"gamma_l1", to_string(v.gamma_l1)},
          {"gamma_l2", to_string(v.gamma_l2)},
          {"quadratic", to_string(v.quadratic)},
          {"tame", v.tame()}};
}

Json breakdown(std::size_t pair, const FlowResidual& r) {
  return {{"pair", pair},          {"t", r.t},
          {"lhs", r.lhs},          {"initial", r.initial},
          {"dv_term", r.dv_term},  {"dw_term", r.dw_term},
          {"q_term", r.q_term},    {"rhs", r.rhs},
          {"residual", r.residual}, {"error", r.error},
          {"tolerance", r.tolerance()}, {"pass", r.passes()}};
}

Json header(const std::string& verb, const Scenario& s) {
  return {{"tool", "ricci"},          {"version", kToolVersion}, {"verb", verb},
          {"scenario", s.name},       {"seed", s.config.seed()}, {"config", s.config.doc}};
}

VerbOutput qform(const Scenario& s, bool split) {
  QOptions opt;
  opt.split = split;
  const QResult q = q_form(s.gamma, s.v, s.w, s.scheme, opt);
  VerbOutput out;
  out.doc = header(split ? "qform-split" : "qform", s);
  out.doc["value"] = q.value;
  out.doc["error"] = q.error;
  out.doc["converged"] = q.converged;
  out.doc["split"] = q.split_computed ? Json{{"q1", q.q1}, {"q2", q.q2}, {"q1_error", q.q1_error}, {"q2_error", q.q2_error}}
                                      : Json(nullptr);
  out.doc["verdicts"] = q.verdict ? to_json(*q.verdict) : to_json(IntegrabilityVerdict{});
  for (const ShellTrace& t : q.shells) {
    Trace tr;
    for (std::size_t k = 0; k < t.sums.size(); ++k) {
      tr.values.push_back(t.sums[k].front());
      tr.errors.push_back(t.errors[k].front());
    }
    out.traces["shells_" + t.label] = tr;
  }
  return out;
}

VerbOutput qform_be(const Scenario& s) {
  const QResult q = bakry_emery_q(s.gamma, parse_weight(s.config.doc.at("weight").get<std::string>(), s.metric.chart.dim), s.v, s.w, s.scheme);
  VerbOutput out;
  out.doc = header("qform-be", s);
  out.doc["value"] = q.value;
  out.doc["error"] = q.error;
  out.doc["cross_check"] = q.cross_check ? Json(*q.cross_check) : Json(nullptr);
  out.doc["weight"] = s.config.doc.at("weight");
  out.doc["verdicts"] = q.verdict ? to_json(*q.verdict) : to_json(IntegrabilityVerdict{});
  return out;
}

VerbOutput qform_kahler(const Scenario& s) {
  const KahlerResult k = kahler_q(s.metric, s.v, s.w, s.scheme);
  VerbOutput out;
  out.doc = header("qform-kahler", s);
  out.doc["value"] = {{"re", k.value.real()}, {"im", k.value.imag()}};
  out.doc["error"] = k.error;
  out.doc["cross_check"] = {{"re", k.cross_check.real()}, {"im", k.cross_check.imag()}};
  out.doc["cross_error"] = k.cross_error;
  return out;
}

VerbOutput qform_alexandrov(const Scenario& s) {
  if (!s.phi) throw UnsupportedGeometryError("scenario " + s.name + " has no conformal factor");
  const AlexandrovResult a = alexandrov_q(*s.phi, s.v, s.w, s.scheme);
  VerbOutput out;
  out.doc = header("qform-alexandrov", s);
  out.doc["value"] = a.value;
  out.doc["error"] = a.error;
  out.doc["atoms"] = a.atoms;
  out.doc["lines"] = a.lines;
  out.doc["ac"] = a.ac;
  return out;
}

VerbOutput killing(const Scenario& s) {
  const KillingResult k = killing_defect(s.metric, s.gamma, s.v, s.metric.chart.domain);
  VerbOutput out;
  out.doc = header("killing-defect", s);
  out.doc["defect"] = k.defect;
  out.doc["worst"] = to_json(k.worst);
  out.doc["points"] = k.points;
  out.doc["skipped"] = k.skipped;
  return out;
}

std::string trace_name(const std::string& prefix, std::size_t k) {
  std::string n = prefix + "_" + std::to_string(k);
  std::replace(n.begin(), n.end(), ' ', '-');
  return n;
}

VerbOutput measure(const Scenario& s) {
  const MeasureReport r = assemble_measure_report(s.gamma, s.metric.singular, s.config.measure(), s.scheme);
  VerbOutput out;
  out.doc = header("ricci-measure", s);
  Json atoms = Json::array();
  for (const AtomMass& a : r.atoms) {
    atoms.push_back({{"label", a.label},
                     {"point", to_json(a.point)},
                     {"mass_matrix", to_json(a.mass)},
                     {"ci", to_json(a.ci)},
                     {"detected", a.detected}});
    for (std::size_t k = 0; k < a.traces.size(); ++k)
      out.traces[trace_name("atom_" + a.label, k)] = Trace{a.traces[k].values, a.traces[k].errors};
  }
  Json curves = Json::array();
  for (const CurveDensity& c : r.curves) {
    Json poly = Json::array(), dens = Json::array(), ci = Json::array();
    for (const Point& p : c.points) poly.push_back(to_json(p));
    for (const Matrix& m : c.density) dens.push_back(to_json(m));
    for (const Matrix& m : c.ci) ci.push_back(to_json(m));
    curves.push_back({{"label", c.label},
                      {"polyline", poly},
                      {"densities", dens},
                      {"ci", ci},
                      {"tangential", c.tangential},
                      {"normal", c.normal},
                      {"detected", c.detected}});
    for (std::size_t k = 0; k < c.traces.size(); ++k)
      out.traces[trace_name("curve_" + c.label, k)] = Trace{c.traces[k].values, c.traces[k].errors};
  }
  Json pts = Json::array(), vals = Json::array();
  for (const Point& p : r.ac.points) pts.push_back(to_json(p));
  for (const Matrix& m : r.ac.values) vals.push_back(to_json(m));
  Json res = Json::array();
  bool ok = true;
  for (const PairingCheck& p : r.pairing) {
    res.push_back({{"q", p.q}, {"paired", p.paired}, {"residual", p.residual}, {"scale", p.scale}, {"ok", p.ok}});
    ok = ok && p.ok;
  }
  out.doc["atoms"] = atoms;
  out.doc["curves"] = curves;
  out.doc["ac_grid"] = {{"points", pts}, {"values", vals}, {"skipped", r.ac.skipped}};
  out.doc["checks"] = {{"pairing_residual", res}, {"pass", ok}};
  out.status = ok ? 0 : 2;
  return out;
}

VerbOutput flow(const Scenario& s, bool check) {
  const std::vector<double> ts = s.config.times();
  const TimeDependentField v = constant_in_time(s.v, "v"), w = constant_in_time(s.w, "w");
  const std::string mode = s.config.doc.at("flow").at("mode").get<std::string>();
  FlowOptions opt;
  opt.space = s.scheme;
  opt.time_order = s.config.doc.at("flow").at("time_order").get<int>();
  FlowCheck c;
  if (check && mode == "cone-preserving") {
    c = cone_preserving_flow_check(*s.flow, {{v, w}}, ts, opt);
  } else if (check) {
    c = tame_flow_check(*s.flow, {{v, w}}, ts, opt);
  } else {
    for (double t : ts) {
      FlowCheckEntry e{0, flow_identity_residual(*s.flow, v, w, t, opt), false};
      e.pass = e.residual.passes();
      c.pass = c.pass && e.pass;
      c.entries.push_back(e);
    }
  }
  VerbOutput out;
  out.doc = header(check ? "flow-check" : "flow-residual", s);
  out.doc["mode"] = check ? mode : "residual";
  out.doc["times"] = ts;
  Json residuals = Json::array(), parts = Json::array();
  Trace tr;
  for (const FlowCheckEntry& e : c.entries) {
    residuals.push_back(e.residual.residual);
    parts.push_back(breakdown(e.pair, e.residual));
    tr.values.push_back(e.residual.residual);
    tr.errors.push_back(e.residual.error);
  }
  out.doc["residuals"] = residuals;
  out.doc["breakdown"] = parts;
  out.doc["gated_out"] = c.gated_out;
  out.doc["verdict"] = c.pass ? "PASS" : "FAIL";
  out.traces["residual"] = tr;
  out.status = c.pass ? 0 : 2;
  return out;
}

VerbOutput gate(const Scenario& s) {
  VerbOutput out;
  out.doc = header("sobolev-gate", s);
  Json fields = Json::array();
  bool all = true;
  for (const auto& [label, f] : {std::pair<const char*, const HalfDensityField*>{"v", &s.v}, {"w", &s.w}}) {
    const SobolevGate g = sobolev_gate(s.gamma, *f, s.scheme);
    fields.push_back({{"label", label}, {"finite", g.finite}, {"value", g.value}, {"verdict", to_string(g.verdict)}});
    all = all && g.finite;
  }
  out.doc["fields"] = fields;
  out.doc["finite"] = all;
  out.status = all ? 0 : 2;
  return out;
}

}  // namespace

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"run",          "list",           "qform",       "qform-split",
                                          "qform-be",     "qform-kahler",   "qform-alexandrov",
                                          "killing-defect", "ricci-measure", "flow-check", "flow-residual",
                                          "sobolev-gate"};
  return v;
}

VerbOutput run_verb(const std::string& verb, const std::string& scenario, const RunConfig& config) {
  const Scenario s = build_scenario(scenario, config);
  if (verb == "qform") return qform(s, false);
  if (verb == "qform-split") return qform(s, true);
  if (verb == "qform-be") return qform_be(s);
  if (verb == "qform-kahler") return qform_kahler(s);
  if (verb == "qform-alexandrov") return qform_alexandrov(s);
  if (verb == "killing-defect") return killing(s);
  if (verb == "ricci-measure") return measure(s);
  if (verb == "flow-check") return flow(s, true);
  if (verb == "flow-residual") return flow(s, false);
  if (verb == "sobolev-gate") return gate(s);
  throw ConfigError("verb", "unknown verb '" + verb + "'");
}

}  // namespace ricci
