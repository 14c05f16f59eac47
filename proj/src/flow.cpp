#include "ricci/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace ricci {

TimeDependentField constant_in_time(const HalfDensityField& v, std::string label) {
  TimeDependentField f;
  f.label = std::move(label);
  f.at = [v](double) { return v; };
  f.lipschitz = v.lipschitz;
  f.support = v.compact ? v.support : v.chart.domain;
  return f;
}

double FlowResidual::scale() const { return std::max(std::abs(lhs), std::abs(rhs)); }
double FlowResidual::tolerance() const { return std::max(1e-6, 1e-3 * scale()); }
bool FlowResidual::passes() const { return std::abs(residual) <= tolerance(); }

SliceTamenessError::SliceTamenessError(double t, IntegrabilityVerdict v)
    : TamenessViolationError(std::move(v), "slice t=" + std::to_string(t)), time(t) {}

namespace {

Box field_box(const TimeDependentField& v, const TimeDependentField& w, const Chart& chart) {
  return chart.domain.intersect(v.support).intersect(w.support);
}

double metric_pairing(const MetricField& g, const HalfDensityField& v, const HalfDensityField& w,
                      const QuadratureScheme& scheme, double* err) {
  const Box box = pairing_box(v, w);
  if (box.empty()) return 0.0;
  const IntegralResult r = integrate(
      scalar_integrand([&](const Point& x) { return g.eval(x).bilinear(v.value(x), w.value(x)); }), box, scheme,
      g.singular.restricted_to(box), merge_breakpoints(v.breaks, w.breaks));
  if (err) *err += r.error;
  return r.value;
}

struct Slice {
  double dv = 0.0, dw = 0.0, q = 0.0, err = 0.0;
};

class SliceEvaluator {
public:
  SliceEvaluator(const TimeDependentMetric& g, const TimeDependentField& v, const TimeDependentField& w,
                 const FlowOptions& opt)
      : g_(g), v_(v), w_(w), opt_(opt), constant_(g.is_static && !v.dt && !w.dt) {}

  Slice operator()(double s) {
    if (constant_) s = -1.0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(s);
      if (it != cache_.end()) return it->second;
    }
    const Slice r = compute(s);
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(s, r);
    return r;
  }
  std::size_t slices() const { return cache_.size(); }

private:
  Slice compute(double s) {
    s = std::max(s, 0.0);
    const MetricField gs = g_.at(s);
    const ChristoffelField gamma = christoffel_from_metric(gs);
    const HalfDensityField vs = v_.at(s), ws = w_.at(s);
    const Box box = field_box(v_, w_, gs.chart);
    Slice out;
    if (box.empty()) return out;
    const SingularSet sing = gamma.singular.restricted_to(box);
    if (opt_.check_tameness && !sing.empty()) {
      if (!verdict_ || !g_.is_static) verdict_ = integrability_diagnostic(gamma, opt_.space, &box);
      if (!verdict_->tame()) throw SliceTamenessError(s, *verdict_);
    }
    std::optional<HalfDensityField> dvs, dws;
    if (v_.dt) dvs = v_.dt(s);
    if (w_.dt) dws = w_.dt(s);
    Integrand f{3, [&](const Point& x, std::span<double> o) {
                  const Vec vx = vs.value(x), wx = ws.value(x);
                  const Matrix gx = (dvs || dws) ? gs.eval(x) : Matrix();
                  o[0] = dvs ? gx.bilinear(dvs->value(x), wx) : 0.0;
                  o[1] = dws ? gx.bilinear(vx, dws->value(x)) : 0.0;
                  o[2] = -2.0 * q_integrand(gamma.at(x), vx, vs.derivative(x), wx, ws.derivative(x)).direct;
                }};
    Breakpoints br = merge_breakpoints(vs.breaks, ws.breaks);
    if (dvs) br = merge_breakpoints(br, dvs->breaks);
    if (dws) br = merge_breakpoints(br, dws->breaks);
    const IntegralResult r = integrate(f, box, opt_.space, sing, br);
    out.dv = r.values[0];
    out.dw = r.values[1];
    out.q = r.values[2];
    out.err = r.errors[0] + r.errors[1] + r.errors[2];
    return out;
  }

  const TimeDependentMetric& g_;
  const TimeDependentField& v_;
  const TimeDependentField& w_;
  const FlowOptions& opt_;
  bool constant_;
  std::optional<IntegrabilityVerdict> verdict_;
  std::map<double, Slice> cache_;
  std::mutex mu_;
};

}  // namespace

FlowResidual flow_identity_residual(const TimeDependentMetric& g, const TimeDependentField& v,
                                    const TimeDependentField& w, double t, const FlowOptions& opt, double t0) {
  if (!(t >= 0.0) || !(t < g.T)) throw ConfigError("flow.t", "time " + std::to_string(t) + " outside [0, T)");
  if (!(t0 >= 0.0) || !(t0 <= t)) throw ConfigError("flow.t0", "start time must lie in [0, t]");
  FlowResidual r;
  r.t0 = t0;
  r.t = t;
  double err = 0.0;
  r.lhs = metric_pairing(g.at(t), v.at(t), w.at(t), opt.space, &err);
  r.initial = metric_pairing(g.at(t0), v.at(t0), w.at(t0), opt.space, &err);

  SliceEvaluator slice(g, v, w, opt);
  QuadratureScheme ts;
  ts.order = opt.time_order;
  ts.rel_tol = opt.time_rel_tol;
  ts.abs_tol = opt.time_abs_tol;
  ts.max_depth = 12;
  ts.validate();
  double max_slice_err = 0.0;
  auto component = [&](int c) {
    double e = 0.0;
    const double val = t > t0 ? integrate_1d(
                                     [&](double s) {
                                       const Slice sl = slice(s);
                                       max_slice_err = std::max(max_slice_err, sl.err);
                                       return c == 0 ? sl.dv : c == 1 ? sl.dw : sl.q;
                                     },
                                     t0, t, ts, {}, &e)
                               : 0.0;
    err += e;
    return val;
  };
  r.q_term = component(2);
  r.dv_term = v.dt ? component(0) : 0.0;
  r.dw_term = w.dt ? component(1) : 0.0;
  err += (t - t0) * max_slice_err;
  r.rhs = r.initial + r.dv_term + r.dw_term + r.q_term;
  r.residual = r.initial + r.dv_term + r.dw_term + r.q_term - r.lhs;
  r.error = err;
  r.slices = slice.slices();
  return r;
}

FlowCheck tame_flow_check(const TimeDependentMetric& g, const std::vector<FieldPair>& suite,
                          const std::vector<double>& times, const FlowOptions& opt) {
  FlowCheck c;
  for (std::size_t i = 0; i < suite.size(); ++i)
    for (double t : times) {
      FlowCheckEntry e;
      e.pair = i;
      e.residual = flow_identity_residual(g, suite[i].v, suite[i].w, t, opt);
      e.pass = e.residual.passes();
      c.pass = c.pass && e.pass;
      c.entries.push_back(e);
    }
  return c;
}

SobolevGate sobolev_gate(const ChristoffelField& gamma, const HalfDensityField& v, const QuadratureScheme& scheme) {
  SobolevGate out;
  const Box box = pairing_box(v, v);
  if (box.empty()) return out;
  const std::size_t n = gamma.chart.dim;
  const IntegralResult r = integrate(scalar_integrand([&](const Point& x) {
                                       const Matrix d = covariant_derivative_kernel(gamma.at(x), v.value(x),
                                                                                    v.derivative(x));
                                       double s = 0.0;
                                       for (std::size_t i = 0; i < n; ++i)
                                         for (std::size_t j = 0; j < n; ++j) s += d(i, j) * d(i, j);
                                       return s;
                                     }),
                                     box, scheme, gamma.singular.restricted_to(box), v.breaks);
  out.value = r.value;
  for (const ShellTrace& sh : r.shells) {
    std::vector<double> sums;
    for (const auto& row : sh.sums) sums.push_back(row[0]);
    out.verdict = worst(out.verdict, fit_shells(sums, sh.ratio, scheme.abs_tol).verdict);
  }
  out.finite = out.verdict == Verdict::converges;
  return out;
}

FlowCheck cone_preserving_flow_check(const TimeDependentMetric& g, const std::vector<FieldPair>& suite,
                                     const std::vector<double>& times, const FlowOptions& opt) {
  std::vector<double> slice_times{0.0};
  for (double t : times) slice_times.push_back(t);
  std::map<std::string, bool> gate;
  auto gated = [&](const TimeDependentField& f) {
    auto it = gate.find(f.label);
    if (it != gate.end()) return it->second;
    bool ok = true;
    for (double t : slice_times) {
      ok = ok && sobolev_gate(christoffel_from_metric(g.at(t)), f.at(t), opt.space).finite;
      if (g.is_static && !f.dt) break;
    }
    gate[f.label] = ok;
    return ok;
  };
  FlowCheck c;
  std::vector<FieldPair> kept;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const bool a = gated(suite[i].v), b = gated(suite[i].w);
    if (!a) c.gated_out.push_back(suite[i].v.label);
    if (!b) c.gated_out.push_back(suite[i].w.label);
    if (a && b) {
      kept.push_back(suite[i]);
      index.push_back(i);
    }
  }
  std::sort(c.gated_out.begin(), c.gated_out.end());
  c.gated_out.erase(std::unique(c.gated_out.begin(), c.gated_out.end()), c.gated_out.end());
  FlowCheck inner = tame_flow_check(g, kept, times, opt);
  for (FlowCheckEntry& e : inner.entries) e.pair = index[e.pair];
  c.entries = std::move(inner.entries);
  c.pass = inner.pass;
  return c;
}

double lipschitz_distance(const TimeDependentMetric& a, const TimeDependentMetric& b, const std::vector<double>& times,
                          const Box& box, int samples) {
  const std::size_t n = box.dim();
  const double h = 1e-4 * box.diagonal();
  double worst = 0.0;
  for (double t : times) {
    const MetricField ga = a.at(t), gb = b.at(t);
    std::vector<int> idx(n, 0);
    while (true) {
      Point x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * (idx[k] + 0.5) / samples;
      const double d0 = (ga.eval(x) - gb.eval(x)).max_abs();
      const Rank3 da = ga.d_eval ? ga.d_eval(x) : metric_derivative_fd(ga.eval, x, h, true);
      const Rank3 db = gb.d_eval ? gb.d_eval(x) : metric_derivative_fd(gb.eval, x, h, true);
      double d1 = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) d1 = std::max(d1, std::abs(da(i, j, k) - db(i, j, k)));
      worst = std::max(worst, d0 + d1);
      std::size_t k = 0;
      while (k < n && ++idx[k] == samples) idx[k++] = 0;
      if (k == n) break;
    }
  }
  return worst;
}

LipschitzLimitReport lipschitz_limit_stability(const std::vector<TimeDependentMetric>& family,
                                               const TimeDependentMetric& limit, const std::vector<FieldPair>& suite,
                                               const std::vector<double>& times, const FlowOptions& opt) {
  LipschitzLimitReport rep;
  auto worst_of = [](const FlowCheck& c, double* tol) {
    double w = 0.0;
    for (const FlowCheckEntry& e : c.entries)
      if (std::abs(e.residual.residual) >= w) {
        w = std::abs(e.residual.residual);
        if (tol) *tol = e.residual.tolerance();
      }
    return w;
  };
  const FlowCheck lc = tame_flow_check(limit, suite, times, opt);
  rep.limit_residual = worst_of(lc, &rep.limit_tolerance);
  rep.limit_pass = lc.pass;
  const Box box = limit.at(0.0).chart.domain;
  for (const TimeDependentMetric& m : family) {
    const FlowCheck c = tame_flow_check(m, suite, times, opt);
    rep.precondition = rep.precondition && c.pass;
    const double r = worst_of(c, nullptr);
    const double d = lipschitz_distance(m, limit, times, box);
    rep.residuals.push_back(r);
    rep.distances.push_back(d);
    if (d > 0) rep.constant = std::max(rep.constant, std::max(0.0, r - rep.limit_tolerance) / d);
  }
  return rep;
}

// ---------------------------------------------------------------- built-ins

TimeDependentMetric static_flow(const MetricField& g) {
  TimeDependentMetric f;
  f.name = "static:" + g.name;
  f.at = [g](double) { return g; };
  f.T = std::numeric_limits<double>::infinity();
  f.dt = [n = g.chart.dim](double, const Point&) { return Matrix(n); };
  f.is_static = true;
  return f;
}

TimeDependentMetric shrinking_sphere(double r0, const Box& box) {
  if (!(r0 > 0)) throw ConfigError("flow.r0", "must be positive");
  TimeDependentMetric f;
  f.name = "shrinking-sphere";
  f.T = 0.5 * r0 * r0;
  f.at = [r0, box](double t) { return sphere_chart(std::sqrt(r0 * r0 - 2.0 * t), box); };
  f.dt = [](double, const Point& x) {
    const double q = 1.0 + x.dot(x);
    return Matrix(2, -8.0 / (q * q));
  };
  f.lower_bound = [](double) { return 0.0; };
  f.lower_bound_declared = true;
  return f;
}

TimeDependentMetric pulled_back_sphere(double r0, const ChartMap& map, const Box& box) {
  TimeDependentMetric f = shrinking_sphere(r0, box);
  f.name = "pulled-back-sphere";
  f.at = [r0, map, box](double t) {
    return pullback(sphere_chart(std::sqrt(r0 * r0 - 2.0 * t), default_box(2, 10.0)), map, box);
  };
  f.dt = nullptr;
  return f;
}

TimeDependentMetric static_cone(double alpha, const Box& box) {
  TimeDependentMetric f = static_flow(cone(2, alpha, box));
  f.name = "static-cone";
  if (alpha >= 0) {
    f.lower_bound = [](double) { return 0.0; };
    f.lower_bound_declared = true;
  }
  return f;
}

TimeDependentMetric static_mollified_cone(double alpha, double delta, const Box& box) {
  TimeDependentMetric f = static_flow(conformal(phi_mollified_cone(alpha, delta), box));
  f.name = "static-mollified-cone";
  return f;
}

}  // namespace ricci
