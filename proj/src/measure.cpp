#include "ricci/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ricci {

std::vector<double> Ladder::scales() const {
  if (!(eps0 > 0)) throw ConfigError("measure.ladder.eps0", "must be positive");
  if (rungs < 3) throw ConfigError("measure.ladder.rungs", "need at least 3 rungs");
  std::vector<double> e(rungs);
  for (int k = 0; k < rungs; ++k) e[k] = std::ldexp(eps0, -k);
  return e;
}

Extraction extrapolate_ladder(LadderTrace trace, double tol) {
  Extraction ex;
  const auto& q = trace.values;
  const std::size_t K = q.size();
  double qerr = 0.0;
  for (double e : trace.errors) qerr = std::max(qerr, e);
  const double slack = tol + 2.0 * qerr;
  std::vector<double> d;
  for (std::size_t k = 1; k < K; ++k) d.push_back(q[k] - q[k - 1]);
  // Cauchy: each difference is no larger than the previous one (up to noise),
  // and the last is smaller than the first.
  bool cauchy = true;
  for (std::size_t k = 1; k < d.size(); ++k) cauchy = cauchy && std::abs(d[k]) <= std::abs(d[k - 1]) * 1.05 + slack;
  if (d.size() >= 2) cauchy = cauchy && (std::abs(d.back()) <= 0.75 * std::abs(d.front()) + slack);
  ex.detected = cauchy;
  if (!cauchy) {
    ex.value = 0.0;
    ex.ci = std::numeric_limits<double>::infinity();
    ex.trace = std::move(trace);
    return ex;
  }
  const double d1 = d[d.size() - 2], d2 = d.back();
  const double den = d2 - d1;
  double m = q.back();
  if (std::abs(d2) > slack && std::abs(den) > 1e-14 * std::abs(q.back()) && std::abs(den) > 0) {
    const double rho = d2 / d1;
    if (rho > -1.0 && rho < 1.0) m = q.back() - d2 * d2 / den;
  }
  ex.value = m;
  ex.ci = std::abs(m - q.back()) + std::abs(d2) * 0.1 + slack;
  ex.trace = std::move(trace);
  return ex;
}

namespace {

IntegrabilityVerdict verdict_for(const ChristoffelField& gamma, const QuadratureScheme& scheme,
                                 const IntegrabilityVerdict* given) {
  if (given) return *given;
  if (gamma.singular.empty()) return {};
  const IntegrabilityVerdict v = integrability_diagnostic(gamma, scheme, &gamma.chart.domain);
  if (!v.tame()) throw TamenessViolationError(v, "measure extraction");
  return v;
}

double ladder_tol(const QuadratureScheme& scheme, double scale) {
  return std::max(10.0 * scheme.abs_tol, 1e-6 * scale);
}

}  // namespace

Extraction singular_mass_at(const ChristoffelField& gamma, const Point& x0, const Vec& a, const Vec& b,
                            const Ladder& ladder, const QuadratureScheme& scheme,
                            const IntegrabilityVerdict* verdict) {
  const IntegrabilityVerdict v = verdict_for(gamma, scheme, verdict);
  QOptions opt;
  opt.split = false;
  opt.verdict = &v;
  LadderTrace tr;
  tr.label = "atom@" + format_point(x0);
  double scale = 0.0;
  for (double eps : ladder.scales()) {
    const HalfDensityField va = radial_cutoff(gamma.chart, x0, eps, a);
    const HalfDensityField wb = radial_cutoff(gamma.chart, x0, eps, b);
    const QResult q = q_form(gamma, va, wb, scheme, opt);
    tr.eps.push_back(eps);
    tr.values.push_back(q.value);
    tr.errors.push_back(q.error);
    scale = std::max(scale, std::abs(q.value));
  }
  return extrapolate_ladder(std::move(tr), ladder_tol(scheme, scale));
}

namespace {

std::size_t free_axis(const Stratum& s) {
  if (s.kind != StratumKind::curve) throw UnsupportedGeometryError("curve density needs a curve stratum");
  const auto axis = s.curve_axis();
  if (!axis) throw UnsupportedGeometryError("curve '" + s.label + "' is not an axis-aligned line");
  return *axis;
}

}  // namespace

CurveDensity curve_density_along(const ChristoffelField& gamma, const Stratum& curve, const CurveOptions& opt,
                                 const Ladder& ladder, const QuadratureScheme& scheme,
                                 const IntegrabilityVerdict* verdict) {
  const IntegrabilityVerdict v = verdict_for(gamma, scheme, verdict);
  const std::size_t n = gamma.chart.dim;
  const std::size_t ax = free_axis(curve);
  if (opt.samples < 1) throw ConfigError("measure.curve.samples", "must be at least 1");
  if (!(opt.outer > opt.inner) || opt.inner < 0) throw ConfigError("measure.curve.outer", "need outer > inner >= 0");
  const Box& dom = gamma.chart.domain;
  double lo = dom.lo[ax], hi = dom.hi[ax];
  if (!curve.polyline.empty()) {
    lo = std::max(lo, std::min(curve.polyline.front()[ax], curve.polyline.back()[ax]));
    hi = std::min(hi, std::max(curve.polyline.front()[ax], curve.polyline.back()[ax]));
  }
  lo += opt.outer;
  hi -= opt.outer;
  if (!(hi >= lo)) throw ConfigError("measure.curve.outer", "along-curve bump does not fit on the curve");

  QOptions qopt;
  qopt.split = false;
  qopt.verdict = &v;
  CurveDensity out;
  out.label = curve.label;
  out.along_axis = ax;
  const std::size_t nor = curve.constrained_axes.front();
  for (int j = 0; j < opt.samples; ++j) {
    const double s = opt.samples == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * j / (opt.samples - 1.0);
    Point p = curve.anchor;
    p[ax] = s;
    const PlateauProfile eta{s, opt.inner, opt.outer};
    double norm = 0.0;
    const double eta2 = integrate_1d([&](double t) { return std::pow(eta.value(t), 2); }, s - opt.outer, s + opt.outer,
                                     scheme, {s - opt.inner, s + opt.inner}, &norm);
    Matrix dens(n), ci(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t l = k; l < n; ++l) {
        if (!opt.full && !(k == l && (k == ax || k == nor))) continue;
        LadderTrace tr;
        tr.label = curve.label + "@" + format_point(p) + "[" + std::to_string(k) + std::to_string(l) + "]";
        double scale = 0.0;
        for (double eps : ladder.scales()) {
          const HalfDensityField a = tube_cutoff(gamma.chart, curve, eps, ax, eta, Vec::unit(n, k));
          const HalfDensityField b = tube_cutoff(gamma.chart, curve, eps, ax, eta, Vec::unit(n, l));
          const QResult q = q_form(gamma, a, b, scheme, qopt);
          tr.eps.push_back(eps);
          tr.values.push_back(q.value / eta2);
          tr.errors.push_back(q.error / eta2);
          scale = std::max(scale, std::abs(q.value / eta2));
        }
        Extraction ex = extrapolate_ladder(std::move(tr), ladder_tol(scheme, scale));
        out.detected = out.detected && ex.detected;
        dens(k, l) = dens(l, k) = ex.value;
        ci(k, l) = ci(l, k) = ex.ci;
        out.traces.push_back(std::move(ex.trace));
      }
    const Matrix g0 = opt.background ? opt.background(p) : Matrix::identity(n);
    out.points.push_back(p);
    out.tangential.push_back(dens(ax, ax) / g0(ax, ax));
    out.normal.push_back(dens(nor, nor) / g0(nor, nor));
    out.density.push_back(dens);
    out.ci.push_back(ci);
  }
  return out;
}

namespace {

// FD step for R_(kl) at x: shrinks with the distance to the strata so the
// stencil never straddles one; 0 inside an exclusion radius.
double local_step(const ChristoffelField& gamma, const Point& x, double h) {
  double step = h;
  for (const Stratum& s : gamma.singular.strata) {
    const double d = s.distance(x);
    if (d < s.exclusion_radius) return 0.0;
    step = std::min(step, 0.05 * d);
  }
  return step;
}

}  // namespace

AcGrid ac_density_grid(const ChristoffelField& gamma, const Box& box, int samples, bool skip_singular) {
  if (samples < 1) throw ConfigError("measure.grid", "must be at least 1");
  const std::size_t n = box.dim();
  const double h = default_fd_step(gamma.chart);
  AcGrid g;
  std::vector<int> idx(n, 0);
  while (true) {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * (idx[a] + 0.5) / samples;
    const double step = local_step(gamma, x, h);
    if (step == 0.0) {
      if (!skip_singular) throw SingularEvaluationError(x);
      ++g.skipped;
    } else {
      g.points.push_back(x);
      g.values.push_back(symmetrized_ricci(gamma, x, step));
    }
    std::size_t a = 0;
    while (a < n && ++idx[a] == samples) idx[a++] = 0;
    if (a == n) break;
  }
  return g;
}

double pair_with_report(const MeasureReport& r, const ChristoffelField& gamma, const HalfDensityField& v,
                        const HalfDensityField& w, const QuadratureScheme& scheme, double* variation) {
  double total = 0.0, var = 0.0;
  for (const AtomMass& a : r.atoms) {
    const double t = a.mass.bilinear(v.value(a.point), w.value(a.point));
    total += t;
    var += std::abs(t);
  }
  for (const CurveDensity& c : r.curves) {
    if (c.points.empty()) continue;
    const std::size_t ax = c.along_axis;
    // Piecewise-linear density between samples, held constant past the ends.
    auto density_at = [&c, ax](double s) {
      if (c.points.size() == 1 || s <= c.points.front()[ax]) return c.density.front();
      if (s >= c.points.back()[ax]) return c.density.back();
      std::size_t j = 1;
      while (c.points[j][ax] < s) ++j;
      const double t = (s - c.points[j - 1][ax]) / (c.points[j][ax] - c.points[j - 1][ax]);
      return (1.0 - t) * c.density[j - 1] + t * c.density[j];
    };
    const Box b = pairing_box(v, w);
    Point base = c.points.front();
    bool inside = true;
    for (std::size_t a = 0; a < base.size(); ++a)
      if (a != ax) inside = inside && base[a] >= b.lo[a] && base[a] <= b.hi[a];
    if (!inside || b.empty()) continue;
    std::vector<double> br;
    const Breakpoints all = merge_breakpoints(v.breaks, w.breaks);
    if (ax < all.size()) br = all[ax];
    auto at = [&](double s) {
      Point x = base;
      x[ax] = s;
      return density_at(s).bilinear(v.value(x), w.value(x));
    };
    total += integrate_1d(at, b.lo[ax], b.hi[ax], scheme, br);
    var += integrate_1d([&](double s) { return std::abs(at(s)); }, b.lo[ax], b.hi[ax], scheme, br);
  }
  const Box b = pairing_box(v, w);
  if (!b.empty()) {
    const double h = default_fd_step(gamma.chart);
    Integrand f{2, [&](const Point& x, std::span<double> out) {
                  const double step = local_step(gamma, x, h);
                  if (step == 0.0) {
                    out[0] = out[1] = 0.0;
                    return;
                  }
                  const Matrix r = symmetrized_ricci(gamma, x, step);
                  const Vec vx = v.value(x), wx = w.value(x);
                  out[0] = r.bilinear(vx, wx);
                  out[1] = r.frobenius() * vx.norm() * wx.norm();
                }};
    const IntegralResult ir =
        integrate(f, b, scheme, gamma.singular.restricted_to(b), merge_breakpoints(v.breaks, w.breaks));
    total += ir.values[0];
    var += ir.values[1];
  }
  if (variation) *variation = var;
  return total;
}

namespace {

HalfDensityField random_global_field(const Chart& chart, std::mt19937& rng) {
  const std::size_t n = chart.dim;
  const Box& d = chart.domain;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Point c(n);
  Vec coef(n), inner(n), outer(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double half = 0.5 * (d.hi[a] - d.lo[a]);
    c[a] = d.center()[a] + 0.1 * half * u(rng);
    outer[a] = 0.8 * half;
    inner[a] = 0.4 * half;
    coef[a] = u(rng);
  }
  BumpSpec s{c, inner, outer, coef, Matrix(n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.linear(i, j) = 0.5 * u(rng);
  return plateau_bump(chart, s);
}

}  // namespace

MeasureReport assemble_measure_report(const ChristoffelField& gamma, const SingularSet& singular,
                                      const MeasureConfig& config, const QuadratureScheme& scheme) {
  const IntegrabilityVerdict v = verdict_for(gamma, scheme, nullptr);
  const std::size_t n = gamma.chart.dim;
  MeasureReport r;
  for (const Stratum& s : singular.strata) {
    if (s.kind == StratumKind::point) {
      AtomMass a;
      a.label = s.label;
      a.point = s.anchor;
      a.mass = Matrix(n);
      a.ci = Matrix(n);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k; l < n; ++l) {
          Extraction ex = singular_mass_at(gamma, s.anchor, Vec::unit(n, k), Vec::unit(n, l), config.ladder, scheme, &v);
          a.mass(k, l) = a.mass(l, k) = ex.value;
          a.ci(k, l) = a.ci(l, k) = ex.ci;
          a.detected = a.detected && ex.detected;
          a.traces.push_back(std::move(ex.trace));
        }
      r.atoms.push_back(std::move(a));
    } else if (s.kind == StratumKind::curve) {
      r.curves.push_back(curve_density_along(gamma, s, config.curve, config.ladder, scheme, &v));
    } else {
      throw UnsupportedGeometryError("measure extraction on hyperplane strata is not supported");
    }
  }
  r.ac = ac_density_grid(gamma, gamma.chart.domain, config.grid, true);

  std::mt19937 rng(config.seed);
  QOptions opt;
  opt.split = false;
  opt.verdict = &v;
  for (int i = 0; i < config.pairs; ++i) {
    const HalfDensityField a = random_global_field(gamma.chart, rng);
    const HalfDensityField b = random_global_field(gamma.chart, rng);
    PairingCheck pc;
    pc.q = q_form(gamma, a, b, scheme, opt).value;
    double var = 0.0;
    pc.paired = pair_with_report(r, gamma, a, b, scheme, &var);
    pc.residual = pc.q - pc.paired;
    pc.scale = std::abs(pc.q) + var;
    pc.ok = std::abs(pc.residual) <= config.pairing_tol * pc.scale + 10.0 * scheme.abs_tol;
    r.pairing.push_back(pc);
  }
  return r;
}

}  // namespace ricci
