#include "ricci/qform.hpp"

#include <algorithm>
#include <cmath>

namespace ricci {

QIntegrand q_integrand(const Christoffel& g, const Vec& v, const Matrix& dv, const Vec& w, const Matrix& dw) {
  const std::size_t n = v.size();
  const Matrix Dv = covariant_derivative_kernel(g, v, dv);
  const Matrix Dw = covariant_derivative_kernel(g, w, dw);
  QIntegrand q;
  double cross = 0.0, dcross = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      cross += Dv(i, j) * Dw(j, i);
      dcross += dv(i, j) * dw(j, i);
    }
  q.direct = Dv.trace() * Dw.trace() - cross;
  const double divv = dv.trace(), divw = dw.trace();
  q.dd = divv * divw - dcross;

  Vec tau(n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i) tau[l] += g(i, i, l);
  const double tv = tau.dot(v), tw = tau.dot(w);
  double q1 = 0.5 * divv * tw + 0.5 * tv * divw;
  double q2 = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      q1 += 0.5 * v[k] * tau[l] * dw(k, l) + 0.5 * dv(l, k) * tau[k] * w[l];
      double quad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        q1 -= dv(i, k) * g(i, k, l) * w[l] + v[k] * g(i, k, l) * dw(i, l);
        quad += g(i, k, l) * tau[i];
        for (std::size_t j = 0; j < n; ++j) quad -= g(j, k, i) * g(i, l, j);
      }
      q2 += v[k] * quad * w[l];
    }
  q.q1 = q1;
  q.q2 = q2;
  return q;
}

Box pairing_box(const HalfDensityField& v, const HalfDensityField& w) {
  Box b = v.chart.domain;
  if (v.compact) b = b.intersect(v.support);
  if (w.compact) b = b.intersect(w.support);
  return b;
}

namespace {

void check_same_chart(const ChristoffelField& g, const HalfDensityField& v) {
  if (g.chart.dim != v.chart.dim) throw ChartMismatchError("field and connection live on charts of different dimension");
}

std::optional<IntegrabilityVerdict> tameness(const ChristoffelField& gamma, const SingularSet& sing, const Box& box,
                                             const QuadratureScheme& scheme, const QOptions& opt) {
  if (sing.empty() || !opt.check_tameness) return std::nullopt;
  IntegrabilityVerdict v = opt.verdict ? *opt.verdict : integrability_diagnostic(gamma, scheme, &box);
  if (!v.tame()) throw TamenessViolationError(v, "Christoffel data on the test-field support");
  return v;
}

}  // namespace

QResult q_form(const ChristoffelField& gamma, const HalfDensityField& v, const HalfDensityField& w,
               const QuadratureScheme& scheme, const QOptions& opt) {
  check_same_chart(gamma, v);
  check_same_chart(gamma, w);
  QResult res;
  const Box box = pairing_box(v, w);
  if (box.empty()) {
    res.converged = true;
    res.split_computed = opt.split;
    return res;
  }
  const SingularSet sing = gamma.singular.restricted_to(box);
  res.verdict = tameness(gamma, sing, box, scheme, opt);
  res.fd_fallback = v.uses_fd() || w.uses_fd();
  Integrand f{opt.split ? 3u : 1u, [&](const Point& x, std::span<double> out) {
                const QIntegrand q = q_integrand(gamma.at(x), v.value(x), v.derivative(x), w.value(x), w.derivative(x));
                out[0] = q.direct;
                if (out.size() > 1) {
                  out[1] = q.q1;
                  out[2] = q.q2;
                }
              }};
  const IntegralResult r = integrate(f, box, scheme, sing, merge_breakpoints(v.breaks, w.breaks));
  res.value = r.values[0];
  res.error = r.errors[0];
  res.converged = r.converged;
  res.cells = r.cells;
  res.shells = r.shells;
  if (opt.split) {
    res.split_computed = true;
    res.q1 = r.values[1];
    res.q1_error = r.errors[1];
    res.q2 = r.values[2];
    res.q2_error = r.errors[2];
  }
  return res;
}

Matrix symmetrized_ricci(const ChristoffelField& gamma, const Point& x, double h) {
  const std::size_t n = x.size();
  std::vector<Rank3> d(n);
  for (std::size_t a = 0; a < n; ++a) {
    auto central = [&](double s) {
      Point p = x, m = x;
      p[a] += s;
      m[a] -= s;
      return (1.0 / (2.0 * s)) * (gamma.at(p) - gamma.at(m));
    };
    d[a] = (1.0 / 3.0) * (4.0 * central(0.5 * h) - central(h));
  }
  const Christoffel g = gamma.at(x);
  Vec tau(n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t i = 0; i < n; ++i) tau[l] += g(i, i, l);
  Matrix r(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += d[i](i, k, l) - 0.5 * d[k](i, i, l) - 0.5 * d[l](i, i, k);
        s += g(i, k, l) * tau[i];
        for (std::size_t j = 0; j < n; ++j) s -= g(j, k, i) * g(i, l, j);
      }
      r(k, l) = s;
    }
  return r;
}

QResult smooth_ricci_oracle(const ChristoffelField& gamma, const HalfDensityField& v, const HalfDensityField& w,
                            const QuadratureScheme& scheme) {
  check_same_chart(gamma, v);
  const Box box = pairing_box(v, w);
  for (const Stratum& s : gamma.singular.strata)
    if (s.intersects(box, s.exclusion_radius))
      throw OracleIneligibleError("stratum '" + s.label + "' meets the test-field supports");
  QResult res;
  if (box.empty()) {
    res.converged = true;
    return res;
  }
  const double h = default_fd_step(gamma.chart);
  const IntegralResult r = integrate(scalar_integrand([&](const Point& x) {
                                       return symmetrized_ricci(gamma, x, h).bilinear(v.value(x), w.value(x));
                                     }),
                                     box, scheme, {}, merge_breakpoints(v.breaks, w.breaks));
  res.value = r.value;
  res.error = r.error;
  res.converged = r.converged;
  res.cells = r.cells;
  return res;
}

// ---------------------------------------------------------------- Bakry-Emery

Vec WeightFunction::gradient(const Point& x) const {
  if (grad) return grad(x);
  Vec g(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) {
    auto central = [&](double s) {
      Point p = x, m = x;
      p[a] += s;
      m[a] -= s;
      return (f(p) - f(m)) / (2.0 * s);
    };
    g[a] = (4.0 * central(0.5 * fd_step) - central(fd_step)) / 3.0;
  }
  return g;
}

Matrix WeightFunction::hess(const Point& x) const {
  if (hessian) return hessian(x);
  const std::size_t n = x.size();
  Matrix h(n);
  for (std::size_t a = 0; a < n; ++a) {
    auto central = [&](double s) {
      Point p = x, m = x;
      p[a] += s;
      m[a] -= s;
      return (1.0 / (2.0 * s)) * (gradient(p) - gradient(m));
    };
    const Vec d = (1.0 / 3.0) * (4.0 * central(0.5 * fd_step) - central(fd_step));
    for (std::size_t b = 0; b < n; ++b) h(a, b) = d[b];
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) h(a, b) = h(b, a) = 0.5 * (h(a, b) + h(b, a));
  return h;
}

WeightFunction weight_half_square(std::size_t n) {
  WeightFunction w;
  w.f = [](const Point& x) { return 0.5 * x.dot(x); };
  w.grad = [](const Point& x) { return x; };
  w.hessian = [n](const Point&) { return Matrix::identity(n); };
  w.regularity = "semiconvex";
  return w;
}

WeightFunction weight_linear(const Vec& a) {
  WeightFunction w;
  w.f = [a](const Point& x) { return a.dot(x); };
  w.grad = [a](const Point&) { return a; };
  w.hessian = [n = a.size()](const Point&) { return Matrix(n); };
  w.regularity = "semiconvex";
  return w;
}

WeightFunction weight_constant(double c) {
  WeightFunction w;
  w.f = [c](const Point&) { return c; };
  w.grad = [](const Point& x) { return Vec(x.size()); };
  w.hessian = [](const Point& x) { return Matrix(x.size()); };
  w.regularity = "semiconvex";
  return w;
}

QResult bakry_emery_q(const ChristoffelField& gamma, const WeightFunction& f, const HalfDensityField& v,
                      const HalfDensityField& w, const QuadratureScheme& scheme, const QOptions& opt) {
  check_same_chart(gamma, v);
  check_same_chart(gamma, w);
  QResult res;
  const Box box = pairing_box(v, w);
  if (box.empty()) {
    res.converged = true;
    return res;
  }
  const SingularSet sing = gamma.singular.restricted_to(box);
  res.verdict = tameness(gamma, sing, box, scheme, opt);
  res.fd_fallback = v.uses_fd() || w.uses_fd() || !f.grad;
  const std::size_t n = gamma.chart.dim;
  Integrand integrand{1, [&](const Point& x, std::span<double> out) {
                        const Christoffel g = gamma.at(x);
                        const Vec vv = v.value(x), ww = w.value(x);
                        const Matrix dv = v.derivative(x), dw = w.derivative(x);
                        const Matrix Dv = covariant_derivative_kernel(g, vv, dv);
                        const Matrix Dw = covariant_derivative_kernel(g, ww, dw);
                        double q = Dv.trace() * Dw.trace();
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = 0; j < n; ++j) q -= Dv(i, j) * Dw(j, i);
                        const Vec df = f.gradient(x);
                        const double trv = Dv.trace(), trw = Dw.trace();
                        double corr = 0.0;
                        for (std::size_t i = 0; i < n; ++i) {
                          double s = vv[i] * trw + trv * ww[i];
                          for (std::size_t j = 0; j < n; ++j) s += Dv(j, i) * ww[j] + vv[j] * Dw(j, i);
                          corr += df[i] * s;
                        }
                        out[0] = q - 0.5 * corr;
                      }};
  const Breakpoints br = merge_breakpoints(v.breaks, w.breaks);
  const IntegralResult r = integrate(integrand, box, scheme, sing, br);
  res.value = r.value;
  res.error = r.error;
  res.converged = r.converged;
  res.cells = r.cells;
  res.shells = r.shells;

  bool smooth = true;
  for (const Stratum& s : gamma.singular.strata) smooth = smooth && !s.intersects(box, s.exclusion_radius);
  if (smooth) {
    const double h = default_fd_step(gamma.chart);
    const IntegralResult c = integrate(scalar_integrand([&](const Point& x) {
                                         Matrix m = symmetrized_ricci(gamma, x, h) + f.hess(x);
                                         const Christoffel g = gamma.at(x);
                                         const Vec df = f.gradient(x);
                                         for (std::size_t k = 0; k < n; ++k)
                                           for (std::size_t l = 0; l < n; ++l)
                                             for (std::size_t i = 0; i < n; ++i) m(k, l) -= g(i, k, l) * df[i];
                                         return m.bilinear(v.value(x), w.value(x));
                                       }),
                                       box, scheme, {}, br);
    res.cross_check = c.value;
  }
  return res;
}

// ---------------------------------------------------------------- Kahler

HalfDensityField linear_image(const HalfDensityField& v, const Matrix& m) {
  HalfDensityField out = v;
  out.coeffs = [c = v.coeffs, m](const Point& x) { return m * c(x); };
  if (v.jacobian) {
    out.jacobian = [j = v.jacobian, mt = m.transpose()](const Point& x) { return j(x) * mt; };
  }
  out.lipschitz = v.lipschitz * m.frobenius();
  return out;
}

HalfDensityField combine(double a, const HalfDensityField& v, double b, const HalfDensityField& w) {
  if (v.chart.dim != w.chart.dim) throw ChartMismatchError("combined fields live on different charts");
  HalfDensityField out;
  out.chart = v.chart;
  out.compact = v.compact && w.compact;
  if (out.compact) {
    out.support = v.support;
    for (std::size_t i = 0; i < v.chart.dim; ++i) {
      out.support.lo[i] = std::min(v.support.lo[i], w.support.lo[i]);
      out.support.hi[i] = std::max(v.support.hi[i], w.support.hi[i]);
    }
  } else {
    out.support = v.chart.domain;
  }
  out.lipschitz = std::abs(a) * v.lipschitz + std::abs(b) * w.lipschitz;
  out.breaks = merge_breakpoints(v.breaks, w.breaks);
  out.coeffs = [a, b, v, w](const Point& x) { return a * v.value(x) + b * w.value(x); };
  if (v.jacobian && w.jacobian)
    out.jacobian = [a, b, v, w](const Point& x) { return a * v.derivative(x) + b * w.derivative(x); };
  out.fd_step = std::max(v.fd_step, w.fd_step);
  return out;
}

KahlerResult kahler_q(const MetricField& h, const HalfDensityField& v, const HalfDensityField& w,
                      const QuadratureScheme& scheme, bool cross_check) {
  if (!h.kahler || h.chart.dim != 2)
    throw UnsupportedGeometryError("kahler_q needs a Kahler-tagged metric of complex dimension 1");
  KahlerResult res;
  const Box box = pairing_box(v, w);
  if (box.empty()) return res;
  auto logdet = [&h](const Point& x) {
    const double d = determinant(h.eval(x));
    if (!(d > 0)) throw DegenerateMetricError(x, "non-positive det h");
    return 0.5 * std::log(d);
  };
  const double step = 1e-3 * h.chart.domain.diagonal();
  auto ddbar = [&](const Point& x) {
    auto lap = [&](double s) {
      double acc = 0.0;
      const double c = logdet(x);
      for (std::size_t a = 0; a < 2; ++a) {
        Point p = x, m = x;
        p[a] += s;
        m[a] -= s;
        acc += (logdet(p) - 2.0 * c + logdet(m)) / (s * s);
      }
      return acc;
    };
    return 0.25 * (4.0 * lap(0.5 * step) - lap(step)) / 3.0;
  };
  const SingularSet sing = h.singular.restricted_to(box);
  Integrand f{2, [&](const Point& x, std::span<double> out) {
                const Vec a = v.value(x), c = w.value(x);
                const double k = -ddbar(x);
                out[0] = k * (a[0] * c[0] + a[1] * c[1]);
                out[1] = k * (a[1] * c[0] - a[0] * c[1]);
              }};
  const Breakpoints br = merge_breakpoints(v.breaks, w.breaks);
  const IntegralResult r = integrate(f, box, scheme, sing, br);
  res.value = {r.values[0], r.values[1]};
  res.error = r.errors[0] + r.errors[1];
  if (cross_check) {
    const ChristoffelField gamma = christoffel_from_metric(h);
    Matrix m1(2), m2(2);
    m1(0, 1) = 1.0;
    m1(1, 0) = -1.0;
    m2(0, 1) = -1.0;
    m2(1, 0) = 1.0;
    const HalfDensityField x2 = linear_image(v, m1);
    const HalfDensityField y2 = linear_image(w, m2);
    QOptions opt;
    opt.split = false;
    const QResult a = q_form(gamma, v, w, scheme, opt);
    const QResult b = q_form(gamma, x2, y2, scheme, opt);
    const QResult c = q_form(gamma, v, y2, scheme, opt);
    const QResult d = q_form(gamma, x2, w, scheme, opt);
    res.cross_check = {0.25 * (a.value - b.value), 0.25 * (c.value + d.value)};
    res.cross_error = 0.25 * (a.error + b.error + c.error + d.error);
  }
  return res;
}

// ---------------------------------------------------------------- Alexandrov

AlexandrovResult alexandrov_q(const ConformalFactor& phi, const HalfDensityField& v, const HalfDensityField& w,
                              const QuadratureScheme& scheme) {
  if (phi.dim != 2) throw UnsupportedGeometryError("Alexandrov pairing is defined for surfaces");
  AlexandrovResult res;
  const Box box = pairing_box(v, w);
  if (box.empty()) return res;
  const SingularSet sing = phi.strata ? phi.strata(box).restricted_to(box) : SingularSet{};
  if (!phi.hessian && (!sing.empty() || !phi.atoms.empty() || !phi.lines.empty()))
    throw Error("missing Laplacian oracle for a singular conformal factor '" + phi.name + "'");
  auto vw = [&](const Point& x) { return v.value(x).dot(w.value(x)); };

  for (const CurvatureAtom& a : phi.atoms)
    if (box.contains(a.where)) res.atoms += a.mass * vw(a.where);

  double err = 0.0;
  for (const CurvatureLine& l : phi.lines) {
    if (l.offset < box.lo[l.normal_axis] || l.offset > box.hi[l.normal_axis]) continue;
    const std::size_t t = 1 - l.normal_axis;
    std::vector<double> br;
    const Breakpoints all = merge_breakpoints(v.breaks, w.breaks);
    if (t < all.size()) br = all[t];
    double e = 0.0;
    const double val = integrate_1d(
        [&](double s) {
          Point x(2);
          x[l.normal_axis] = l.offset;
          x[t] = s;
          return vw(x);
        },
        box.lo[t], box.hi[t], scheme, br, &e);
    res.lines += l.density * val;
    err += std::abs(l.density) * e;
  }

  const double step = 1e-3 * box.diagonal();
  auto laplacian = [&](const Point& x) {
    if (phi.hessian) return phi.laplacian(x);
    auto lap = [&](double s) {
      double acc = 0.0;
      const double c = phi.phi(x);
      for (std::size_t a = 0; a < 2; ++a) {
        Point p = x, m = x;
        p[a] += s;
        m[a] -= s;
        acc += (phi.phi(p) - 2.0 * c + phi.phi(m)) / (s * s);
      }
      return acc;
    };
    return (4.0 * lap(0.5 * step) - lap(step)) / 3.0;
  };
  const IntegralResult r = integrate(scalar_integrand([&](const Point& x) { return -laplacian(x) * vw(x); }), box,
                                     scheme, sing, merge_breakpoints(v.breaks, w.breaks));
  res.ac = r.value;
  err += r.error;
  res.value = res.atoms + res.lines + res.ac;
  res.error = err;
  return res;
}

// ---------------------------------------------------------------- Killing

KillingResult killing_defect(const MetricField& g, const ChristoffelField& gamma, const HalfDensityField& v,
                             const Box& box, int samples) {
  const std::size_t n = box.dim();
  KillingResult res;
  res.worst = box.center();
  std::vector<int> idx(n, 0);
  const int m = std::max(2, samples);
  while (true) {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * idx[a] / (m - 1.0);
    if (gamma.singular.excluded(x)) {
      ++res.skipped;
    } else {
      const Matrix D = half_density_covariant_derivative(gamma, v, x);
      const Matrix G = g.eval(x);
      Matrix S(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) S(i, j) += G(j, k) * D(i, k) + G(i, k) * D(j, k);
      const double d = S.frobenius();
      if (d > res.defect) {
        res.defect = d;
        res.worst = x;
      }
      ++res.points;
    }
    std::size_t a = 0;
    while (a < n && ++idx[a] == m) idx[a++] = 0;
    if (a == n) break;
  }
  return res;
}

// ---------------------------------------------------------------- perturbations

std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  const double icept = my - slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (icept + slope * x[i]);
    ssr += r * r;
  }
  const double r2 = syy > 0 ? 1.0 - ssr / syy : (ssr == 0 ? 1.0 : 0.0);
  return {slope, icept, r2};
}

PerturbationSeries q_convergence_under_perturbation(const ChristoffelField& gamma,
                                                    const std::vector<ConnectionPerturbation>& ts,
                                                    const HalfDensityField& v, const HalfDensityField& w,
                                                    const QuadratureScheme& scheme) {
  PerturbationSeries s;
  QOptions opt;
  opt.split = false;
  s.baseline = q_form(gamma, v, w, scheme, opt);
  for (const ConnectionPerturbation& t : ts) {
    const QResult q = q_form(perturb(gamma, t), v, w, scheme, opt);
    s.perturbed.push_back(q);
    s.sup_norms.push_back(t.sup_bound);
    s.deviations.push_back(std::abs(q.value - s.baseline.value));
  }
  if (ts.size() >= 2) {
    const auto fit = linear_fit(s.sup_norms, s.deviations);
    s.slope = fit[0];
    s.intercept = fit[1];
    s.r_squared = fit[2];
  }
  return s;
}

void LowerBoundWitness::check(const Box& box, int samples) const {
  const std::size_t n = box.dim();
  std::vector<int> idx(n, 0);
  const int m = std::max(2, samples);
  while (true) {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * idx[a] / (m - 1.0);
    const Vec ev = symmetric_eigenvalues(h(x));
    if (ev[0] < -1e-12 * std::max(1.0, std::abs(ev[n - 1])))
      throw Error("lower-bound witness is not positive semidefinite at " + format_point(x));
    std::size_t a = 0;
    while (a < n && ++idx[a] == m) idx[a++] = 0;
    if (a == n) break;
  }
}

LowerBoundWitness zero_witness(std::size_t n) {
  return LowerBoundWitness{[n](const Point&) { return Matrix(n); }};
}

double lower_bound_margin(const ChristoffelField& gamma, const LowerBoundWitness& h, const HalfDensityField& v,
                          const QuadratureScheme& scheme) {
  QOptions opt;
  opt.split = false;
  const QResult q = q_form(gamma, v, v, scheme, opt);
  const Box box = pairing_box(v, v);
  const IntegralResult r = integrate(scalar_integrand([&](const Point& x) {
                                       const Vec vx = v.value(x);
                                       return h.h(x).bilinear(vx, vx);
                                     }),
                                     box, scheme, gamma.singular.restricted_to(box), v.breaks);
  return q.value + r.value;
}

}  // namespace ricci
