#include "ricci/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ricci {

// ---------------------------------------------------------------- Box

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
  return v;
}

double Box::diagonal() const { return (hi - lo).norm(); }

Point Box::center() const { return 0.5 * (lo + hi); }

bool Box::contains(const Point& x, double slack) const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
  return true;
}

bool Box::empty() const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (!(hi[i] > lo[i])) return true;
  return false;
}

Box Box::intersect(const Box& o) const {
  Box r{lo, hi};
  for (std::size_t i = 0; i < dim(); ++i) {
    r.lo[i] = std::max(lo[i], o.lo[i]);
    r.hi[i] = std::min(hi[i], o.hi[i]);
  }
  return r;
}

Box Box::cube(const Point& center, double half_width) {
  Box b{center, center};
  for (std::size_t i = 0; i < center.size(); ++i) {
    b.lo[i] -= half_width;
    b.hi[i] += half_width;
  }
  return b;
}

Breakpoints merge_breakpoints(const Breakpoints& a, const Breakpoints& b) {
  Breakpoints out(std::max(a.size(), b.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i < a.size()) out[i].insert(out[i].end(), a[i].begin(), a[i].end());
    if (i < b.size()) out[i].insert(out[i].end(), b[i].begin(), b[i].end());
    std::sort(out[i].begin(), out[i].end());
    out[i].erase(std::unique(out[i].begin(), out[i].end()), out[i].end());
  }
  return out;
}

// ---------------------------------------------------------------- Chart

Chart Chart::box(const Point& lo, const Point& hi) {
  Chart c;
  c.dim = lo.size();
  c.domain = Box{lo, hi};
  return c;
}

void Chart::validate(int samples_per_axis) const {
  if (dim < 1 || dim > kMaxDim) throw Error("chart dimension must be in [1, 4]");
  if (domain.dim() != dim || domain.hi.size() != dim) throw Error("chart box dimension mismatch");
  if (domain.empty()) throw Error("chart box has zero volume");
  if (!transition) return;
  const Transition& t = *transition;
  std::vector<int> idx(dim, 0);
  const int m = std::max(2, samples_per_axis);
  while (true) {
    Point x(dim);
    for (std::size_t a = 0; a < dim; ++a)
      x[a] = domain.lo[a] + (domain.hi[a] - domain.lo[a]) * (idx[a] + 0.5) / m;
    const Point back = t.inverse(t.forward(x));
    if ((back - x).max_abs() > t.roundtrip_tol * std::max(1.0, x.max_abs()))
      throw Error("transition round trip fails at " + format_point(x));
    std::size_t a = 0;
    while (a < dim && ++idx[a] == m) idx[a++] = 0;
    if (a == dim) break;
  }
}

// ---------------------------------------------------------------- Strata

const char* to_string(StratumKind k) {
  switch (k) {
    case StratumKind::point: return "point";
    case StratumKind::curve: return "curve";
    case StratumKind::hyperplane: return "hyperplane";
  }
  return "?";
}

Stratum Stratum::point(const Point& p, double r0, std::string label) {
  if (!(r0 > 0)) throw Error("exclusion radius must be positive");
  Stratum s;
  s.kind = StratumKind::point;
  s.anchor = p;
  for (std::size_t i = 0; i < p.size(); ++i) s.constrained_axes.push_back(i);
  s.polyline = {p};
  s.exclusion_radius = r0;
  s.label = std::move(label);
  return s;
}

Stratum Stratum::hyperplane(std::size_t n, std::size_t axis, double value, double r0,
                            std::string label) {
  if (!(r0 > 0)) throw Error("exclusion radius must be positive");
  Stratum s;
  s.kind = StratumKind::hyperplane;
  s.anchor = Point(n);
  s.anchor[axis] = value;
  s.constrained_axes = {axis};
  s.exclusion_radius = r0;
  s.label = std::move(label);
  return s;
}

Stratum Stratum::axis_curve(const Point& through, std::size_t axis, double lo, double hi,
                            double r0, std::string label) {
  Point a = through, b = through;
  a[axis] = lo;
  b[axis] = hi;
  Stratum s = polyline_curve({a, b}, r0, std::move(label));
  return s;
}

Stratum Stratum::polyline_curve(std::vector<Point> vertices, double r0, std::string label) {
  if (!(r0 > 0)) throw Error("exclusion radius must be positive");
  if (vertices.size() < 2) throw Error("curve stratum needs at least two vertices");
  Stratum s;
  s.kind = StratumKind::curve;
  s.exclusion_radius = r0;
  s.label = std::move(label);
  const std::size_t n = vertices.front().size();
  s.anchor = vertices.front();
  s.polyline = std::move(vertices);
  s.arclength.push_back(0.0);
  for (std::size_t v = 1; v < s.polyline.size(); ++v)
    s.arclength.push_back(s.arclength.back() + (s.polyline[v] - s.polyline[v - 1]).norm());
  // Tangent frames: column 0 is the unit tangent, remaining columns complete an
  // orthonormal basis by Gram-Schmidt against the coordinate axes.
  for (std::size_t v = 0; v < s.polyline.size(); ++v) {
    const std::size_t a = v == 0 ? 0 : v - 1;
    const std::size_t b = v == 0 ? 1 : v;
    Vec t = s.polyline[b] - s.polyline[a];
    t *= 1.0 / t.norm();
    std::vector<Vec> basis{t};
    for (std::size_t e = 0; e < n && basis.size() < n; ++e) {
      Vec c = Vec::unit(n, e);
      for (const Vec& q : basis) c -= c.dot(q) * q;
      if (c.norm() > 1e-8) basis.push_back((1.0 / c.norm()) * c);
    }
    Matrix f(n);
    for (std::size_t col = 0; col < n; ++col)
      for (std::size_t row = 0; row < n; ++row) f(row, col) = basis[col][row];
    s.frames.push_back(f);
  }
  if (auto ax = s.curve_axis()) {
    for (std::size_t i = 0; i < n; ++i)
      if (i != *ax) s.constrained_axes.push_back(i);
  }
  return s;
}

std::optional<std::size_t> Stratum::curve_axis() const {
  if (kind != StratumKind::curve || polyline.size() < 2) return std::nullopt;
  const std::size_t n = polyline.front().size();
  std::optional<std::size_t> axis;
  for (std::size_t i = 0; i < n; ++i) {
    bool varies = false;
    for (const Point& p : polyline)
      if (std::abs(p[i] - polyline.front()[i]) > 1e-14) varies = true;
    if (varies) {
      if (axis) return std::nullopt;
      axis = i;
    }
  }
  return axis;
}

Point Stratum::project(const Point& x) const {
  Point p = x;
  for (std::size_t a : constrained_axes) p[a] = anchor[a];
  return p;
}

double Stratum::distance(const Point& x) const {
  if (kind == StratumKind::curve && constrained_axes.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 1; v < polyline.size(); ++v) {
      const Vec d = polyline[v] - polyline[v - 1];
      const double len2 = d.dot(d);
      double t = len2 > 0 ? (x - polyline[v - 1]).dot(d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, (x - (polyline[v - 1] + t * d)).norm());
    }
    return best;
  }
  double s = 0.0;
  for (std::size_t a : constrained_axes) s += (x[a] - anchor[a]) * (x[a] - anchor[a]);
  return std::sqrt(s);
}

bool Stratum::intersects(const Box& b, double slack) const {
  if (kind == StratumKind::curve && constrained_axes.empty()) {
    for (const Point& p : polyline)
      if (b.contains(p, slack)) return true;
    return false;
  }
  for (std::size_t a : constrained_axes)
    if (anchor[a] < b.lo[a] - slack || anchor[a] > b.hi[a] + slack) return false;
  return true;
}

bool SingularSet::excluded(const Point& x) const {
  for (const Stratum& s : strata)
    if (s.distance(x) < s.exclusion_radius) return true;
  return false;
}

double SingularSet::distance(const Point& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Stratum& s : strata) d = std::min(d, s.distance(x));
  return d;
}

void SingularSet::validate(const Chart& chart) const {
  for (const Stratum& s : strata) {
    if (!(s.exclusion_radius > 0)) throw Error("stratum '" + s.label + "' has non-positive exclusion radius");
    if (s.dim() != chart.dim) throw Error("stratum '" + s.label + "' dimension mismatch");
    if (!s.intersects(chart.domain, 1e-12))
      throw Error("stratum '" + s.label + "' lies outside the chart domain");
  }
}

SingularSet SingularSet::restricted_to(const Box& b) const {
  SingularSet out;
  for (const Stratum& s : strata)
    if (s.intersects(b)) out.strata.push_back(s);
  return out;
}

const char* to_string(Regularity r) {
  switch (r) {
    case Regularity::smooth: return "smooth";
    case Regularity::lipschitz: return "lipschitz";
    case Regularity::w11loc: return "W11loc";
  }
  return "?";
}

const char* to_string(IntegrabilityClass c) {
  switch (c) {
    case IntegrabilityClass::linf: return "Linf_loc";
    case IntegrabilityClass::l2: return "L2_loc";
    case IntegrabilityClass::l1: return "L1_loc";
    case IntegrabilityClass::none: return "none";
  }
  return "?";
}

IntegrabilityClass weaker(IntegrabilityClass a, IntegrabilityClass b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

// ---------------------------------------------------------------- Fields

void MetricField::check_positive_definite(const Point& x) const {
  const Matrix g = eval(x);
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-12 * std::max(1.0, g.max_abs()))
        throw DegenerateMetricError(x, "asymmetric metric");
  const Vec ev = symmetric_eigenvalues(g);
  if (!(ev[0] > 1e-12 * ev[n - 1])) throw DegenerateMetricError(x);
}

Christoffel ChristoffelField::at(const Point& x) const {
  if (!analytic && singular.excluded(x)) throw SingularEvaluationError(x);
  return eval(x);
}

double default_fd_step(const Chart& chart) { return 1e-4 * chart.domain.diagonal(); }

Vec HalfDensityField::value(const Point& x) const {
  if (compact && !support.contains(x)) return Vec(chart.dim);
  return coeffs(x);
}

Matrix HalfDensityField::derivative(const Point& x) const {
  const std::size_t n = chart.dim;
  if (compact && !support.contains(x)) return Matrix(n);
  if (jacobian) return jacobian(x);
  const double h = fd_step > 0 ? fd_step : default_fd_step(chart);
  Matrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto central = [&](double step) {
      Point a = x, b = x;
      a[i] += step;
      b[i] -= step;
      return (1.0 / (2.0 * step)) * (value(a) - value(b));
    };
    const Vec d1 = central(h);
    const Vec d2 = central(0.5 * h);
    for (std::size_t j = 0; j < n; ++j) d(i, j) = (4.0 * d2[j] - d1[j]) / 3.0;
  }
  return d;
}

// ---------------------------------------------------------------- Connections

Christoffel levi_civita(const Matrix& g, const Rank3& dg, const Point& where) {
  const std::size_t n = g.size();
  Matrix ginv;
  if (!invert(g, ginv)) throw DegenerateMetricError(where);
  // first[i][j][k] = 1/2 (d_j g_ik + d_k g_ij - d_i g_jk)
  Rank3 first(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const double v = 0.5 * (dg(j, i, k) + dg(k, i, j) - dg(i, j, k));
        first(i, j, k) = v;
        first(i, k, j) = v;
      }
  Christoffel gamma(n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += ginv(l, i) * first(i, j, k);
        gamma(l, j, k) = s;
        gamma(l, k, j) = s;
      }
  return gamma;
}

Rank3 metric_derivative_fd(const std::function<Matrix(const Point&)>& g, const Point& x, double h,
                           bool richardson) {
  const std::size_t n = x.size();
  Rank3 d(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto central = [&](double step) {
      Point a = x, b = x;
      a[k] += step;
      b[k] -= step;
      return (1.0 / (2.0 * step)) * (g(a) - g(b));
    };
    Matrix dk = central(h);
    if (richardson) {
      const Matrix half = central(0.5 * h);
      dk = (1.0 / 3.0) * (4.0 * half - dk);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d(k, i, j) = dk(i, j);
  }
  return d;
}

ChristoffelField christoffel_from_metric(const MetricField& g, const ChristoffelScheme& scheme) {
  ChristoffelField out;
  out.chart = g.chart;
  out.singular = g.singular;
  out.claimed = g.claimed;
  const std::size_t n = g.chart.dim;

  if (scheme.kind == ChristoffelScheme::Kind::analytic) {
    if (g.christoffel_eval) {
      out.eval = g.christoffel_eval;
      out.analytic = true;
      return out;
    }
    if (!g.d_eval) throw Error("analytic Christoffel scheme needs d_eval or christoffel_eval");
    out.eval = [g](const Point& x) {
      const Matrix m = g.eval(x);
      if (!g.singular.excluded(x)) g.check_positive_definite(x);
      return levi_civita(m, g.d_eval(x), x);
    };
    out.analytic = true;
    return out;
  }

  const double h = scheme.step > 0 ? scheme.step : default_fd_step(g.chart);
  const bool rich = scheme.richardson;
  out.analytic = static_cast<bool>(g.christoffel_eval);
  out.eval = [g, h, rich, n](const Point& x) {
    if (g.singular.excluded(x)) {
      if (g.christoffel_eval) return g.christoffel_eval(x);
      throw SingularEvaluationError(x);
    }
    g.check_positive_definite(x);
    (void)n;
    return levi_civita(g.eval(x), metric_derivative_fd(g.eval, x, h, rich), x);
  };
  return out;
}

ChristoffelField christoffel_transform(const ChristoffelField& gamma, const Transition& t) {
  const std::size_t n = gamma.chart.dim;
  ChristoffelField out;
  out.chart = Chart::box(t.target.lo, t.target.hi);
  out.analytic = gamma.analytic;
  out.claimed = gamma.claimed;
  for (const Stratum& s : gamma.singular.strata) {
    if (s.kind != StratumKind::point)
      throw UnsupportedGeometryError("christoffel_transform maps point strata only");
    out.singular.strata.push_back(Stratum::point(t.forward(s.anchor), s.exclusion_radius, s.label));
  }
  const double h = default_fd_step(out.chart);
  auto inv_jac = [t](const Point& y) {
    const Point x = t.inverse(y);
    Matrix jinv;
    if (!invert(t.jacobian(x), jinv)) throw ChartDegeneracyError(x);
    return jinv;
  };
  out.eval = [gamma, t, inv_jac, h, n](const Point& y) {
    const Point x = t.inverse(y);
    const Matrix jac = t.jacobian(x);
    Matrix jinv;
    if (!invert(jac, jinv)) throw ChartDegeneracyError(x);
    const Christoffel gx = gamma.at(x);

    Rank3 hess(n);
    if (t.inverse_hessian) {
      hess = t.inverse_hessian(y);
    } else {
      // d^2 x^a / dy^j dy^k = d_k (dx^a/dy^j), Richardson-extrapolated central differences.
      for (std::size_t k = 0; k < n; ++k) {
        auto central = [&](double step) {
          Point a = y, b = y;
          a[k] += step;
          b[k] -= step;
          return (1.0 / (2.0 * step)) * (inv_jac(a) - inv_jac(b));
        };
        const Matrix d = (1.0 / 3.0) * (4.0 * central(0.5 * h) - central(h));
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t j = 0; j < n; ++j) hess(a, j, k) = d(a, j);
      }
    }

    Christoffel r(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j; k < n; ++k) {
          double s = 0.0;
          for (std::size_t a = 0; a < n; ++a) {
            double inner = 0.0;
            for (std::size_t b = 0; b < n; ++b)
              for (std::size_t c = 0; c < n; ++c) inner += jinv(b, j) * jinv(c, k) * gx(a, b, c);
            inner += 0.5 * (hess(a, j, k) + hess(a, k, j));
            s += jac(i, a) * inner;
          }
          r(i, j, k) = s;
          r(i, k, j) = s;
        }
    return r;
  };
  return out;
}

Matrix covariant_derivative_kernel(const Christoffel& gamma, const Vec& v, const Matrix& dv) {
  const std::size_t n = v.size();
  Matrix d = dv;
  for (std::size_t i = 0; i < n; ++i) {
    double trace = 0.0;
    for (std::size_t k = 0; k < n; ++k) trace += gamma(k, k, i);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += gamma(j, k, i) * v[k];
      d(i, j) += s - 0.5 * trace * v[j];
    }
  }
  return d;
}

Matrix half_density_covariant_derivative(const ChristoffelField& gamma, const HalfDensityField& v,
                                         const Point& x) {
  return covariant_derivative_kernel(gamma.at(x), v.value(x), v.derivative(x));
}

ChristoffelField perturb(const ChristoffelField& gamma, const ConnectionPerturbation& t) {
  if (gamma.chart.dim != t.chart.dim || (gamma.chart.domain.lo - t.chart.domain.lo).max_abs() > 1e-12 ||
      (gamma.chart.domain.hi - t.chart.domain.hi).max_abs() > 1e-12)
    throw ChartMismatchError("perturbation chart does not match connection chart");
  ChristoffelField out = gamma;
  for (auto& c : out.claimed) c = weaker(c, IntegrabilityClass::linf);
  out.eval = [g = gamma.eval, te = t.eval](const Point& x) {
    Christoffel r = g(x);
    const Rank3 d = te(x);
    const std::size_t n = r.size();
    // Symmetrized sum keeps the result exactly torsion-free.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j; k < n; ++k) {
          const double v = r(i, j, k) + 0.5 * (d(i, j, k) + d(i, k, j));
          r(i, j, k) = v;
          r(i, k, j) = v;
        }
    return r;
  };
  return out;
}

HalfDensityField transport_half_density(const HalfDensityField& v, const Transition& t) {
  const std::size_t n = v.chart.dim;
  HalfDensityField out;
  out.chart = Chart::box(t.target.lo, t.target.hi);
  out.compact = v.compact;

  // Bounding box of the forward image of the support, sampled on a grid.
  const int m = 17;
  Box img{Point(n, std::numeric_limits<double>::infinity()),
          Point(n, -std::numeric_limits<double>::infinity())};
  double max_jac = 0.0, max_jinv = 0.0, max_w = 0.0;
  std::vector<int> idx(n, 0);
  while (true) {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a)
      x[a] = v.support.lo[a] + (v.support.hi[a] - v.support.lo[a]) * idx[a] / (m - 1.0);
    const Point y = t.forward(x);
    for (std::size_t a = 0; a < n; ++a) {
      img.lo[a] = std::min(img.lo[a], y[a]);
      img.hi[a] = std::max(img.hi[a], y[a]);
    }
    const Matrix j = t.jacobian(x);
    Matrix ji;
    if (!invert(j, ji)) throw ChartDegeneracyError(x);
    max_jac = std::max(max_jac, j.frobenius());
    max_jinv = std::max(max_jinv, ji.frobenius());
    max_w = std::max(max_w, std::sqrt(std::abs(determinant(ji))));
    std::size_t a = 0;
    while (a < n && ++idx[a] == m) idx[a++] = 0;
    if (a == n) break;
  }
  const double pad = 0.05 * img.diagonal() / (m - 1.0);
  for (std::size_t a = 0; a < n; ++a) {
    img.lo[a] = std::max(t.target.lo[a], img.lo[a] - pad);
    img.hi[a] = std::min(t.target.hi[a], img.hi[a] + pad);
  }
  out.support = img;
  // Crude Lipschitz bound: |d(w J v)| <= |w||J||dv||dx/dy| + derivative of the weight and Jacobian terms.
  out.lipschitz = 2.0 * max_w * max_jac * v.lipschitz * max_jinv;
  out.coeffs = [v, t](const Point& y) {
    const Point x = t.inverse(y);
    if (v.compact && !v.support.contains(x)) return Vec(y.size());
    const Matrix j = t.jacobian(x);
    const double w = 1.0 / std::sqrt(std::abs(determinant(j)));
    return w * (j * v.value(x));
  };
  return out;
}

FieldCheck check_half_density(const HalfDensityField& v, unsigned seed, int pairs, double tol) {
  const std::size_t n = v.chart.dim;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FieldCheck fc;
  auto sample = [&]() {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = v.support.lo[a] + u(rng) * (v.support.hi[a] - v.support.lo[a]);
    return x;
  };
  if (v.compact) {
    for (int s = 0; s < pairs; ++s) {
      Point x = sample();
      const std::size_t face = static_cast<std::size_t>(u(rng) * n) % n;
      x[face] = u(rng) < 0.5 ? v.support.lo[face] : v.support.hi[face];
      fc.max_boundary_value = std::max(fc.max_boundary_value, v.coeffs(x).max_abs());
    }
  }
  for (int s = 0; s < pairs; ++s) {
    const Point x = sample(), y = sample();
    const double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    const double ratio = (v.value(x) - v.value(y)).norm() / dist;
    fc.max_lipschitz_ratio = std::max(fc.max_lipschitz_ratio, v.lipschitz > 0 ? ratio / v.lipschitz : ratio);
  }
  fc.ok = fc.max_boundary_value <= tol && (v.lipschitz > 0 ? fc.max_lipschitz_ratio <= 1.0 + 1e-9
                                                            : fc.max_lipschitz_ratio <= tol);
  return fc;
}

}  // namespace ricci
