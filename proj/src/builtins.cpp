#include "ricci/builtins.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace ricci {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxSmoothSlope = 1.875;  // max of the smoothstep derivative

double sgn(double x) { return (x > 0) - (x < 0); }

Christoffel conformal_christoffel(const Vec& dphi) {
  const std::size_t n = dphi.size();
  Christoffel g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        g(i, j, k) = (i == j ? dphi[k] : 0.0) + (i == k ? dphi[j] : 0.0) - (j == k ? dphi[i] : 0.0);
  return g;
}

Box clip(const Box& b, const Box& domain) { return b.intersect(domain); }

}  // namespace

// ---------------------------------------------------------------- profiles

double smoothstep(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double smoothstep_derivative(double t) {
  if (t <= 0 || t >= 1) return 0.0;
  const double u = t * (1.0 - t);
  return 30.0 * u * u;
}

double PlateauProfile::value(double x) const {
  const double d = std::abs(x - center);
  if (d <= inner) return 1.0;
  if (d >= outer) return 0.0;
  return smoothstep((outer - d) / (outer - inner));
}

double PlateauProfile::derivative(double x) const {
  const double d = std::abs(x - center);
  if (d <= inner || d >= outer) return 0.0;
  return -sgn(x - center) * smoothstep_derivative((outer - d) / (outer - inner)) / (outer - inner);
}

double radial_profile(double r) { return smoothstep(2.0 * (1.0 - r)); }

double radial_profile_derivative(double r) { return -2.0 * smoothstep_derivative(2.0 * (1.0 - r)); }

// ---------------------------------------------------------------- conformal factors

ConformalFactor phi_zero(std::size_t n) {
  ConformalFactor c;
  c.name = "zero";
  c.dim = n;
  c.phi = [](const Point&) { return 0.0; };
  c.grad = [n](const Point&) { return Vec(n); };
  c.hessian = [n](const Point&) { return Matrix(n); };
  return c;
}

ConformalFactor phi_gaussian(std::size_t n, double amp, double width) {
  ConformalFactor c;
  c.name = "gauss";
  c.dim = n;
  const double s2 = width * width;
  c.phi = [amp, s2](const Point& x) { return amp * std::exp(-x.dot(x) / s2); };
  c.grad = [amp, s2](const Point& x) { return (-2.0 * amp * std::exp(-x.dot(x) / s2) / s2) * x; };
  c.hessian = [amp, s2, n](const Point& x) {
    const double p = amp * std::exp(-x.dot(x) / s2);
    Matrix h(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        h(i, j) = p * (4.0 * x[i] * x[j] / (s2 * s2) - (i == j ? 2.0 / s2 : 0.0));
    return h;
  };
  return c;
}

ConformalFactor phi_harmonic(double a, double b) {
  ConformalFactor c;
  c.name = "harmonic";
  c.phi = [a, b](const Point& x) { return a * (x[0] * x[0] - x[1] * x[1]) + b * x[0]; };
  c.grad = [a, b](const Point& x) { return Vec{2.0 * a * x[0] + b, -2.0 * a * x[1]}; };
  c.hessian = [a](const Point&) {
    Matrix h(2);
    h(0, 0) = 2.0 * a;
    h(1, 1) = -2.0 * a;
    return h;
  };
  return c;
}

ConformalFactor phi_cone(std::size_t n, double alpha) {
  ConformalFactor c;
  c.name = "cone";
  c.dim = n;
  c.phi = [alpha](const Point& x) { return -alpha * std::log(x.norm()); };
  c.grad = [alpha](const Point& x) { return (-alpha / x.dot(x)) * x; };
  c.hessian = [alpha, n](const Point& x) {
    const double r2 = x.dot(x);
    Matrix h(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        h(i, j) = -alpha * ((i == j ? 1.0 / r2 : 0.0) - 2.0 * x[i] * x[j] / (r2 * r2));
    return h;
  };
  if (n == 2) c.atoms.push_back({Point(2), 2.0 * kPi * alpha});
  c.regularity = Regularity::w11loc;
  c.strata = [n](const Box&) {
    SingularSet s;
    s.strata.push_back(Stratum::point(Point(n), 1e-3, "vertex"));
    return s;
  };
  c.claimed = {n == 2 ? IntegrabilityClass::l1 : IntegrabilityClass::l2};
  return c;
}

ConformalFactor phi_edge(double cc) {
  ConformalFactor c;
  c.name = "edge";
  c.phi = [cc](const Point& x) { return -cc * std::abs(x[0]); };
  c.grad = [cc](const Point& x) { return Vec{-cc * sgn(x[0]), 0.0}; };
  c.hessian = [](const Point&) { return Matrix(2); };
  c.lines.push_back({0, 0.0, 2.0 * cc});
  c.regularity = Regularity::lipschitz;
  c.strata = [](const Box& b) {
    SingularSet s;
    s.strata.push_back(Stratum::axis_curve(Point(2), 1, b.lo[1], b.hi[1], 1e-3, "edge"));
    return s;
  };
  c.claimed = {IntegrabilityClass::linf};
  return c;
}

ConformalFactor phi_sphere(double r0) {
  ConformalFactor c;
  c.name = "sphere";
  c.phi = [r0](const Point& x) { return std::log(2.0 * r0 / (1.0 + x.dot(x))); };
  c.grad = [](const Point& x) { return (-2.0 / (1.0 + x.dot(x))) * x; };
  c.hessian = [](const Point& x) {
    const double q = 1.0 + x.dot(x);
    Matrix h(2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        h(i, j) = (i == j ? -2.0 / q : 0.0) + 4.0 * x[i] * x[j] / (q * q);
    return h;
  };
  return c;
}

ConformalFactor phi_mollified_cone(double alpha, double delta) {
  ConformalFactor c;
  c.name = "mollified-cone";
  const double d2 = delta * delta;
  c.phi = [alpha, d2](const Point& x) { return -0.5 * alpha * std::log(x.dot(x) + d2); };
  c.grad = [alpha, d2](const Point& x) { return (-alpha / (x.dot(x) + d2)) * x; };
  c.hessian = [alpha, d2](const Point& x) {
    const double q = x.dot(x) + d2;
    Matrix h(2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        h(i, j) = -alpha * ((i == j ? 1.0 / q : 0.0) - 2.0 * x[i] * x[j] / (q * q));
    return h;
  };
  return c;
}

ConformalFactor parse_phi(const std::string& spec, std::size_t n) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::map<std::string, double> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("phi", "expected key=value in '" + item + "'");
      try {
        kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("phi." + item.substr(0, eq), "not a number");
      }
    }
  }
  auto get = [&](const std::string& k, double dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  };
  if (kind == "zero") return phi_zero(n);
  if (kind == "gauss") return phi_gaussian(n, get("amp", 1.0), get("width", 1.0));
  if (kind == "harmonic") return phi_harmonic(get("quad", 0.3), get("lin", 0.0));
  if (kind == "cone") return phi_cone(n, get("alpha", 0.5));
  if (kind == "edge") return phi_edge(get("c", 1.0));
  if (kind == "sphere") return phi_sphere(get("r0", 1.0));
  if (kind == "mollified-cone") return phi_mollified_cone(get("alpha", 0.5), get("delta", 0.1));
  throw ConfigError("phi", "unknown conformal factor '" + kind + "'");
}

// ---------------------------------------------------------------- metrics

Box default_box(std::size_t n, double half_width) { return Box::cube(Point(n), half_width); }

MetricField flat(std::size_t n, const Box& domain) {
  MetricField g;
  g.name = "flat";
  g.chart = Chart::box(domain.lo, domain.hi);
  g.eval = [n](const Point&) { return Matrix::identity(n); };
  g.d_eval = [n](const Point&) { return Rank3(n); };
  g.christoffel_eval = [n](const Point&) { return Christoffel(n); };
  return g;
}

MetricField conformal(const ConformalFactor& p, const Box& domain) {
  const std::size_t n = p.dim;
  MetricField g;
  g.name = "conformal:" + p.name;
  g.chart = Chart::box(domain.lo, domain.hi);
  g.eval = [phi = p.phi, n](const Point& x) { return Matrix(n, std::exp(2.0 * phi(x))); };
  g.d_eval = [phi = p.phi, grad = p.grad, n](const Point& x) {
    const double e = std::exp(2.0 * phi(x));
    const Vec d = grad(x);
    Rank3 r(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) r(k, i, i) = 2.0 * d[k] * e;
    return r;
  };
  g.christoffel_eval = [grad = p.grad](const Point& x) { return conformal_christoffel(grad(x)); };
  if (p.strata) g.singular = p.strata(domain);
  g.regularity = p.regularity;
  g.claimed = p.claimed;
  return g;
}

MetricField cone(std::size_t n, double alpha, const Box& domain) {
  MetricField g = conformal(phi_cone(n, alpha), domain);
  g.name = "cone";
  return g;
}

MetricField edge(double c, const Box& domain) {
  MetricField g = conformal(phi_edge(c), domain);
  g.name = "edge";
  return g;
}

MetricField sphere_chart(double r0, const Box& domain) {
  MetricField g = conformal(phi_sphere(r0), domain);
  g.name = "sphere-chart";
  return g;
}

MetricField kahler1d(const ConformalFactor& phi, const Box& domain) {
  if (phi.dim != 2) throw UnsupportedGeometryError("Kahler form supports complex dimension 1 only");
  MetricField g = conformal(phi, domain);
  g.name = "kahler:" + phi.name;
  g.kahler = true;
  return g;
}

MetricField warped(const WarpedProfile& p, const Box& domain, const std::string& name) {
  MetricField g;
  g.name = name;
  g.chart = Chart::box(domain.lo, domain.hi);
  g.eval = [f = p.f](const Point& x) {
    Matrix m(2, 1.0);
    const double v = f(x[0]);
    m(1, 1) = v * v;
    return m;
  };
  g.d_eval = [f = p.f, df = p.df](const Point& x) {
    Rank3 r(2);
    r(0, 1, 1) = 2.0 * f(x[0]) * df(x[0]);
    return r;
  };
  g.christoffel_eval = [f = p.f, df = p.df](const Point& x) {
    Christoffel c(2);
    const double v = f(x[0]), d = df(x[0]);
    c(0, 1, 1) = -v * d;
    c(1, 0, 1) = d / v;
    c(1, 1, 0) = d / v;
    return c;
  };
  g.singular.strata.push_back(Stratum::axis_curve(Point(2), 1, domain.lo[1], domain.hi[1], 1e-3, "gluing-locus"));
  g.regularity = Regularity::lipschitz;
  g.claimed = {IntegrabilityClass::linf};
  return g;
}

WarpedProfile glued_cones_profile(double L) {
  WarpedProfile p;
  p.f = [L](double t) { return (L - std::abs(t)) / L; };
  p.df = [L](double t) { return -sgn(t) / L; };
  p.ddf = [](double) { return 0.0; };
  p.jump = 2.0 / L;
  return p;
}

Box glued_cones_box(double c, double L) {
  const double s = std::min(kPi * c * L, 2.0);
  return Box{Point{-0.5 * L, -s}, Point{0.5 * L, s}};
}

MetricField glued_cones(double c, double L) {
  if (!(c > 0) || !(L > 0)) throw ConfigError("glued-cones", "c and L must be positive");
  return warped(glued_cones_profile(L), glued_cones_box(c, L), "glued-cones");
}

double CapsGeometry::jump() const { return (std::cos(r1 / R1) + std::cos(r2 / R2)) / rho; }

CapsGeometry caps_geometry(double R1, double r1, double R2) {
  CapsGeometry g{R1, r1, R2, 0.0, R1 * std::sin(r1 / R1)};
  if (!(g.rho > 0) || g.rho > R2) throw ConfigError("glued-caps", "boundary circles cannot be matched");
  g.r2 = R2 * std::asin(g.rho / R2);
  return g;
}

WarpedProfile glued_caps_profile(const CapsGeometry& g) {
  WarpedProfile p;
  p.f = [g](double t) {
    return t >= 0 ? g.R1 * std::sin((g.r1 - t) / g.R1) / g.rho : g.R2 * std::sin((g.r2 + t) / g.R2) / g.rho;
  };
  p.df = [g](double t) {
    return t >= 0 ? -std::cos((g.r1 - t) / g.R1) / g.rho : std::cos((g.r2 + t) / g.R2) / g.rho;
  };
  p.ddf = [g](double t) {
    return t >= 0 ? -std::sin((g.r1 - t) / g.R1) / (g.R1 * g.rho) : -std::sin((g.r2 + t) / g.R2) / (g.R2 * g.rho);
  };
  p.jump = g.jump();
  return p;
}

Box glued_caps_box(const CapsGeometry& g) {
  const double s = std::min(kPi * g.rho, 1.5);
  return Box{Point{-0.8 * g.r2, -s}, Point{0.8 * g.r1, s}};
}

MetricField glued_caps(const CapsGeometry& g) {
  return warped(glued_caps_profile(g), glued_caps_box(g), "glued-caps");
}

MetricField cone_family_trivial(double alpha, double base_length) {
  if (!(base_length > 0)) throw ConfigError("base_length", "must be positive");
  const Box domain{Point{-0.5 * base_length, -1.0, -1.0}, Point{0.5 * base_length, 1.0, 1.0}};
  MetricField g;
  g.name = "cone-family";
  g.chart = Chart::box(domain.lo, domain.hi);
  g.eval = [alpha](const Point& x) {
    Matrix m(3, 1.0);
    const double e = std::pow(x[1] * x[1] + x[2] * x[2], -alpha);
    m(1, 1) = e;
    m(2, 2) = e;
    return m;
  };
  g.d_eval = [alpha](const Point& x) {
    const double r2 = x[1] * x[1] + x[2] * x[2];
    const double e = std::pow(r2, -alpha);
    Rank3 d(3);
    for (std::size_t k = 1; k < 3; ++k)
      for (std::size_t i = 1; i < 3; ++i) d(k, i, i) = -2.0 * alpha * x[k] / r2 * e;
    return d;
  };
  g.christoffel_eval = [alpha](const Point& x) {
    const double r2 = x[1] * x[1] + x[2] * x[2];
    const Vec dphi{0.0, -alpha * x[1] / r2, -alpha * x[2] / r2};
    Christoffel c(3);
    for (std::size_t i = 1; i < 3; ++i)
      for (std::size_t j = 1; j < 3; ++j)
        for (std::size_t k = 1; k < 3; ++k)
          c(i, j, k) = (i == j ? dphi[k] : 0.0) + (i == k ? dphi[j] : 0.0) - (j == k ? dphi[i] : 0.0);
    return c;
  };
  g.singular.strata.push_back(
      Stratum::axis_curve(Point(3), 0, domain.lo[0], domain.hi[0], 1e-3, "zero-section"));
  g.regularity = Regularity::w11loc;
  g.claimed = {IntegrabilityClass::l1};
  return g;
}

MetricField scaled(const MetricField& g, double lambda) {
  if (!(lambda > 0)) throw DegenerateMetricError(g.chart.domain.center(), "non-positive metric scale");
  MetricField s = g;
  s.eval = [e = g.eval, lambda](const Point& x) { return lambda * e(x); };
  if (g.d_eval) s.d_eval = [d = g.d_eval, lambda](const Point& x) { return lambda * d(x); };
  return s;
}

ChartMap shear_map(double a, double delta) {
  const double d2 = delta * delta;
  auto s = [d2](double t) { return d2 == 0 ? t * std::abs(t) : t * std::sqrt(t * t + d2); };
  auto ds = [d2](double t) {
    return d2 == 0 ? 2.0 * std::abs(t) : (2.0 * t * t + d2) / std::sqrt(t * t + d2);
  };
  auto dds = [d2](double t) {
    if (d2 == 0) return 2.0 * sgn(t);
    const double q = t * t + d2;
    return t * (2.0 * t * t + 3.0 * d2) / (q * std::sqrt(q));
  };
  ChartMap m;
  m.map = [a, s](const Point& x) { return Point{x[0] + a * s(x[1]), x[1]}; };
  m.inverse = [a, s](const Point& y) { return Point{y[0] - a * s(y[1]), y[1]}; };
  m.jacobian = [a, ds](const Point& x) {
    Matrix j = Matrix::identity(2);
    j(0, 1) = a * ds(x[1]);
    return j;
  };
  m.djacobian = [a, dds](const Point& x) {
    Rank3 r(2);
    r(0, 1, 1) = a * dds(x[1]);
    return r;
  };
  if (d2 == 0) {
    m.regularity = Regularity::lipschitz;
    m.strata = [](const Box& b) {
      SingularSet ss;
      ss.strata.push_back(Stratum::axis_curve(Point(2), 0, b.lo[0], b.hi[0], 1e-3, "shear-kink"));
      return ss;
    };
  }
  return m;
}

ChartMap quadratic_bend(double eps) {
  ChartMap m;
  m.map = [eps](const Point& x) { return Point{x[0] + eps * x[1] * x[1], x[1] + eps * x[0] * x[0]}; };
  m.jacobian = [eps](const Point& x) {
    Matrix j = Matrix::identity(2);
    j(0, 1) = 2.0 * eps * x[1];
    j(1, 0) = 2.0 * eps * x[0];
    return j;
  };
  m.djacobian = [eps](const Point&) {
    Rank3 r(2);
    r(0, 1, 1) = 2.0 * eps;
    r(1, 0, 0) = 2.0 * eps;
    return r;
  };
  m.inverse = [f = m.map, jac = m.jacobian](const Point& y) {
    Point x = y;
    for (int it = 0; it < 60; ++it) {
      Matrix ji;
      if (!invert(jac(x), ji)) throw ChartDegeneracyError(x);
      const Vec step = ji * (f(x) - y);
      x -= step;
      if (step.max_abs() < 1e-16 * std::max(1.0, x.max_abs())) break;
    }
    return x;
  };
  return m;
}

MetricField pullback(const MetricField& h, const ChartMap& f, const Box& domain) {
  if (!h.singular.empty()) throw UnsupportedGeometryError("pullback requires a target metric without strata");
  if (!h.d_eval) throw UnsupportedGeometryError("pullback requires an analytic metric derivative");
  const std::size_t n = h.chart.dim;
  MetricField g;
  g.name = "pullback:" + h.name;
  g.chart = Chart::box(domain.lo, domain.hi);
  g.eval = [h, f](const Point& x) {
    const Matrix j = f.jacobian(x);
    return j.transpose() * h.eval(f.map(x)) * j;
  };
  g.d_eval = [h, f, n](const Point& x) {
    const Point y = f.map(x);
    const Matrix j = f.jacobian(x);
    const Rank3 dj = f.djacobian(x);
    const Matrix hy = h.eval(y);
    const Rank3 dh = h.d_eval(y);
    Rank3 d(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < n; ++jj) {
          double s = 0.0;
          for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
              double dhab = 0.0;
              for (std::size_t c = 0; c < n; ++c) dhab += dh(c, a, b) * j(c, k);
              s += (dj(a, i, k) * j(b, jj) + j(a, i) * dj(b, jj, k)) * hy(a, b) + j(a, i) * j(b, jj) * dhab;
            }
          d(k, i, jj) = s;
        }
    return d;
  };
  if (f.strata) g.singular = f.strata(domain);
  g.regularity = f.regularity == Regularity::smooth ? h.regularity : f.regularity;
  g.claimed.assign(g.singular.strata.size(), IntegrabilityClass::linf);
  g.kahler = false;
  return g;
}

Transition transition_from(const ChartMap& f, const Box& target) {
  Transition t;
  t.target = target;
  t.forward = f.map;
  t.inverse = f.inverse;
  t.jacobian = f.jacobian;
  if (f.djacobian) {
    // d^2 x / dy dy = -J^-1 (dJ) (J^-1, J^-1)
    t.inverse_hessian = [f](const Point& y) {
      const Point x = f.inverse(y);
      Matrix ji;
      if (!invert(f.jacobian(x), ji)) throw ChartDegeneracyError(x);
      const Rank3 dj = f.djacobian(x);
      const std::size_t n = y.size();
      Rank3 h(n);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b)
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < n; ++c) s += ji(a, b) * dj(b, i, c) * ji(i, j) * ji(c, k);
            h(a, j, k) = -s;
          }
      return h;
    };
  }
  return t;
}

// ---------------------------------------------------------------- test fields

BumpSpec bump_spec(const Point& center, double inner, double outer, const Vec& coef) {
  const std::size_t n = center.size();
  return BumpSpec{center, Vec(n, inner), Vec(n, outer), coef, Matrix(n)};
}

HalfDensityField plateau_bump(const Chart& chart, const BumpSpec& spec) {
  const std::size_t n = chart.dim;
  std::vector<PlateauProfile> prof(n);
  HalfDensityField v;
  v.chart = chart;
  v.support = Box{spec.center, spec.center};
  v.breaks.resize(n);
  double grad_beta = 0.0, reach = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (!(spec.outer[a] > spec.inner[a]) || spec.inner[a] < 0)
      throw ConfigError("field", "bump needs 0 <= inner < outer");
    prof[a] = PlateauProfile{spec.center[a], spec.inner[a], spec.outer[a]};
    v.support.lo[a] -= spec.outer[a];
    v.support.hi[a] += spec.outer[a];
    v.breaks[a] = {spec.center[a] - spec.outer[a], spec.center[a] - spec.inner[a],
                   spec.center[a] + spec.inner[a], spec.center[a] + spec.outer[a]};
    const double slope = kMaxSmoothSlope / (spec.outer[a] - spec.inner[a]);
    grad_beta += slope * slope;
    reach += spec.outer[a] * spec.outer[a];
  }
  if (!chart.domain.contains(v.support.lo, 1e-12) || !chart.domain.contains(v.support.hi, 1e-12))
    throw ConfigError("field", "bump support leaves the chart domain");
  const double lin = spec.linear.frobenius();
  v.lipschitz = std::sqrt(grad_beta) * (spec.coef.norm() + lin * std::sqrt(reach)) + lin;

  auto beta = [prof, n](const Point& x, Vec* grad) {
    double b = 1.0;
    Vec vals(n), ders(n);
    for (std::size_t a = 0; a < n; ++a) {
      vals[a] = prof[a].value(x[a]);
      ders[a] = prof[a].derivative(x[a]);
      b *= vals[a];
    }
    if (grad) {
      for (std::size_t i = 0; i < n; ++i) {
        double g = ders[i];
        for (std::size_t a = 0; a < n; ++a)
          if (a != i) g *= vals[a];
        (*grad)[i] = g;
      }
    }
    return b;
  };
  v.coeffs = [beta, spec](const Point& x) {
    return beta(x, nullptr) * (spec.coef + spec.linear * (x - spec.center));
  };
  v.jacobian = [beta, spec, n](const Point& x) {
    Vec gb(n);
    const double b = beta(x, &gb);
    const Vec c = spec.coef + spec.linear * (x - spec.center);
    Matrix d(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d(i, j) = gb[i] * c[j] + b * spec.linear(j, i);
    return d;
  };
  return v;
}

HalfDensityField radial_cutoff(const Chart& chart, const Point& x0, double eps, const Vec& a) {
  const std::size_t n = chart.dim;
  HalfDensityField v;
  v.chart = chart;
  v.support = clip(Box::cube(x0, eps), chart.domain);
  v.lipschitz = 2.0 * kMaxSmoothSlope * a.norm() / eps;
  v.breaks.resize(n);
  for (std::size_t i = 0; i < n; ++i) v.breaks[i] = {x0[i] - eps, x0[i] + eps};
  v.coeffs = [x0, eps, a](const Point& x) { return radial_profile((x - x0).norm() / eps) * a; };
  v.jacobian = [x0, eps, a, n](const Point& x) {
    const Vec d = x - x0;
    const double r = d.norm();
    Matrix m(n);
    if (r == 0) return m;
    const double c = radial_profile_derivative(r / eps) / (eps * r);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = c * d[i] * a[j];
    return m;
  };
  return v;
}

HalfDensityField tube_cutoff(const Chart& chart, const Stratum& s, double eps, std::size_t along_axis,
                             const PlateauProfile& along, const Vec& a) {
  const std::size_t n = chart.dim;
  const bool use_along = s.kind != StratumKind::point;
  if (use_along && std::find(s.constrained_axes.begin(), s.constrained_axes.end(), along_axis) !=
                       s.constrained_axes.end())
    throw ConfigError("field.along_axis", "along-axis must be a free coordinate of the stratum");
  if (s.constrained_axes.empty()) throw UnsupportedGeometryError("tube cutoff needs an axis-aligned stratum");
  HalfDensityField v;
  v.chart = chart;
  v.support = chart.domain;
  v.breaks.resize(n);
  for (std::size_t c : s.constrained_axes) {
    v.support.lo[c] = s.anchor[c] - eps;
    v.support.hi[c] = s.anchor[c] + eps;
    v.breaks[c] = {s.anchor[c] - eps, s.anchor[c] + eps};
  }
  double lip = 2.0 * kMaxSmoothSlope / eps;
  if (use_along) {
    v.support.lo[along_axis] = along.center - along.outer;
    v.support.hi[along_axis] = along.center + along.outer;
    v.breaks[along_axis] = {along.center - along.outer, along.center - along.inner, along.center + along.inner,
                            along.center + along.outer};
    lip += kMaxSmoothSlope / (along.outer - along.inner);
  }
  v.support = clip(v.support, chart.domain);
  v.lipschitz = lip * a.norm();
  v.coeffs = [s, eps, along_axis, along, use_along, a](const Point& x) {
    const double eta = use_along ? along.value(x[along_axis]) : 1.0;
    return radial_profile(s.distance(x) / eps) * eta * a;
  };
  v.jacobian = [s, eps, along_axis, along, use_along, a, n](const Point& x) {
    const double d = s.distance(x);
    const double chi = radial_profile(d / eps);
    const double eta = use_along ? along.value(x[along_axis]) : 1.0;
    Vec grad(n);
    if (d > 0) {
      const double c = radial_profile_derivative(d / eps) / (eps * d) * eta;
      for (std::size_t ax : s.constrained_axes) grad[ax] = c * (x[ax] - s.anchor[ax]);
    }
    if (use_along) grad[along_axis] += chi * along.derivative(x[along_axis]);
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = grad[i] * a[j];
    return m;
  };
  return v;
}

namespace {

double sampled_lipschitz(const Chart& chart, const std::function<Matrix(const Point&)>& jac) {
  const std::size_t n = chart.dim;
  const int m = 41;
  double best = 0.0;
  std::vector<int> idx(n, 0);
  while (true) {
    Point x(n);
    for (std::size_t a = 0; a < n; ++a)
      x[a] = chart.domain.lo[a] + (chart.domain.hi[a] - chart.domain.lo[a]) * idx[a] / (m - 1.0);
    best = std::max(best, jac(x).frobenius());
    std::size_t a = 0;
    while (a < n && ++idx[a] == m) idx[a++] = 0;
    if (a == n) break;
  }
  return 1.1 * best;
}

}  // namespace

HalfDensityField sphere_rotation_field(const Chart& chart, double r0) {
  HalfDensityField v;
  v.chart = chart;
  v.compact = false;
  v.support = chart.domain;
  v.coeffs = [r0](const Point& x) {
    const double w = 2.0 * r0 / (1.0 + x.dot(x));
    return Vec{-w * x[1], w * x[0]};
  };
  v.jacobian = [r0](const Point& x) {
    const double q = 1.0 + x.dot(x);
    const double w = 2.0 * r0 / q;
    const double c = -4.0 * r0 / (q * q);
    Matrix m(2);
    for (std::size_t i = 0; i < 2; ++i) {
      m(i, 0) = -c * x[i] * x[1];
      m(i, 1) = c * x[i] * x[0];
    }
    m(0, 1) += w;
    m(1, 0) -= w;
    return m;
  };
  v.lipschitz = sampled_lipschitz(chart, v.jacobian);
  return v;
}

HalfDensityField flat_rotation_field(const Chart& chart) {
  HalfDensityField v;
  v.chart = chart;
  v.compact = false;
  v.support = chart.domain;
  v.lipschitz = 1.0;
  v.coeffs = [](const Point& x) { return Vec{-x[1], x[0]}; };
  v.jacobian = [](const Point&) {
    Matrix m(2);
    m(0, 1) = 1.0;
    m(1, 0) = -1.0;
    return m;
  };
  return v;
}

}  // namespace ricci
