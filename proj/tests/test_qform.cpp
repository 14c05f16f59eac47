#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ricci/builtins.hpp"
#include "ricci/qform.hpp"

using namespace ricci;

namespace {

constexpr double pi = std::numbers::pi;

HalfDensityField random_bump(const Chart& chart, std::mt19937& rng, double spread = 0.3) {
  std::uniform_real_distribution<double> c(-spread, spread), a(-1.0, 1.0);
  const std::size_t n = chart.dim;
  Point center(n);
  Vec coef(n);
  for (std::size_t i = 0; i < n; ++i) {
    center[i] = c(rng);
    coef[i] = a(rng);
  }
  BumpSpec s = bump_spec(center, 0.15, 0.45, coef);
  Matrix lin(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) lin(i, j) = a(rng);
  s.linear = lin;
  return plateau_bump(chart, s);
}

Chart chart_of(const MetricField& g) { return g.chart; }

}  // namespace

TEST_CASE("pointwise split reproduces the direct integrand") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : {2u, 3u}) {
    for (int trial = 0; trial < 20; ++trial) {
      Christoffel g(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = j; k < n; ++k) g(i, j, k) = g(i, k, j) = u(rng);
      Vec v(n), w(n);
      Matrix dv(n), dw(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = u(rng);
        w[i] = u(rng);
        for (std::size_t j = 0; j < n; ++j) {
          dv(i, j) = u(rng);
          dw(i, j) = u(rng);
        }
      }
      const QIntegrand q = q_integrand(g, v, dv, w, dw);
      CHECK(q.direct == doctest::Approx(q.dd + q.q1 + q.q2).epsilon(1e-12));
    }
  }
}

TEST_CASE("flat connection gives zero") {
  const MetricField g = flat(2, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  std::mt19937 rng(1);
  for (int i = 0; i < 4; ++i) {
    const QResult q = q_form(gamma, random_bump(g.chart, rng), random_bump(g.chart, rng), {});
    CHECK(std::abs(q.value) < 1e-9);
    CHECK(std::abs(q.q1 + q.q2) < 1e-9);
  }
}

TEST_CASE("one-dimensional charts give zero") {
  const MetricField g = conformal(phi_gaussian(1, 0.7, 0.5), default_box(1));
  const ChristoffelField gamma = christoffel_from_metric(g);
  const HalfDensityField v = plateau_bump(g.chart, bump_spec(Point{0.1}, 0.2, 0.6, Vec{1.0}));
  const HalfDensityField w = plateau_bump(g.chart, bump_spec(Point{-0.1}, 0.2, 0.5, Vec{-2.0}));
  CHECK(std::abs(q_form(gamma, v, w, {}).value) < 1e-10);
}

TEST_CASE("round sphere: Q against the closed-form curvature density") {
  // K = 1 / r0^2 and sqrt(det g) = 4 r0^2 / (1 + |x|^2)^2, so the pairing
  // density of v.w is 4 / (1 + |x|^2)^2 independent of r0.
  for (double r0 : {1.0, 2.0}) {
    const MetricField g = sphere_chart(r0, default_box(2));
    const ChristoffelField gamma = christoffel_from_metric(g);
    std::mt19937 rng(11);
    const HalfDensityField v = random_bump(g.chart, rng), w = random_bump(g.chart, rng);
    const Box box = pairing_box(v, w);
    QuadratureScheme s;
    s.rel_tol = 1e-9;
    const IntegralResult ref = integrate(scalar_integrand([&](const Point& x) {
                                           const double q = 1.0 + x.dot(x);
                                           return 4.0 / (q * q) * v.value(x).dot(w.value(x));
                                         }),
                                         box, s, {}, merge_breakpoints(v.breaks, w.breaks));
    const QResult q = q_form(gamma, v, w, s);
    CHECK(q.value == doctest::Approx(ref.value).epsilon(1e-6));
    CHECK(q.q1 + q.q2 == doctest::Approx(ref.value).epsilon(1e-6));
    const QResult o = smooth_ricci_oracle(gamma, v, w, s);
    CHECK(o.value == doctest::Approx(ref.value).epsilon(1e-6));
  }
}

TEST_CASE("smooth oracle agrees on a Gaussian conformal metric in 3D") {
  const MetricField g = conformal(phi_gaussian(3, 0.4, 0.8), default_box(3));
  const ChristoffelField gamma = christoffel_from_metric(g);
  std::mt19937 rng(5);
  QuadratureScheme s;
  s.rel_tol = 1e-8;
  const HalfDensityField v = random_bump(g.chart, rng), w = random_bump(g.chart, rng);
  const QResult q = q_form(gamma, v, w, s);
  const QResult o = smooth_ricci_oracle(gamma, v, w, s);
  CHECK(std::abs(q.value - o.value) <= std::max(1e-5 * std::abs(q.value), 1e-7));
}

TEST_CASE("smooth oracle refuses singular supports") {
  const MetricField g = cone(2, 0.5, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  const HalfDensityField v = radial_cutoff(g.chart, Point(2), 0.5, Vec{1.0, 0.0});
  CHECK_THROWS_AS(smooth_ricci_oracle(gamma, v, v, {}), OracleIneligibleError);
}

TEST_CASE("cone vertex carries 2 pi alpha |a|^2") {
  for (double alpha : {0.5, -0.5}) {
    const MetricField g = cone(2, alpha, default_box(2));
    const ChristoffelField gamma = christoffel_from_metric(g);
    const HalfDensityField v = radial_cutoff(g.chart, Point(2), 0.5, Vec{0.6, 0.8});
    const QResult q = q_form(gamma, v, v, {});
    CHECK(q.value == doctest::Approx(2.0 * pi * alpha).epsilon(1e-3));
    REQUIRE(q.verdict);
    CHECK(q.verdict->tame());
  }
}

TEST_CASE("edge line density 2c") {
  const double c = 0.8;
  const MetricField g = edge(c, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  const HalfDensityField v = radial_cutoff(g.chart, Point{0.0, 0.1}, 0.6, Vec{1.0, 0.0});
  const double line = integrate_1d([](double s) { return std::pow(radial_profile(std::abs(s) / 0.6), 2); }, -0.6,
                                   0.6, {}, {0.0});
  const QResult q = q_form(gamma, v, v, {});
  CHECK(q.value == doctest::Approx(2.0 * c * line).epsilon(1e-3));
}

TEST_CASE("Alexandrov pairing reproduces Q on conformal metrics") {
  const HalfDensityField base = radial_cutoff(Chart::box(Point{-1, -1}, Point{1, 1}), Point(2), 0.5, Vec{1.0, 0.5});
  SUBCASE("cone atom") {
    const AlexandrovResult a = alexandrov_q(phi_cone(2, 0.25), base, base, {});
    CHECK(a.atoms == doctest::Approx(2.0 * pi * 0.25 * 1.25).epsilon(1e-12));
    CHECK(std::abs(a.ac) < 1e-8);
  }
  SUBCASE("sphere, absolutely continuous") {
    const MetricField g = sphere_chart(1.0, default_box(2));
    const AlexandrovResult a = alexandrov_q(phi_sphere(1.0), base, base, {});
    const QResult q = q_form(christoffel_from_metric(g), base, base, {});
    CHECK(a.value == doctest::Approx(q.value).epsilon(1e-5));
    CHECK(a.atoms == 0.0);
  }
  SUBCASE("missing Laplacian") {
    ConformalFactor phi = phi_cone(2, 0.5);
    phi.hessian = nullptr;
    CHECK_THROWS_AS(alexandrov_q(phi, base, base, {}), Error);
  }
}

TEST_CASE("Bakry-Emery correction") {
  const MetricField g = flat(2, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  std::mt19937 rng(3);
  const HalfDensityField v = random_bump(g.chart, rng), w = random_bump(g.chart, rng);
  QuadratureScheme s;
  s.rel_tol = 1e-9;
  const IntegralResult vw = integrate(scalar_integrand([&](const Point& x) { return v.value(x).dot(w.value(x)); }),
                                      pairing_box(v, w), s, {}, merge_breakpoints(v.breaks, w.breaks));
  SUBCASE("half square weight gives the L2 pairing") {
    const QResult q = bakry_emery_q(gamma, weight_half_square(2), v, w, s);
    CHECK(q.value == doctest::Approx(vw.value).epsilon(1e-6));
    REQUIRE(q.cross_check);
    CHECK(*q.cross_check == doctest::Approx(vw.value).epsilon(1e-6));
  }
  SUBCASE("affine weights add nothing") {
    CHECK(std::abs(bakry_emery_q(gamma, weight_linear(Vec{0.3, -1.2}), v, w, s).value) < 1e-8);
    CHECK(std::abs(bakry_emery_q(gamma, weight_constant(4.0), v, w, s).value) < 1e-9);
  }
  SUBCASE("curved metric with a finite-difference weight") {
    const MetricField sph = sphere_chart(1.0, default_box(2));
    WeightFunction f;
    f.f = [](const Point& x) { return std::sin(x[0]) * x[1] + x[0] * x[0]; };
    const QResult q = bakry_emery_q(christoffel_from_metric(sph), f, v, w, s);
    REQUIRE(q.cross_check);
    CHECK(q.value == doctest::Approx(*q.cross_check).epsilon(1e-5));
    CHECK(q.fd_fallback);
  }
}

TEST_CASE("Kahler form on complex dimension one") {
  const Chart ch = Chart::box(Point{-1, -1}, Point{1, 1});
  std::mt19937 rng(9);
  const HalfDensityField v = random_bump(ch, rng), w = random_bump(ch, rng);
  SUBCASE("harmonic potential is flat") {
    const KahlerResult k = kahler_q(kahler1d(phi_harmonic(0.3, 0.2), default_box(2)), v, w, {});
    CHECK(std::abs(k.value) < 1e-7);
    CHECK(std::abs(k.cross_check) < 1e-7);
  }
  SUBCASE("Gaussian potential matches the real decomposition") {
    QuadratureScheme s;
    s.rel_tol = 1e-8;
    const KahlerResult k = kahler_q(kahler1d(phi_gaussian(2, 0.5, 0.7), default_box(2)), v, w, s);
    CHECK(std::abs(k.value) > 1e-3);
    CHECK(std::abs(k.value - k.cross_check) < 1e-5 * std::abs(k.value));
  }
  SUBCASE("untagged metric") {
    CHECK_THROWS_AS(kahler_q(sphere_chart(1.0, default_box(2)), v, w, {}), UnsupportedGeometryError);
  }
}

TEST_CASE("Killing defect") {
  const MetricField g = flat(2, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  const Chart ch = chart_of(g);
  HalfDensityField c;
  c.chart = ch;
  c.compact = false;
  c.support = ch.domain;
  c.coeffs = [](const Point&) { return Vec{1.0, -2.0}; };
  c.jacobian = [](const Point&) { return Matrix(2); };
  CHECK(killing_defect(g, gamma, c, ch.domain).defect == 0.0);
  CHECK(killing_defect(g, gamma, flat_rotation_field(ch), ch.domain).defect < 1e-12);

  HalfDensityField s = c;
  s.coeffs = [](const Point& x) { return Vec{x[0], 0.0}; };
  s.jacobian = [](const Point&) {
    Matrix m(2);
    m(0, 0) = 1.0;
    return m;
  };
  CHECK(killing_defect(g, gamma, s, ch.domain).defect == doctest::Approx(2.0));

  const MetricField sph = sphere_chart(1.5, default_box(2));
  const KillingResult k =
      killing_defect(sph, christoffel_from_metric(sph), sphere_rotation_field(sph.chart, 1.5), sph.chart.domain);
  CHECK(k.defect < 1e-6);
}

TEST_CASE("bilinearity and symmetry") {
  const MetricField g = sphere_chart(1.0, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  std::mt19937 rng(21);
  QuadratureScheme s;
  s.rel_tol = 1e-9;
  const HalfDensityField a = random_bump(g.chart, rng), b = random_bump(g.chart, rng),
                         w = random_bump(g.chart, rng);
  const double qa = q_form(gamma, a, w, s).value, qb = q_form(gamma, b, w, s).value;
  const double qab = q_form(gamma, combine(2.0, a, -0.5, b), w, s).value;
  CHECK(qab == doctest::Approx(2.0 * qa - 0.5 * qb).epsilon(1e-7));
  CHECK(q_form(gamma, w, a, s).value == doctest::Approx(qa).epsilon(1e-8));
}

TEST_CASE("chart invariance under a smooth bend") {
  const Box box = default_box(2, 1.2);
  const MetricField g = sphere_chart(1.0, box);
  const ChristoffelField gamma = christoffel_from_metric(g);
  const ChartMap bend = quadratic_bend(0.15);
  const Transition t = transition_from(bend, default_box(2, 1.6));
  const ChristoffelField gy = christoffel_transform(gamma, t);
  const HalfDensityField v = plateau_bump(g.chart, bump_spec(Point{0.1, -0.05}, 0.2, 0.5, Vec{1.0, 0.3}));
  const HalfDensityField w = plateau_bump(g.chart, bump_spec(Point{-0.1, 0.05}, 0.2, 0.5, Vec{-0.4, 1.0}));
  const QResult qx = q_form(gamma, v, w, {});
  const QResult qy = q_form(gy, transport_half_density(v, t), transport_half_density(w, t), {});
  CHECK(qy.value == doctest::Approx(qx.value).epsilon(1e-3));
}

TEST_CASE("lower-bound margin and witness") {
  const MetricField g = sphere_chart(1.0, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(g);
  const HalfDensityField v = radial_cutoff(g.chart, Point(2), 0.7, Vec{1.0, 0.0});
  CHECK(lower_bound_margin(gamma, zero_witness(2), v, {}) > 0.0);
  LowerBoundWitness bad{[](const Point&) { return Matrix(2, -1.0); }};
  CHECK_THROWS_AS(bad.check(default_box(2)), Error);
}

TEST_CASE("bounded perturbations move Q linearly in the sup norm") {
  const Box box = default_box(2);
  const ChristoffelField gamma = christoffel_from_metric(flat(2, box));
  const Chart ch = Chart::box(box.lo, box.hi);
  std::vector<ConnectionPerturbation> ts;
  for (double r : {1.0, 2.0, 4.0, 8.0, 16.0})
    ts.push_back({ch,
                  [r](const Point& x) {
                    Rank3 t(2);
                    t(0, 1, 1) = 0.5 * (1.0 + x[0]) / r;
                    return t;
                  },
                  1.0 / r});
  const HalfDensityField v = plateau_bump(ch, bump_spec(Point{0.0, 0.0}, 0.2, 0.6, Vec{0.0, 1.0}));
  const PerturbationSeries p = q_convergence_under_perturbation(gamma, ts, v, v, {});
  // With flat Gamma the shift is int d_0 t (v^1)^2 = 0.5 |v^1|^2_{L2} / r.
  const double l2 = integrate(scalar_integrand([&](const Point& x) { return std::pow(v.value(x)[1], 2); }),
                              pairing_box(v, v), {}, {}, v.breaks)
                        .value;
  CHECK(p.r_squared > 0.999);
  CHECK(p.slope == doctest::Approx(0.5 * l2).epsilon(1e-4));
}

TEST_CASE("bounded perturbations of the cone") {
  const Box box = default_box(2);
  const ChristoffelField gamma = christoffel_from_metric(cone(2, 0.5, box));
  const Chart ch = Chart::box(box.lo, box.hi);
  std::vector<ConnectionPerturbation> ts;
  for (double r : {1.0, 2.0, 4.0, 8.0, 16.0})
    ts.push_back({ch,
                  [r](const Point& x) {
                    Rank3 t(2);
                    t(0, 1, 1) = 0.5 * (1.0 + x[0]) / r;
                    return t;
                  },
                  1.0 / r});
  const HalfDensityField v = radial_cutoff(ch, Point(2), 0.6, Vec{0.3, 1.0});
  const PerturbationSeries p = q_convergence_under_perturbation(gamma, ts, v, v, {});
  CHECK(p.baseline.value == doctest::Approx(2.0 * pi * 0.5 * 1.09).epsilon(1e-3));
  CHECK(p.r_squared > 0.99);
  CHECK(std::abs(p.intercept) < 1e-3 * std::abs(p.slope));
}

TEST_CASE("linear fit") {
  const auto f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f[0] == doctest::Approx(2.0));
  CHECK(f[1] == doctest::Approx(1.0));
  CHECK(f[2] == doctest::Approx(1.0));
}
