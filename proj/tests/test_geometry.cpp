#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ricci/builtins.hpp"
#include "ricci/geometry.hpp"

using namespace ricci;

namespace {

Point random_point(std::mt19937_64& rng, const Box& b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(b.dim());
  for (std::size_t a = 0; a < b.dim(); ++a) x[a] = b.lo[a] + u(rng) * (b.hi[a] - b.lo[a]);
  return x;
}

double max_diff(const Rank3& a, const Rank3& b) { return (a - b).max_abs(); }

// Hand-written conformal Christoffels, independent of the library closures.
Christoffel conformal_by_hand(const Vec& d) {
  const std::size_t n = d.size();
  Christoffel g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        double v = 0.0;
        if (i == j) v += d[k];
        if (i == k) v += d[j];
        if (j == k) v -= d[i];
        g(i, j, k) = v;
      }
  return g;
}

MetricField polar_flat() {
  MetricField g;
  g.name = "polar";
  g.chart = Chart::box(Point{0.5, -1.0}, Point{1.5, 1.0});
  g.eval = [](const Point& x) {
    Matrix m(2, 1.0);
    m(1, 1) = x[0] * x[0];
    return m;
  };
  return g;
}

}  // namespace

TEST_CASE("flat metric has vanishing Christoffels") {
  const MetricField g = flat(3, default_box(3));
  for (auto kind : {ChristoffelScheme::Kind::analytic, ChristoffelScheme::Kind::finite_difference}) {
    const ChristoffelField c = christoffel_from_metric(g, {kind});
    CHECK(c.at(Point{0.3, -0.2, 0.1}).max_abs() == doctest::Approx(0.0));
  }
}

TEST_CASE("finite-difference Christoffels of a Gaussian conformal factor match the closed form") {
  const Box box = default_box(2);
  MetricField g;
  g.name = "gauss-raw";
  g.chart = Chart::box(box.lo, box.hi);
  g.eval = [](const Point& x) { return Matrix(2, std::exp(2.0 * std::exp(-x.dot(x)))); };
  const ChristoffelField fd = christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference});
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Point x = random_point(rng, Box::cube(Point(2), 0.9));
    const Vec d = (-2.0 * std::exp(-x.dot(x))) * x;
    worst = std::max(worst, max_diff(fd.at(x), conformal_by_hand(d)));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("cone family fiber Christoffels") {
  const double alpha = 0.3;
  const MetricField g = cone_family_trivial(alpha, 2.0);
  const ChristoffelField an = christoffel_from_metric(g);
  const ChristoffelField fd = christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference});
  std::mt19937_64 rng(11);
  for (int s = 0; s < 50; ++s) {
    Point x = random_point(rng, g.chart.domain);
    if (std::hypot(x[1], x[2]) < 0.2) continue;
    const double r2 = x[1] * x[1] + x[2] * x[2];
    Christoffel want(3);
    // -alpha/|x|^2 (x_k d^i_j + x^j d^i_k - x^i d_jk) on fiber indices
    for (std::size_t i = 1; i < 3; ++i)
      for (std::size_t j = 1; j < 3; ++j)
        for (std::size_t k = 1; k < 3; ++k)
          want(i, j, k) = -alpha / r2 * ((i == j ? x[k] : 0.0) + (i == k ? x[j] : 0.0) - (j == k ? x[i] : 0.0));
    CHECK(max_diff(an.at(x), want) < 1e-12);
    CHECK(max_diff(fd.at(x), want) < 1e-6);
  }
}

TEST_CASE("Christoffel symbols are exactly torsion free") {
  const MetricField g = pullback(sphere_chart(1.0, default_box(2)), quadratic_bend(0.2), default_box(2, 0.8));
  const ChristoffelField c = christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference});
  std::mt19937_64 rng(3);
  for (int s = 0; s < 20; ++s) {
    const Christoffel v = c.at(random_point(rng, g.chart.domain));
    for (std::size_t i = 0; i < 2; ++i) CHECK(v(i, 0, 1) == v(i, 1, 0));
  }
}

TEST_CASE("metric compatibility on smooth samples") {
  const MetricField g = sphere_chart(1.3, default_box(2));
  const ChristoffelField c = christoffel_from_metric(g);
  std::mt19937_64 rng(5);
  for (int s = 0; s < 30; ++s) {
    const Point x = random_point(rng, g.chart.domain);
    const Rank3 dg = metric_derivative_fd(g.eval, x, 1e-4, true);
    const Matrix m = g.eval(x);
    const Christoffel G = c.at(x);
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) {
          double r = dg(k, i, j);
          for (std::size_t l = 0; l < 2; ++l) r -= G(l, i, k) * m(l, j) + G(l, j, k) * m(i, l);
          worst = std::max(worst, std::abs(r));
        }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("finite-difference Christoffels converge at second order without Richardson") {
  const MetricField g = conformal(phi_gaussian(2, 1.0, 1.0), default_box(2));
  const Point x{0.4, -0.3};
  const Christoffel exact = g.christoffel_eval(x);
  auto err = [&](double h) {
    return max_diff(christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference, h, false}).at(x), exact);
  };
  const double ratio = err(1e-2) / err(5e-3);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
  auto err_r = [&](double h) {
    return max_diff(christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference, h, true}).at(x), exact);
  };
  CHECK(err_r(4e-2) / err_r(2e-2) == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("degenerate and singular evaluation errors") {
  MetricField g = flat(2, default_box(2));
  g.eval = [](const Point& x) {
    Matrix m(2, 1.0);
    m(1, 1) = x[0] > 0.5 ? 0.0 : 1.0;
    return m;
  };
  g.christoffel_eval = nullptr;
  const ChristoffelField c = christoffel_from_metric(g, {ChristoffelScheme::Kind::finite_difference});
  CHECK_THROWS_AS(c.at(Point{0.9, 0.0}), DegenerateMetricError);

  MetricField cone_fd = cone(2, 0.5, default_box(2));
  cone_fd.christoffel_eval = nullptr;
  const ChristoffelField cf = christoffel_from_metric(cone_fd, {ChristoffelScheme::Kind::finite_difference});
  CHECK_THROWS_AS(cf.at(Point{1e-4, 0.0}), SingularEvaluationError);
  CHECK_NOTHROW(cf.at(Point{0.5, 0.0}));

  MetricField bare = flat(2, default_box(2));
  bare.d_eval = nullptr;
  bare.christoffel_eval = nullptr;
  CHECK_THROWS_AS(christoffel_from_metric(bare), Error);
}

TEST_CASE("christoffel_transform: identity, linear and polar transitions") {
  const Box box = default_box(2);
  const ChristoffelField gauss = christoffel_from_metric(conformal(phi_gaussian(2, 0.5, 1.0), box));
  Transition id;
  id.target = box;
  id.forward = [](const Point& x) { return x; };
  id.inverse = [](const Point& y) { return y; };
  id.jacobian = [](const Point&) { return Matrix::identity(2); };
  const ChristoffelField same = christoffel_transform(gauss, id);
  CHECK(max_diff(same.at(Point{0.3, 0.2}), gauss.at(Point{0.3, 0.2})) < 1e-12);

  const ChristoffelField zero = christoffel_from_metric(flat(2, box));
  Transition lin;
  lin.target = Box{Point{-3, -3}, Point{3, 3}};
  lin.forward = [](const Point& x) { return Point{2 * x[0] + x[1], x[0] - x[1]}; };
  lin.inverse = [](const Point& y) { return Point{(y[0] + y[1]) / 3.0, (y[0] - 2 * y[1]) / 3.0}; };
  lin.jacobian = [](const Point&) {
    Matrix j(2);
    j(0, 0) = 2;
    j(0, 1) = 1;
    j(1, 0) = 1;
    j(1, 1) = -1;
    return j;
  };
  CHECK(christoffel_transform(zero, lin).at(Point{0.4, 0.1}).max_abs() < 1e-9);

  // Cartesian -> polar: the transformed zero connection equals the polar Christoffels.
  const MetricField pol = polar_flat();
  const ChristoffelField pol_fd = christoffel_from_metric(pol, {ChristoffelScheme::Kind::finite_difference});
  Transition to_polar;
  to_polar.target = pol.chart.domain;
  to_polar.forward = [](const Point& x) { return Point{std::hypot(x[0], x[1]), std::atan2(x[1], x[0])}; };
  to_polar.inverse = [](const Point& y) { return Point{y[0] * std::cos(y[1]), y[0] * std::sin(y[1])}; };
  to_polar.jacobian = [](const Point& x) {
    const double r2 = x.dot(x), r = std::sqrt(r2);
    Matrix j(2);
    j(0, 0) = x[0] / r;
    j(0, 1) = x[1] / r;
    j(1, 0) = -x[1] / r2;
    j(1, 1) = x[0] / r2;
    return j;
  };
  const ChristoffelField moved = christoffel_transform(zero, to_polar);
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    const Point y = random_point(rng, Box{Point{0.6, -0.9}, Point{1.4, 0.9}});
    worst = std::max(worst, max_diff(moved.at(y), pol_fd.at(y)));
    Christoffel want(2);
    want(0, 1, 1) = -y[0];
    want(1, 0, 1) = want(1, 1, 0) = 1.0 / y[0];
    worst = std::max(worst, max_diff(moved.at(y), want));
  }
  CHECK(worst < 1e-6);

  Transition bad = id;
  bad.jacobian = [](const Point&) { return Matrix(2); };
  CHECK_THROWS_AS(christoffel_transform(gauss, bad).at(Point{0.1, 0.1}), ChartDegeneracyError);
}

TEST_CASE("half-density covariant derivative examples") {
  const Box box = default_box(2);
  const Chart chart = Chart::box(box.lo, box.hi);
  const ChristoffelField zero = christoffel_from_metric(flat(2, box));
  HalfDensityField c;
  c.chart = chart;
  c.compact = false;
  c.support = box;
  c.coeffs = [](const Point&) { return Vec{0.7, -0.2}; };
  CHECK(half_density_covariant_derivative(zero, c, Point{0.1, 0.2}).max_abs() < 1e-9);
  HalfDensityField lin = c;
  lin.coeffs = [](const Point& x) { return x; };
  const Matrix d = half_density_covariant_derivative(zero, lin, Point{0.1, 0.2});
  CHECK((d - Matrix::identity(2)).max_abs() < 1e-8);

  // Cone alpha = 0.5 at (1, 0) with v = (1, 0), evaluated by hand.
  const ChristoffelField cone_g = christoffel_from_metric(cone(2, 0.5, box));
  HalfDensityField e1 = c;
  e1.coeffs = [](const Point&) { return Vec{1.0, 0.0}; };
  const Matrix dc = half_density_covariant_derivative(cone_g, e1, Point{1.0, 0.0});
  CHECK(dc(0, 0) == doctest::Approx(0.0));
  CHECK(dc(0, 1) == doctest::Approx(0.0));
  CHECK(dc(1, 0) == doctest::Approx(0.0));
  CHECK(dc(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("perturbation") {
  const Box box = default_box(2);
  const Chart chart = Chart::box(box.lo, box.hi);
  const ChristoffelField zero = christoffel_from_metric(flat(2, box));
  Rank3 t0(2);
  t0(0, 0, 1) = t0(0, 1, 0) = 0.3;
  t0(1, 1, 1) = -0.2;
  const ConnectionPerturbation T{chart, [t0](const Point&) { return t0; }, 0.3};
  CHECK(max_diff(perturb(zero, T).at(Point{0.2, 0.1}), t0) < 1e-15);
  const ConnectionPerturbation none{chart, [](const Point&) { return Rank3(2); }, 0.0};
  const ChristoffelField cg = christoffel_from_metric(cone(2, 0.5, box));
  CHECK(max_diff(perturb(cg, none).at(Point{0.2, 0.1}), cg.at(Point{0.2, 0.1})) == 0.0);
  const ChristoffelField pc = perturb(cg, T);
  CHECK(pc.claimed.front() == IntegrabilityClass::l1);
  const ConnectionPerturbation other{Chart::box(Point{0, 0}, Point{1, 1}), T.eval, 0.3};
  CHECK_THROWS_AS(perturb(zero, other), ChartMismatchError);
}

TEST_CASE("test fields honour their declared Lipschitz bounds and vanish on the support boundary") {
  const Box box = default_box(2);
  const Chart chart = Chart::box(box.lo, box.hi);
  BumpSpec spec = bump_spec(Point{0.1, -0.1}, 0.2, 0.6, Vec{1.0, -0.5});
  spec.linear(0, 1) = 0.8;
  const HalfDensityField b = plateau_bump(chart, spec);
  CHECK(check_half_density(b, 1, 2000).ok);
  const HalfDensityField r = radial_cutoff(chart, Point{0.0, 0.0}, 0.3, Vec{1.0, 0.0});
  CHECK(check_half_density(r, 2, 2000).ok);
  const Stratum edge = Stratum::axis_curve(Point(2), 1, -1, 1, 1e-3);
  const HalfDensityField t = tube_cutoff(chart, edge, 0.2, 1, PlateauProfile{0.0, 0.2, 0.5}, Vec{0.0, 1.0});
  CHECK(check_half_density(t, 3, 2000).ok);
  // Analytic Jacobians agree with central differences.
  for (const HalfDensityField* f : {&b, &r, &t}) {
    HalfDensityField fd = *f;
    fd.jacobian = nullptr;
    fd.fd_step = 1e-5;
    const Point x{0.13, -0.07};
    CHECK((f->derivative(x) - fd.derivative(x)).max_abs() < 1e-6);
  }
  CHECK_THROWS_AS(plateau_bump(chart, bump_spec(Point{0.9, 0.0}, 0.1, 0.3, Vec{1, 0})), ConfigError);
}

TEST_CASE("chart validation and singular-set bookkeeping") {
  Chart c = Chart::box(Point{0, 0}, Point{1, 0});
  CHECK_THROWS_AS(c.validate(), Error);
  Chart ok = Chart::box(Point{-1, -1}, Point{1, 1});
  ok.transition = transition_from(quadratic_bend(0.1), Box{Point{-2, -2}, Point{2, 2}});
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS(Stratum::point(Point{0, 0}, 0.0), Error);
  SingularSet s;
  s.strata.push_back(Stratum::point(Point{3, 0}, 0.1));
  CHECK_THROWS_AS(s.validate(ok), Error);
  const Stratum curve = Stratum::axis_curve(Point{0, 0.5}, 0, -1, 1, 0.01);
  CHECK(curve.distance(Point{0.3, 0.2}) == doctest::Approx(0.3));
  CHECK(curve.curve_axis().value() == 0);
  CHECK(curve.frames.front()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("transported half-densities keep their pointwise pairing density") {
  const Box box = default_box(2, 0.6);
  const Chart chart = Chart::box(box.lo, box.hi);
  const ChartMap bend = quadratic_bend(0.15);
  const Transition t = transition_from(bend, Box{Point{-1.5, -1.5}, Point{1.5, 1.5}});
  const HalfDensityField v = plateau_bump(chart, bump_spec(Point{0, 0}, 0.1, 0.5, Vec{1.0, 0.4}));
  const HalfDensityField moved = transport_half_density(v, t);
  // |v|^2_h dx is invariant when h = (J^-1)^T J^-1 pulls back the flat metric.
  const Point x{0.2, -0.15};
  const Point y = bend.map(x);
  const Matrix j = bend.jacobian(x);
  Matrix ji;
  REQUIRE(invert(j, ji));
  const Vec vx = v.value(x), vy = moved.value(y);
  const double lhs = vx.dot(vx);
  const Matrix h = ji.transpose() * ji;
  const double rhs = h.bilinear(vy, vy) * std::abs(determinant(j));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
