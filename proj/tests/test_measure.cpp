#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ricci/builtins.hpp"
#include "ricci/measure.hpp"

using namespace ricci;

namespace {

constexpr double pi = std::numbers::pi;

ChristoffelField connection(const MetricField& g) { return christoffel_from_metric(g); }

}  // namespace

TEST_CASE("ladder extrapolation") {
  LadderTrace t;
  for (int k = 0; k < 5; ++k) {
    t.values.push_back(1.5 + 0.8 * std::pow(0.5, k));
    t.errors.push_back(0.0);
  }
  const Extraction ex = extrapolate_ladder(t, 1e-12);
  CHECK(ex.detected);
  CHECK(ex.value == doctest::Approx(1.5).epsilon(1e-12));

  LadderTrace bad;
  for (double v : {1.0, 0.0, 2.0, -1.0, 3.0}) {
    bad.values.push_back(v);
    bad.errors.push_back(0.0);
  }
  CHECK_FALSE(extrapolate_ladder(bad, 1e-12).detected);
}

TEST_CASE("flat metric has no atom") {
  const ChristoffelField g = connection(flat(2, default_box(2)));
  const Extraction ex = singular_mass_at(g, Point{0.1, -0.2}, Vec{1, 0}, Vec{0, 1}, {}, {});
  CHECK(std::abs(ex.value) < 1e-9);
}

TEST_CASE("cone atom") {
  const ChristoffelField g = connection(cone(2, 0.5, default_box(2)));
  const Extraction e11 = singular_mass_at(g, Point(2), Vec{1, 0}, Vec{1, 0}, {}, {});
  CHECK(e11.detected);
  CHECK(e11.value == doctest::Approx(pi).epsilon(1e-2));
  const Extraction e12 = singular_mass_at(g, Point(2), Vec{1, 0}, Vec{0, 1}, {}, {});
  const Extraction e21 = singular_mass_at(g, Point(2), Vec{0, 1}, Vec{1, 0}, {}, {});
  CHECK(std::abs(e12.value) < 1e-6);
  CHECK(std::abs(e12.value - e21.value) <= e12.ci + e21.ci);

  Ladder half;
  half.eps0 = 0.25;
  const Extraction h = singular_mass_at(g, Point(2), Vec{1, 0}, Vec{1, 0}, half, {});
  CHECK(std::abs(h.value - e11.value) <= std::max(h.ci, e11.ci));
}

TEST_CASE("three-dimensional cone carries no vertex atom") {
  const ChristoffelField g = connection(cone(3, 0.5, default_box(3)));
  QuadratureScheme s;
  s.rel_tol = 1e-4;
  const Extraction ex = singular_mass_at(g, Point(3), Vec{1, 0, 0}, Vec{1, 0, 0}, {}, s);
  CHECK(ex.detected);
  CHECK(std::abs(ex.value) < 1e-3 * pi);
  // Ladder values shrink like eps.
  CHECK(ex.trace.values[1] / ex.trace.values[0] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("absolutely continuous density") {
  SUBCASE("round sphere chart") {
    const MetricField m = sphere_chart(1.0, default_box(2));
    const AcGrid grid = ac_density_grid(connection(m), default_box(2, 0.9), 5);
    REQUIRE(grid.points.size() == 25);
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
      const Matrix g = m.eval(grid.points[i]);
      CHECK((grid.values[i] - g).max_abs() < 1e-3 * g.max_abs());
    }
  }
  SUBCASE("cone annulus is flat") {
    const AcGrid grid = ac_density_grid(connection(cone(2, 0.5, default_box(2))), Box{Point{0.5, 0.5}, Point{0.7, 0.7}}, 4);
    for (const Matrix& r : grid.values) CHECK(r.max_abs() < 1e-6);
  }
  SUBCASE("grid through the vertex") {
    CHECK_THROWS_AS(ac_density_grid(connection(cone(2, 0.5, default_box(2))), default_box(2), 3), SingularEvaluationError);
  }
}

TEST_CASE("edge line density") {
  const MetricField m = edge(1.0, default_box(2));
  const ChristoffelField g = connection(m);
  CurveOptions opt;
  opt.samples = 2;
  const CurveDensity d = curve_density_along(g, m.singular.strata.front(), opt, {}, {});
  CHECK(d.detected);
  for (double v : d.normal) CHECK(v == doctest::Approx(2.0).epsilon(0.02));
  for (double v : d.tangential) CHECK(v == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("glued truncated cones") {
  const double L = 2.0;
  const MetricField m = glued_cones(0.5, L);
  CurveOptions opt;
  opt.samples = 1;
  Ladder lad;
  lad.eps0 = 0.4;
  const CurveDensity d = curve_density_along(connection(m), m.singular.strata.front(), opt, lad, {});
  CHECK(d.normal[0] == doctest::Approx(2.0 / L).epsilon(0.02));
  CHECK(d.tangential[0] == doctest::Approx(2.0 / L).epsilon(0.02));
  CHECK(std::abs(d.density[0](0, 1)) < 1e-6);
}

TEST_CASE("glued spherical caps") {
  // Caps of radii 1 and 1.5; the jump of the boundary geodesic curvatures is
  // cot(r1/R1)/R1 + cot(r2/R2)/R2 computed from the radii alone.
  const double R1 = 1.0, r1 = 1.0, R2 = 1.5;
  const CapsGeometry cg = caps_geometry(R1, r1, R2);
  const double rho = R1 * std::sin(r1 / R1);
  const double r2 = R2 * std::asin(rho / R2);
  const double jump = 1.0 / (R1 * std::tan(r1 / R1)) + 1.0 / (R2 * std::tan(r2 / R2));
  const MetricField m = glued_caps(cg);
  CurveOptions opt;
  opt.samples = 1;
  Ladder lad;
  lad.eps0 = 0.3;
  const CurveDensity d = curve_density_along(connection(m), m.singular.strata.front(), opt, lad, {});
  CHECK(d.detected);
  CHECK(d.normal[0] == doctest::Approx(jump).epsilon(0.02));
  CHECK(d.tangential[0] == doctest::Approx(jump).epsilon(0.02));
}

TEST_CASE("cone family over a circle") {
  const double alpha = 0.25;
  const MetricField m = cone_family_trivial(alpha, 2.0);
  CurveOptions opt;
  opt.samples = 1;
  opt.inner = 0.3;
  opt.outer = 0.6;
  opt.full = false;
  QuadratureScheme s;
  s.rel_tol = 1e-4;
  Ladder lad;
  lad.eps0 = 0.5;
  lad.rungs = 3;
  const CurveDensity d = curve_density_along(connection(m), m.singular.strata.front(), opt, lad, s);
  CHECK(d.normal[0] == doctest::Approx(2.0 * pi * alpha).epsilon(0.02));
  CHECK(std::abs(d.tangential[0]) < 1e-3 * 2.0 * pi * alpha);
}

TEST_CASE("assembled report") {
  MeasureConfig cfg;
  cfg.pairs = 2;
  SUBCASE("flat") {
    const MetricField m = flat(2, default_box(2));
    const MeasureReport r = assemble_measure_report(connection(m), m.singular, cfg, {});
    CHECK(r.atoms.empty());
    CHECK(r.curves.empty());
    for (const Matrix& v : r.ac.values) CHECK(v.max_abs() < 1e-9);
    for (const PairingCheck& p : r.pairing) CHECK(std::abs(p.q) < 1e-9);
  }
  SUBCASE("cone") {
    const MetricField m = cone(2, 0.5, default_box(2));
    const MeasureReport r = assemble_measure_report(connection(m), m.singular, cfg, {});
    REQUIRE(r.atoms.size() == 1);
    CHECK(r.atoms[0].mass(0, 0) == doctest::Approx(pi).epsilon(1e-2));
    CHECK(r.atoms[0].mass(1, 1) == doctest::Approx(pi).epsilon(1e-2));
    for (const PairingCheck& p : r.pairing) CHECK(p.ok);
  }
  SUBCASE("glued caps: interior curvature plus the gluing line") {
    const MetricField m = glued_caps(caps_geometry(1.0, 1.0, 1.5));
    cfg.curve.samples = 3;
    cfg.ladder.eps0 = 0.3;
    const MeasureReport r = assemble_measure_report(connection(m), m.singular, cfg, {});
    REQUIRE(r.curves.size() == 1);
    for (const PairingCheck& p : r.pairing) CHECK(p.ok);
  }
  SUBCASE("sphere chart, smooth") {
    const MetricField m = sphere_chart(1.0, default_box(2));
    const MeasureReport r = assemble_measure_report(connection(m), m.singular, cfg, {});
    for (const PairingCheck& p : r.pairing) {
      CHECK(p.ok);
      CHECK(std::abs(p.residual) < 1e-5 * p.scale);
    }
  }
}
