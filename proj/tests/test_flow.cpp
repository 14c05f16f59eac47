#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ricci/flow.hpp"

using namespace ricci;

namespace {

constexpr double pi = std::numbers::pi;

TimeDependentField bump(const Chart& ch, const Point& c, const Vec& coef, const std::string& label) {
  return constant_in_time(plateau_bump(ch, bump_spec(c, 0.15, 0.4, coef)), label);
}

// Coefficients L x near the origin: Lipschitz and vanishing at the vertex.
TimeDependentField vanishing(const Chart& ch, const Matrix& l, const std::string& label) {
  BumpSpec s = bump_spec(Point(2), 0.2, 0.5, Vec(2));
  s.linear = l;
  return constant_in_time(plateau_bump(ch, s), label);
}

Matrix mat(double a, double b, double c, double d) {
  Matrix m(2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

}  // namespace

TEST_CASE("static flat flow") {
  const TimeDependentMetric g = static_flow(flat(2, default_box(2)));
  const Chart ch = g.at(0).chart;
  const TimeDependentField v = bump(ch, Point{0.1, 0.0}, Vec{1, 2}, "v");
  const TimeDependentField w = bump(ch, Point{0.0, 0.2}, Vec{-1, 1.5}, "w");
  for (double t : {0.1, 1.0}) {
    const FlowResidual r = flow_identity_residual(g, v, w, t);
    CHECK(std::abs(r.residual) < 1e-6);
    CHECK(r.passes());
    CHECK(r.slices == 1);
  }
}

TEST_CASE("shrinking sphere solves the flow") {
  const Box box = default_box(2);
  const TimeDependentMetric g = shrinking_sphere(1.0, box);
  SUBCASE("d/dt g = -2 Ric") {
    for (double t : {0.0, 0.2}) {
      const MetricField gt = g.at(t);
      const ChristoffelField gamma = christoffel_from_metric(gt);
      for (const Point& x : {Point{0.3, -0.2}, Point{-0.6, 0.5}}) {
        const Matrix ric = symmetrized_ricci(gamma, x, 1e-3);
        const Matrix fd = (1.0 / 2e-4) * (g.at(t + 1e-4).eval(x) - g.at(t - (t > 0 ? 1e-4 : 0.0)).eval(x));
        const Matrix dt = g.dt(t, x);
        CHECK((dt + 2.0 * ric).max_abs() < 1e-6);
        if (t > 0) CHECK((fd - dt).max_abs() < 1e-6);
      }
    }
  }
  SUBCASE("residuals") {
    const Chart ch = g.at(0).chart;
    const TimeDependentField v = bump(ch, Point{0.1, 0.0}, Vec{1, 2}, "v");
    const TimeDependentField w = bump(ch, Point{0.0, 0.2}, Vec{-1, 1.5}, "w");
    for (double t : {0.1, 0.2, 0.4}) {
      const FlowResidual r = flow_identity_residual(g, v, w, t);
      CHECK(std::abs(r.residual) < 1e-4 * r.scale());
      CHECK(r.residual == r.initial + r.dv_term + r.dw_term + r.q_term - r.lhs);
    }
    SUBCASE("restart") {
      const FlowResidual a = flow_identity_residual(g, v, w, 0.15);
      const FlowResidual b = flow_identity_residual(g, v, w, 0.4, {}, 0.15);
      const FlowResidual c = flow_identity_residual(g, v, w, 0.4);
      CHECK(std::abs(a.residual) < 1e-4 * a.scale());
      CHECK(std::abs(b.residual) < 1e-4 * b.scale());
      CHECK(a.q_term + b.q_term == doctest::Approx(c.q_term).epsilon(1e-6));
    }
    SUBCASE("time order doubling") {
      FlowOptions hi;
      hi.time_order = 10;
      const FlowResidual a = flow_identity_residual(g, v, w, 0.4);
      const FlowResidual b = flow_identity_residual(g, v, w, 0.4, hi);
      CHECK(std::abs(a.residual - b.residual) <= 0.1 * std::max(a.error, b.error) + 1e-12);
    }
  }
}

TEST_CASE("time-dependent fields") {
  // V(t) = (1 + t) V0 on the static flat metric: lhs grows like (1 + t).
  const TimeDependentMetric g = static_flow(flat(2, default_box(2)));
  const Chart ch = g.at(0).chart;
  const HalfDensityField v0 = plateau_bump(ch, bump_spec(Point(2), 0.2, 0.5, Vec{1, 0}));
  TimeDependentField v = constant_in_time(v0, "v");
  v.at = [v0](double t) { return linear_image(v0, Matrix(2, 1.0 + t)); };
  v.dt = [v0](double) { return v0; };
  const TimeDependentField w = constant_in_time(v0, "w");
  const FlowResidual r = flow_identity_residual(g, v, w, 0.5);
  CHECK(r.dv_term == doctest::Approx(0.5 * r.initial).epsilon(1e-8));
  CHECK(std::abs(r.residual) < 1e-8);
}

TEST_CASE("static cone is not a tame flow") {
  const TimeDependentMetric g = static_cone(0.5, default_box(2));
  const Chart ch = g.at(0).chart;
  const TimeDependentField v = constant_in_time(radial_cutoff(ch, Point(2), 0.5, Vec{1, 0}), "v");
  const FlowResidual r = flow_identity_residual(g, v, v, 0.1);
  // -2 t Q with Q = 2 pi alpha.
  CHECK(r.residual == doctest::Approx(-4.0 * pi * 0.5 * 0.1).epsilon(0.02));
  std::vector<double> ts{0.05, 0.1, 0.2, 0.4}, rs;
  for (double t : ts) rs.push_back(flow_identity_residual(g, v, v, t).residual);
  const auto fit = linear_fit(ts, rs);
  CHECK(fit[2] > 0.999);
  CHECK(fit[0] == doctest::Approx(-2.0 * pi).epsilon(0.01));
  CHECK_FALSE(tame_flow_check(g, {{v, v}}, {0.1}).pass);
}

TEST_CASE("Sobolev gate on the cone") {
  const MetricField m = cone(2, 0.5, default_box(2));
  const ChristoffelField gamma = christoffel_from_metric(m);
  const Chart ch = m.chart;
  CHECK(sobolev_gate(christoffel_from_metric(flat(2, default_box(2))), radial_cutoff(ch, Point(2), 0.5, Vec{1, 0}), {})
            .finite);
  const SobolevGate bad = sobolev_gate(gamma, radial_cutoff(ch, Point(2), 0.5, Vec{1, 0}), {});
  CHECK_FALSE(bad.finite);
  CHECK(bad.verdict == Verdict::diverges);
  CHECK(sobolev_gate(gamma, vanishing(ch, mat(1, 0.5, -0.3, 2), "g").at(0), {}).finite);
}

TEST_CASE("static cone is a cone-preserving flow") {
  const TimeDependentMetric g = static_cone(0.5, default_box(2));
  const Chart ch = g.at(0).chart;
  const TimeDependentField a = vanishing(ch, mat(1, 0.5, -0.3, 2), "a");
  const TimeDependentField b = vanishing(ch, mat(0, 1, 1, 0.2), "b");
  const TimeDependentField bad = constant_in_time(radial_cutoff(ch, Point(2), 0.5, Vec{1, 0}), "bad");
  const FlowCheck c = cone_preserving_flow_check(g, {{a, b}, {a, a}, {bad, a}}, {0.1, 0.4});
  CHECK(c.pass);
  REQUIRE(c.gated_out.size() == 1);
  CHECK(c.gated_out[0] == "bad");
  CHECK(c.entries.size() == 4);
  for (const FlowCheckEntry& e : c.entries) CHECK(std::abs(e.residual.residual) < 1e-5 * e.residual.scale());
}

TEST_CASE("pulled-back flows and Lipschitz limits") {
  const Box box = default_box(2);
  const TimeDependentMetric limit = pulled_back_sphere(1.0, shear_map(0.3, 0.0), box);
  const Chart ch = limit.at(0).chart;
  const std::vector<FieldPair> suite{{bump(ch, Point{0.1, 0.05}, Vec{1, 0.5}, "v"),
                                      bump(ch, Point{-0.1, 0.0}, Vec{0.2, 1}, "w")}};
  const FlowCheck c = tame_flow_check(limit, suite, {0.1, 0.4});
  CHECK(c.pass);

  std::vector<TimeDependentMetric> family;
  for (double d : {0.4, 0.2, 0.1}) family.push_back(pulled_back_sphere(1.0, shear_map(0.3, d), box));
  const LipschitzLimitReport rep = lipschitz_limit_stability(family, limit, suite, {0.2});
  CHECK(rep.precondition);
  CHECK(rep.limit_pass);
  CHECK(rep.distances[0] > rep.distances[2]);
  CHECK(lipschitz_distance(limit, limit, {0.2}, box) == 0.0);
}

TEST_CASE("mollified cones are not flows") {
  const Box box = default_box(2);
  const TimeDependentMetric g = static_mollified_cone(0.5, 0.1, box);
  const Chart ch = g.at(0).chart;
  const TimeDependentField v = constant_in_time(radial_cutoff(ch, Point(2), 0.5, Vec{1, 0}), "v");
  const LipschitzLimitReport rep =
      lipschitz_limit_stability({g}, static_cone(0.5, box), {{v, v}}, {0.1});
  CHECK_FALSE(rep.precondition);
  CHECK_FALSE(rep.limit_pass);
}

TEST_CASE("out-of-range times") {
  const TimeDependentMetric g = shrinking_sphere(1.0, default_box(2));
  const TimeDependentField v = bump(g.at(0).chart, Point(2), Vec{1, 0}, "v");
  CHECK_THROWS_AS(flow_identity_residual(g, v, v, 0.6), ConfigError);
}
