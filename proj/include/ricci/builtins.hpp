#pragma once

// Built-in metric constructors and test-field families.

#include <functional>
#include <string>
#include <vector>

#include "ricci/geometry.hpp"

namespace ricci {

// ---------------------------------------------------------------- smoothstep profiles

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1].
double smoothstep(double t);
double smoothstep_derivative(double t);

/// 1 on |x - c| <= inner, 0 on |x - c| >= outer, quintic in between.
struct PlateauProfile {
  double center = 0.0;
  double inner = 0.25;
  double outer = 0.5;
  double value(double x) const;
  double derivative(double x) const;
  /// Integral over the real line: inner + outer.
  double integral() const { return inner + outer; }
};

// ---------------------------------------------------------------- conformal factors

struct CurvatureAtom {
  Point where;
  double mass = 0.0;
};

/// Line density of the curvature measure along an axis-aligned line.
struct CurvatureLine {
  std::size_t normal_axis = 0;
  double offset = 0.0;
  double density = 0.0;
};

/// Conformal factor phi of g = e^{2 phi} delta with analytic derivatives and
/// the singular part of its distributional curvature measure -Laplacian(phi).
struct ConformalFactor {
  std::string name;
  std::size_t dim = 2;
  std::function<double(const Point&)> phi;
  std::function<Vec(const Point&)> grad;
  std::function<Matrix(const Point&)> hessian;
  std::vector<CurvatureAtom> atoms;
  std::vector<CurvatureLine> lines;
  Regularity regularity = Regularity::smooth;
  /// Builds the singular set inside the given box.
  std::function<SingularSet(const Box&)> strata;
  std::vector<IntegrabilityClass> claimed;

  double laplacian(const Point& x) const { return hessian(x).trace(); }
};

ConformalFactor phi_zero(std::size_t n);
ConformalFactor phi_gaussian(std::size_t n, double amplitude, double width);
/// a (x1^2 - x2^2) + b x1, harmonic in 2D.
ConformalFactor phi_harmonic(double quadratic, double linear);
ConformalFactor phi_cone(std::size_t n, double alpha);
ConformalFactor phi_edge(double c);
/// Stereographic round sphere of radius r0: phi = ln(2 r0 / (1 + |x|^2)).
ConformalFactor phi_sphere(double r0);
ConformalFactor phi_mollified_cone(double alpha, double delta);
/// Parses "gauss:amp=..,width=..", "harmonic:quad=..,lin=..", "cone:alpha=..",
/// "edge:c=..", "sphere:r0=..", "mollified-cone:alpha=..,delta=..", "zero".
ConformalFactor parse_phi(const std::string& spec, std::size_t n = 2);

// ---------------------------------------------------------------- metrics

Box default_box(std::size_t n, double half_width = 1.0);

MetricField flat(std::size_t n, const Box& domain);
MetricField conformal(const ConformalFactor& phi, const Box& domain);
MetricField cone(std::size_t n, double alpha, const Box& domain);
MetricField edge(double c, const Box& domain);
MetricField sphere_chart(double r0, const Box& domain);
MetricField kahler1d(const ConformalFactor& phi, const Box& domain);

/// g = (dx^0)^2 + f(x^0)^2 ds^2 in coordinates (x^0, s), glued along x^0 = 0
/// where f is continuous with a jump in f'.
struct WarpedProfile {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;
  /// f'(0-) - f'(0+): per-unit-length jump of the boundary second
  /// fundamental forms (tangential) and mean curvatures (normal).
  double jump = 0.0;
};
MetricField warped(const WarpedProfile& p, const Box& domain, const std::string& name);

/// Two truncated cones of total angle 2 pi c, truncated at distance L from
/// the vertex, glued along their boundary circles; s is arclength on the circle.
WarpedProfile glued_cones_profile(double L);
Box glued_cones_box(double c, double L);
MetricField glued_cones(double c, double L);

/// Two spherical caps (radii R1, R2; M1 reaching geodesic radius r1 from its
/// pole) glued along circles of equal length.
struct CapsGeometry {
  double R1, r1, R2, r2, rho;
  double jump() const;
};
CapsGeometry caps_geometry(double R1, double r1, double R2);
WarpedProfile glued_caps_profile(const CapsGeometry& g);
Box glued_caps_box(const CapsGeometry& g);
MetricField glued_caps(const CapsGeometry& g);

/// dy^2 + |x|^{-2 alpha} (dx1^2 + dx2^2) on (y, x1, x2): trivial-bundle family
/// of 2D cones over a line segment of length base_length.
MetricField cone_family_trivial(double alpha, double base_length);

/// lambda * g
MetricField scaled(const MetricField& g, double lambda);

/// Smooth map of a chart into another with analytic first and second
/// derivatives; second derivatives may jump across declared strata.
struct ChartMap {
  std::function<Point(const Point&)> map;
  std::function<Point(const Point&)> inverse;
  /// dF^a/dx^i, entry (a, i).
  std::function<Matrix(const Point&)> jacobian;
  /// d_k J^a_i stored (a, i, k).
  std::function<Rank3(const Point&)> djacobian;
  std::function<SingularSet(const Box&)> strata;
  Regularity regularity = Regularity::smooth;
};

/// x -> (x1 + a s(x2), x2) with s(t) = t sqrt(t^2 + delta^2); delta = 0
/// gives t|t|, whose Jacobian is Lipschitz but not C^1 across x2 = 0.
ChartMap shear_map(double a, double delta);

/// F^* h on the given domain.
MetricField pullback(const MetricField& h, const ChartMap& f, const Box& domain);

/// Transition x -> y = F(x) built from a chart map, for christoffel_transform.
Transition transition_from(const ChartMap& f, const Box& target);

/// y = x + eps (x2^2, x1^2) style nonlinear smooth diffeomorphism.
ChartMap quadratic_bend(double eps);

// ---------------------------------------------------------------- test fields

/// v(x) = beta(x) (c + L (x - center)) with beta the tensor-product plateau bump.
struct BumpSpec {
  Point center;
  Vec inner;
  Vec outer;
  Vec coef;
  Matrix linear;
};
BumpSpec bump_spec(const Point& center, double inner, double outer, const Vec& coef);
HalfDensityField plateau_bump(const Chart& chart, const BumpSpec& spec);

/// chi(|x - x0| / eps) a with chi = 1 on [0, 1/2], 0 on [1, inf).
HalfDensityField radial_cutoff(const Chart& chart, const Point& x0, double eps, const Vec& a);
double radial_profile(double r);
double radial_profile_derivative(double r);

/// chi(dist(x, S) / eps) eta(along) a near an affine stratum S; eta is a
/// plateau profile in the free coordinate `along_axis` (ignored when the
/// stratum is a point).
HalfDensityField tube_cutoff(const Chart& chart, const Stratum& s, double eps,
                             std::size_t along_axis, const PlateauProfile& along, const Vec& a);

/// Non-compact rotation half-density of the stereographic sphere chart:
/// (-x2, x1) (det g)^{1/4}.
HalfDensityField sphere_rotation_field(const Chart& chart, double r0);

/// Rotation (-x2, x1) with plain coefficients (Killing for the flat metric).
HalfDensityField flat_rotation_field(const Chart& chart);

}  // namespace ricci
