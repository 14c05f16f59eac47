#pragma once

// Chart-local metrics, connections and vector-valued half-density fields.
//
// Half-densities are stored as coefficient tuples in the fixed coordinate
// trivialization sqrt(dx^1 ... dx^n); a product of two such expressions is an
// ordinary function integrated against dx^1 ... dx^n.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/tensor.hpp"

namespace ricci {

struct Box {
  Point lo;
  Point hi;

  std::size_t dim() const { return lo.size(); }
  double volume() const;
  double diagonal() const;
  Point center() const;
  bool contains(const Point& x, double slack = 0.0) const;
  bool empty() const;
  /// Component-wise intersection; may be empty.
  Box intersect(const Box& o) const;
  static Box cube(const Point& center, double half_width);
};

/// Per-axis split coordinates handed to the integrator so that cell faces
/// align with kinks of piecewise-defined integrands.
using Breakpoints = std::vector<std::vector<double>>;
Breakpoints merge_breakpoints(const Breakpoints& a, const Breakpoints& b);

/// Forward map x -> y into a second chart, with its inverse and Jacobian.
struct Transition {
  Box target;
  std::function<Point(const Point&)> forward;
  std::function<Point(const Point&)> inverse;
  /// dy^i/dx^a at x, entry (i, a).
  std::function<Matrix(const Point&)> jacobian;
  /// Optional d^2 x^a / dy^j dy^k at y, stored (a, j, k).
  std::function<Rank3(const Point&)> inverse_hessian;
  double roundtrip_tol = 1e-10;
};

struct Chart {
  std::size_t dim = 0;
  Box domain;
  std::optional<Transition> transition;

  static Chart box(const Point& lo, const Point& hi);
  /// Throws Error if n < 1, the box is degenerate or the transition fails
  /// the forward/inverse round trip on a sample grid.
  void validate(int samples_per_axis = 5) const;
};

enum class StratumKind { point, curve, hyperplane };
const char* to_string(StratumKind k);

/// One piece of the set where a metric fails to be C^1.
///
/// Strata used by the integrator are affine and axis aligned: the stratum is
/// the set where the coordinates listed in `constrained_axes` take the values
/// stored in `anchor`. Curves additionally carry an arc-length polyline with
/// per-vertex tangent frames (column 0 of each frame is the unit tangent).
struct Stratum {
  StratumKind kind = StratumKind::point;
  std::vector<std::size_t> constrained_axes;
  Point anchor;
  std::vector<Point> polyline;
  std::vector<double> arclength;
  std::vector<Matrix> frames;
  double exclusion_radius = 1e-3;
  std::string label;

  static Stratum point(const Point& p, double r0, std::string label = "vertex");
  static Stratum hyperplane(std::size_t n, std::size_t axis, double value, double r0,
                            std::string label = "hyperplane");
  /// Straight curve along `axis` through `through`, spanning [lo, hi] in that axis.
  static Stratum axis_curve(const Point& through, std::size_t axis, double lo, double hi,
                            double r0, std::string label = "curve");
  /// General polyline; only usable by the integrator when its segments are
  /// collinear and axis aligned.
  static Stratum polyline_curve(std::vector<Point> vertices, double r0,
                                std::string label = "curve");

  std::size_t dim() const { return anchor.size(); }
  double distance(const Point& x) const;
  /// Axis the curve runs along, if it is a single axis-aligned line.
  std::optional<std::size_t> curve_axis() const;
  /// Point on the stratum nearest to x (constrained coordinates replaced).
  Point project(const Point& x) const;
  bool intersects(const Box& b, double slack = 0.0) const;
};

struct SingularSet {
  std::vector<Stratum> strata;

  bool empty() const { return strata.empty(); }
  /// True when x lies within some stratum's exclusion radius.
  bool excluded(const Point& x) const;
  double distance(const Point& x) const;
  void validate(const Chart& chart) const;
  SingularSet restricted_to(const Box& b) const;
};

enum class Regularity { smooth, lipschitz, w11loc };
const char* to_string(Regularity r);

enum class IntegrabilityClass { linf, l2, l1, none };
const char* to_string(IntegrabilityClass c);
/// The weaker (larger) of two local integrability classes.
IntegrabilityClass weaker(IntegrabilityClass a, IntegrabilityClass b);

struct MetricField {
  std::string name;
  Chart chart;
  std::function<Matrix(const Point&)> eval;
  SingularSet singular;
  /// Optional d_k g_{ij}, stored (k, i, j).
  std::function<Rank3(const Point&)> d_eval;
  /// Optional analytic Christoffel symbols.
  std::function<Christoffel(const Point&)> christoffel_eval;
  Regularity regularity = Regularity::smooth;
  /// Per-stratum integrability class the constructor claims for Gamma.
  std::vector<IntegrabilityClass> claimed;
  bool kahler = false;

  Matrix at(const Point& x) const { return eval(x); }
  /// Throws DegenerateMetricError unless g(x) is symmetric positive definite
  /// with eigenvalue ratio above 1e-12.
  void check_positive_definite(const Point& x) const;
};

struct ChristoffelField {
  Chart chart;
  std::function<Christoffel(const Point&)> eval;
  SingularSet singular;
  std::vector<IntegrabilityClass> claimed;
  /// True when `eval` stays valid inside exclusion radii.
  bool analytic = false;

  /// Evaluates Gamma^i_{jk}(x); throws SingularEvaluationError inside an
  /// exclusion radius when no analytic closure is available.
  Christoffel at(const Point& x) const;
};

struct HalfDensityField {
  Chart chart;
  std::function<Vec(const Point&)> coeffs;
  /// Optional analytic d_i v^j, entry (i, j).
  std::function<Matrix(const Point&)> jacobian;
  Box support;
  double lipschitz = 0.0;
  bool compact = true;
  Breakpoints breaks;
  /// Step used for the central-difference fallback; 0 selects the default.
  double fd_step = 0.0;

  Vec value(const Point& x) const;
  Matrix derivative(const Point& x) const;
  bool uses_fd() const { return !jacobian; }
};

struct ConnectionPerturbation {
  Chart chart;
  std::function<Rank3(const Point&)> eval;
  double sup_bound = 0.0;
};

struct ChristoffelScheme {
  enum class Kind { analytic, finite_difference };
  Kind kind = Kind::analytic;
  /// Finite-difference step; 0 selects 1e-4 x domain diagonal.
  double step = 0.0;
  bool richardson = true;
};

double default_fd_step(const Chart& chart);

/// Gamma^l_{jk} = 1/2 g^{li} (d_j g_{ik} + d_k g_{ij} - d_i g_{jk}).
Christoffel levi_civita(const Matrix& g, const Rank3& dg, const Point& where);

/// Central differences of a matrix field, optionally Richardson extrapolated.
Rank3 metric_derivative_fd(const std::function<Matrix(const Point&)>& g, const Point& x,
                           double h, bool richardson);

ChristoffelField christoffel_from_metric(const MetricField& g, const ChristoffelScheme& scheme = {});

/// Christoffel symbols in the transition's target chart.
ChristoffelField christoffel_transform(const ChristoffelField& gamma, const Transition& t);

/// (nabla_i v^j)(x) for a half-density field: row i is the differentiation index.
Matrix half_density_covariant_derivative(const ChristoffelField& gamma, const HalfDensityField& v,
                                         const Point& x);
/// Pointwise kernel of the above for already-evaluated data.
Matrix covariant_derivative_kernel(const Christoffel& gamma, const Vec& v, const Matrix& dv);

ChristoffelField perturb(const ChristoffelField& gamma, const ConnectionPerturbation& t);

/// Pushes V through the transition: vector part by the Jacobian, half-density
/// weight by |det dx/dy|^{1/2}. Derivatives fall back to finite differences.
HalfDensityField transport_half_density(const HalfDensityField& v, const Transition& t);

/// Checks the Lipschitz bound and boundary vanishing on random/boundary samples.
struct FieldCheck {
  double max_boundary_value = 0.0;
  double max_lipschitz_ratio = 0.0;
  bool ok = true;
};
FieldCheck check_half_density(const HalfDensityField& v, unsigned seed, int pairs = 200,
                              double tol = 1e-9);

}  // namespace ricci
