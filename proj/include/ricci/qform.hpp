#pragma once

// The quadratic form Q(V, W) of a torsion-free connection and its variants.

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ricci/builtins.hpp"
#include "ricci/geometry.hpp"
#include "ricci/quadrature.hpp"

namespace ricci {

struct QOptions {
  /// Also integrate the Q1 + Q2 split as an independent path.
  bool split = true;
  bool check_tameness = true;
  /// Precomputed verdict for the integration box; skips the diagnostic.
  const IntegrabilityVerdict* verdict = nullptr;
};

struct QResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  bool split_computed = false;
  double q1 = 0.0, q1_error = 0.0;
  double q2 = 0.0, q2_error = 0.0;
  /// Optional independent evaluation (smooth oracle, Hessian form, ...).
  std::optional<double> cross_check;
  std::optional<IntegrabilityVerdict> verdict;
  bool fd_fallback = false;
  std::size_t cells = 0;
  std::vector<ShellTrace> shells;
};

/// Pointwise integrand pieces at one point.
struct QIntegrand {
  double direct = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  /// (div v)(div w) - d_i v^j d_j w^i, the exact-derivative remainder.
  double dd = 0.0;
};
QIntegrand q_integrand(const Christoffel& gamma, const Vec& v, const Matrix& dv, const Vec& w, const Matrix& dw);

/// Box over which Q(V, W) is integrated: common support inside the chart.
Box pairing_box(const HalfDensityField& v, const HalfDensityField& w);

QResult q_form(const ChristoffelField& gamma, const HalfDensityField& v, const HalfDensityField& w,
               const QuadratureScheme& scheme, const QOptions& opt = {});

/// R_(kl) from central differences (Richardson) of Gamma with step h.
Matrix symmetrized_ricci(const ChristoffelField& gamma, const Point& x, double h);

/// Integral of v^k R_(kl) w^l; throws OracleIneligibleError when a stratum
/// meets the supports.
QResult smooth_ricci_oracle(const ChristoffelField& gamma, const HalfDensityField& v, const HalfDensityField& w,
                            const QuadratureScheme& scheme);

struct WeightFunction {
  std::function<double(const Point&)> f;
  std::function<Vec(const Point&)> grad;
  std::function<Matrix(const Point&)> hessian;
  std::string regularity = "W11loc";
  double fd_step = 1e-4;

  Vec gradient(const Point& x) const;
  Matrix hess(const Point& x) const;
};

WeightFunction weight_half_square(std::size_t n);
WeightFunction weight_linear(const Vec& a);
WeightFunction weight_constant(double c);

/// Q_f(V, W) in expanded form; when Gamma is smooth on the supports the
/// cross_check holds the integral of v^k (R_(kl) + Hess(f)_kl) w^l.
QResult bakry_emery_q(const ChristoffelField& gamma, const WeightFunction& f, const HalfDensityField& v,
                      const HalfDensityField& w, const QuadratureScheme& scheme, const QOptions& opt = {});

/// Complex-dimension-1 form. V's coefficients (a, b) encode v = a + i b on
/// d/dz; W's (c, d) encode w = c + i d, paired through its conjugate on
/// d/dzbar. The cross check is the same number assembled from four real Q
/// evaluations of the underlying conformal metric.
struct KahlerResult {
  std::complex<double> value;
  double error = 0.0;
  std::complex<double> cross_check;
  double cross_error = 0.0;
};
KahlerResult kahler_q(const MetricField& h, const HalfDensityField& v, const HalfDensityField& w,
                      const QuadratureScheme& scheme, bool cross_check = true);

/// Pairing of the curvature measure -Laplacian(phi) dx with v^1 w^1 + v^2 w^2.
struct AlexandrovResult {
  double value = 0.0;
  double error = 0.0;
  double atoms = 0.0;
  double lines = 0.0;
  double ac = 0.0;
};
AlexandrovResult alexandrov_q(const ConformalFactor& phi, const HalfDensityField& v, const HalfDensityField& w,
                              const QuadratureScheme& scheme);

struct KillingResult {
  double defect = 0.0;
  Point worst;
  std::size_t points = 0;
  std::size_t skipped = 0;
};
/// Max Frobenius norm of g_jk nabla_i V^k + g_ik nabla_j V^k on a
/// samples^n grid over `box`; points inside exclusion radii are skipped.
KillingResult killing_defect(const MetricField& g, const ChristoffelField& gamma, const HalfDensityField& v,
                             const Box& box, int samples = 21);

/// Matrix image M V of a field (coefficients M v, derivatives transformed).
HalfDensityField linear_image(const HalfDensityField& v, const Matrix& m);
/// a V + b W on a common chart.
HalfDensityField combine(double a, const HalfDensityField& v, double b, const HalfDensityField& w);

struct PerturbationSeries {
  QResult baseline;
  std::vector<QResult> perturbed;
  std::vector<double> sup_norms;
  std::vector<double> deviations;
  /// Least-squares fit deviation = intercept + slope * sup_norm.
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
PerturbationSeries q_convergence_under_perturbation(const ChristoffelField& gamma,
                                                    const std::vector<ConnectionPerturbation>& ts,
                                                    const HalfDensityField& v, const HalfDensityField& w,
                                                    const QuadratureScheme& scheme);

struct LowerBoundWitness {
  std::function<Matrix(const Point&)> h;
  /// Throws Error if h is not positive semidefinite on a samples^n grid.
  void check(const Box& box, int samples = 11) const;
};
LowerBoundWitness zero_witness(std::size_t n);

/// Q(V, V) + integral of <V, h V>; Assumption-style lower bounds ask this to be >= -abs_tol.
double lower_bound_margin(const ChristoffelField& gamma, const LowerBoundWitness& h, const HalfDensityField& v,
                          const QuadratureScheme& scheme);

/// Least-squares line through (x, y); returns {slope, intercept, r^2}.
std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ricci
