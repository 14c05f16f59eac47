#pragma once

// Adaptive tensor Gauss-Legendre integration with geometric shells around
// singular strata, and the local integrability diagnostic built on it.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ricci/geometry.hpp"

namespace ricci {

inline constexpr std::size_t kMaxComponents = 8;

struct QuadratureScheme {
  int order = 5;
  double rel_tol = 1e-6;
  double abs_tol = 1e-10;
  int max_depth = 30;
  double shell_ratio = 0.5;
  /// Innermost shell radius as a fraction of the integration box diagonal.
  double r_min_factor = 1e-8;
  /// Cap on the number of shells per stratum.
  int max_shells = 64;
  /// Shells always generated before the tail test may stop early.
  int min_shells = 8;
  /// Fraction of cells refined per adaptive round.
  double refine_fraction = 0.1;
  std::size_t max_cells = 400000;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Vector-valued integrand: writes `components` values for a point.
struct Integrand {
  std::size_t components = 1;
  std::function<void(const Point&, std::span<double>)> eval;
};

Integrand scalar_integrand(std::function<double(const Point&)> f);

/// Partial sums of one stratum's shells; shell k covers
/// R0 rho^{k+1} < |x_S - a_S|_inf <= R0 rho^k.
struct ShellTrace {
  std::string label;
  double R0 = 0.0;
  double ratio = 0.5;
  std::vector<double> radius;
  /// sums[k][c]
  std::vector<std::vector<double>> sums;
  std::vector<std::vector<double>> errors;
  /// Geometric extrapolation of the unresolved core, per component.
  std::vector<double> tail;
};

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
  std::vector<double> values;
  std::vector<double> errors;
  std::size_t cells = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  bool budget_exhausted = false;
  std::vector<ShellTrace> shells;
};

/// max(abs_tol, rel_tol |value|)
inline double combined_tolerance(const QuadratureScheme& s, double value) {
  return std::max(s.abs_tol, s.rel_tol * std::abs(value));
}

IntegralResult integrate(const Integrand& f, const Box& box, const QuadratureScheme& scheme,
                         const SingularSet& singular = {}, const Breakpoints& breaks = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// Adaptive 1D Gauss-Legendre (bisection with the same error policy).
double integrate_1d(const std::function<double(double)>& f, double a, double b, const QuadratureScheme& s,
                    const std::vector<double>& breaks = {}, double* error = nullptr);

enum class Verdict { converges, diverges, inconclusive };
const char* to_string(Verdict v);
Verdict worst(Verdict a, Verdict b);

/// Log-linear fit of the innermost shell sums.
struct ShellFit {
  Verdict verdict = Verdict::converges;
  double slope = 0.0;
  double slope_sigma = 0.0;
  /// Growth exponent of the shell sums in 1/radius; >= 0 when diverging.
  double exponent = 0.0;
  bool vanishing = false;
  std::vector<double> sums;
};

/// Verdict from shell sums: slope < -0.05 converges, slope >= -max(2 sigma,
/// 0.005) diverges, anything in between is inconclusive. All sums below
/// `floor` count as a vanishing (convergent) series.
ShellFit fit_shells(const std::vector<double>& sums, double ratio, double floor);

struct StratumVerdict {
  std::string label;
  ShellFit gamma_l1;
  ShellFit gamma_l2;
  ShellFit quadratic;
};

struct IntegrabilityVerdict {
  std::vector<StratumVerdict> strata;
  Verdict gamma_l1 = Verdict::converges;
  Verdict gamma_l2 = Verdict::converges;
  Verdict quadratic = Verdict::converges;
  double gamma_l1_integral = 0.0;
  double gamma_l2_integral = 0.0;
  double quadratic_integral = 0.0;

  /// Both local integrability conditions of the tameness criterion hold.
  bool tame() const { return gamma_l1 == Verdict::converges && quadratic == Verdict::converges; }
};

class TamenessViolationError : public Error {
public:
  explicit TamenessViolationError(IntegrabilityVerdict v, const std::string& context = "")
      : Error("connection is not tame" + (context.empty() ? std::string() : " (" + context + ")")),
        verdict(std::move(v)) {}
  IntegrabilityVerdict verdict;
};

/// sum |Gamma| (L1), sum Gamma^2 (L2) and sum_kl |sum_ij (G^i_kl G^j_ji - G^j_ki G^i_lj)|.
void christoffel_diagnostic_terms(const Christoffel& g, double out[3]);

/// Runs the shell diagnostic over `box` (default: the chart domain).
IntegrabilityVerdict integrability_diagnostic(const ChristoffelField& gamma, const QuadratureScheme& scheme,
                                              const Box* box = nullptr);

/// Worker count: RICCI_THREADS when set, otherwise hardware concurrency.
unsigned worker_threads();

}  // namespace ricci
