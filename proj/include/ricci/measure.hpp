#pragma once

// Decomposition of the Ricci measure by pairing Q against localized bumps.

#include <optional>
#include <string>
#include <vector>

#include "ricci/builtins.hpp"
#include "ricci/qform.hpp"

namespace ricci {

/// eps_k = eps0 * 2^-k for k = 0 .. rungs-1.
struct Ladder {
  double eps0 = 0.5;
  int rungs = 5;
  std::vector<double> scales() const;
};

struct LadderTrace {
  std::string label;
  std::vector<double> eps;
  std::vector<double> values;
  std::vector<double> errors;
};

/// Limit of a ladder fitted as m + C rho^k (Aitken on the last three rungs).
struct Extraction {
  double value = 0.0;
  double ci = 0.0;
  /// False when successive differences do not shrink; value is then 0.
  bool detected = true;
  LadderTrace trace;
};
Extraction extrapolate_ladder(LadderTrace trace, double tol);

/// a^k m_kl b^l for the point x0 from Q(chi_k a, chi_k b) with radial cutoffs.
Extraction singular_mass_at(const ChristoffelField& gamma, const Point& x0, const Vec& a, const Vec& b,
                            const Ladder& ladder, const QuadratureScheme& scheme,
                            const IntegrabilityVerdict* verdict = nullptr);

struct CurveOptions {
  /// Number of sample points along the free axis.
  int samples = 3;
  /// Plateau half-widths of the along-curve profile.
  double inner = 0.1;
  double outer = 0.3;
  /// Background metric for the tangential/normal frame; identity when empty.
  std::function<Matrix(const Point&)> background;
  /// All n(n+1)/2 direction pairs; otherwise only tangential and normal.
  bool full = true;
};

struct CurveDensity {
  std::string label;
  std::size_t along_axis = 0;
  std::vector<Point> points;
  /// Coordinate density matrix per unit length at each sample.
  std::vector<Matrix> density;
  std::vector<Matrix> ci;
  /// Frame entries: unit tangential / unit normal (first constrained axis).
  std::vector<double> tangential;
  std::vector<double> normal;
  std::vector<LadderTrace> traces;
  bool detected = true;
};

/// Per-length density along an axis-aligned curve stratum.
CurveDensity curve_density_along(const ChristoffelField& gamma, const Stratum& curve, const CurveOptions& opt,
                                 const Ladder& ladder, const QuadratureScheme& scheme,
                                 const IntegrabilityVerdict* verdict = nullptr);

struct AcGrid {
  std::vector<Point> points;
  std::vector<Matrix> values;
  std::size_t skipped = 0;
};
/// R_(kl) on the cell centres of a samples^n grid over `box`. With
/// skip_singular false a point near a stratum throws SingularEvaluationError.
AcGrid ac_density_grid(const ChristoffelField& gamma, const Box& box, int samples, bool skip_singular = false);

struct AtomMass {
  std::string label;
  Point point;
  Matrix mass;
  Matrix ci;
  std::vector<LadderTrace> traces;
  bool detected = true;
};

struct PairingCheck {
  double q = 0.0;
  double paired = 0.0;
  double residual = 0.0;
  double scale = 0.0;
  bool ok = false;
};

struct MeasureConfig {
  Ladder ladder;
  CurveOptions curve;
  int grid = 8;
  unsigned seed = 1;
  /// Random global test pairs for the pairing check (0 disables it).
  int pairs = 1;
  double pairing_tol = 0.02;
};

struct MeasureReport {
  std::vector<AtomMass> atoms;
  std::vector<CurveDensity> curves;
  AcGrid ac;
  std::vector<PairingCheck> pairing;
};

/// <V, R W> assembled from the report: atoms + curve integrals + ac integral.
/// `variation` receives a total-variation proxy (norms in place of pairings).
double pair_with_report(const MeasureReport& r, const ChristoffelField& gamma, const HalfDensityField& v,
                        const HalfDensityField& w, const QuadratureScheme& scheme, double* variation = nullptr);

MeasureReport assemble_measure_report(const ChristoffelField& gamma, const SingularSet& singular,
                                      const MeasureConfig& config, const QuadratureScheme& scheme);

}  // namespace ricci
