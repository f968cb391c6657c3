#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "optotrap/params.hpp"
#include "optotrap/steady_state.hpp"

namespace optotrap {

enum class CavityConfig { two_mirror, three_mirror };

// Drift matrix A of the linearized fluctuation dynamics u' = A u + n.
// State ordering: (dXa, dYa, dXb, dYb, dQ, dP) for the double-sided cavity,
// (dXa, dYa, dQ, dP) for the single-sided one. Entries are stored in SI,
// which mixes units across rows; numerics (spectra, characteristic
// polynomial, time stepping) use the similarity-scaled form where dQ and dP
// are measured in zero-point units, leaving every entry an angular rate.
struct DriftMatrix {
  CavityConfig configuration = CavityConfig::three_mirror;
  Eigen::MatrixXd entries;              // SI units
  Eigen::VectorXd state_scale;          // SI size of one scaled unit per state
  std::vector<std::string> state_names;
  std::vector<std::string> state_units;

  int dim() const { return static_cast<int>(entries.rows()); }
  int position_index() const { return dim() - 2; }
  int momentum_index() const { return dim() - 1; }

  // S^-1 A S with S = diag(state_scale); same spectrum, rate-sized entries.
  Eigen::MatrixXd scaled() const;
};

DriftMatrix build_drift_matrix_3mc(const SystemParams& p, const DriveField& drive);

// Linearization about one real root of the force-balance cubic. Throws
// InvalidParameter if the selected root does not satisfy the force balance.
DriftMatrix build_drift_matrix_2mc(const SystemParams& p, const DriveField& drive,
                                   const TwoMirrorEquilibrium& eq, int branch,
                                   PumpConvention convention = PumpConvention::per_side);
// Convenience overload using the default (smallest-|q|) branch.
DriftMatrix build_drift_matrix_2mc(const SystemParams& p, const DriveField& drive,
                                   PumpConvention convention = PumpConvention::per_side);

// Monic characteristic polynomial, coefficients descending in the eigenvalue
// (coeffs[0] = 1), via the Faddeev-LeVerrier trace recursion rather than an
// eigendecomposition.
Eigen::VectorXd characteristic_polynomial(const Eigen::MatrixXd& a);

struct RouthVerdict {
  bool stable = false;
  bool critical = false;  // zero or near-zero pivot: marginal, not stable
  int sign_changes = 0;
};

// Routh array on a polynomial with descending coefficients. Zero pivots are
// epsilon-perturbed with sign bookkeeping; a vanishing leading coefficient
// throws NumericalError.
RouthVerdict routh_array_verdict(std::span<const double> coeffs);

struct StabilityReport {
  bool routh_hurwitz_stable = false;
  bool critical = false;
  std::vector<std::complex<double>> eigenvalues;  // diagnostic cross-check
  double max_real_part = 0.0;                     // rad/s
};

StabilityReport routh_hurwitz_stable(const DriftMatrix& a);
StabilityReport routh_hurwitz_stable(const Eigen::MatrixXd& a);

struct StabilityPoint {
  DriveField drive;
  std::vector<StabilityReport> reports;  // one per equilibrium branch
  std::string error;                     // non-empty when this point failed
};

// Per-point stability over a sweep of drives; evaluates every real branch for
// the single-sided cavity and never aborts the grid on a point failure.
std::vector<StabilityPoint> stability_region(const SystemParams& p,
                                             std::span<const DriveField> drives,
                                             CavityConfig config,
                                             PumpConvention convention = PumpConvention::per_side);

}  // namespace optotrap
