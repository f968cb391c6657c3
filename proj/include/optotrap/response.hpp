#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>

#include "optotrap/linear_dynamics.hpp"
#include "optotrap/params.hpp"
#include "optotrap/steady_state.hpp"

namespace optotrap {

// Frequency-dependent effective trap frequency and damping of the mirror.
// omega_eff_sq keeps its sign: a negative value means the optical spring has
// overwhelmed the mechanical one (anti-trapped), which is a reported state,
// not an error; omega_eff is NaN there.
struct EffectiveParams {
  double eval_freq = 0.0;     // rad/s, frequency the optical terms were evaluated at
  double omega_eff_sq = 0.0;  // rad^2/s^2, signed
  double omega_eff = 0.0;     // rad/s
  double gamma_eff = 0.0;     // rad/s; equals mech_damping/2 at zero power
  CavityConfig configuration = CavityConfig::three_mirror;
  bool trapped = true;
  bool converged = true;      // fixed-point evaluation reached its tolerance
  int iterations = 0;
};

// Optical spring (rad^2/s^2) and damping (rad/s) contributions of one field
// at effective detuning `detuning_eff`, with `power_side` the per-port power
// of the matched double-sided setup (half the total pump for the
// single-sided cavity).
struct OpticalTerms {
  double spring = 0.0;
  double damping = 0.0;
};
OpticalTerms optical_terms(const SystemParams& p, double power_side, double detuning_eff,
                           double eval_freq);

// Closed-form effective parameters at a fixed evaluation frequency. The
// single-sided variant reads the effective detuning and pump bookkeeping off
// the supplied equilibrium branch.
EffectiveParams effective_params_3mc(const SystemParams& p, const DriveField& drive,
                                     double eval_freq);
EffectiveParams effective_params_2mc(const SystemParams& p, const TwoMirrorEquilibrium& eq,
                                     int branch, double eval_freq);
// Unified entry; for the single-sided cavity the default equilibrium branch
// is computed internally.
EffectiveParams effective_params_closed_form(const SystemParams& p, const DriveField& drive,
                                             CavityConfig config, double eval_freq,
                                             PumpConvention convention = PumpConvention::per_side);

struct FixedPointOptions {
  int max_iterations = 50;
  double rel_tol = 1e-8;
};

// Evaluates the closed form at the self-consistent frequency w = Omega_eff(w).
// Throws NumericalError when the fixed point does not converge; an
// anti-trapped result short-circuits to eval_freq = 0 and is returned flagged.
EffectiveParams effective_params_self_consistent(const SystemParams& p, const DriveField& drive,
                                                 CavityConfig config,
                                                 PumpConvention convention = PumpConvention::per_side,
                                                 FixedPointOptions opts = {});

// Additive two-field combination (trap + cool), evaluated at the common
// self-consistent frequency. For the single-sided cavity the equilibrium is
// the joint static balance under both fields and each field's power is its
// total pump.
EffectiveParams combine_fields(const SystemParams& p, const DriveField& trap,
                               const DriveField& cool, CavityConfig config,
                               FixedPointOptions opts = {});

// Mechanical susceptibility: displacement response per unit total force.
struct Susceptibility {
  Eigen::VectorXd freq_grid;                 // rad/s
  Eigen::VectorXcd chi;                      // m/N, NaN at singular points
  std::vector<std::uint8_t> point_ok;        // per-point solve status
  bool stable_system = true;                 // drift matrix verdict (warning flag)
  bool all_ok() const;
};

// Exact elimination of the optical fluctuations at each grid frequency: the
// full linear system (-iw I - A) u = e_P is solved directly, no Lorentzian
// assumption. Singular frequencies are flagged per point.
Susceptibility susceptibility_numeric(const DriftMatrix& a, const Eigen::VectorXd& freq_grid);

// Peak of |chi| located by a coarse scan plus parabolic refinement, for
// building fit windows without consulting the closed form.
double locate_resonance(const DriftMatrix& a, double freq_lo, double freq_hi, int coarse_points = 512);

struct LorentzianFit {
  double omega_eff = 0.0;   // rad/s
  double gamma_eff = 0.0;   // rad/s
  double mass = 0.0;        // kg, recovered from the fit itself
  double residual = 0.0;    // rms misfit relative to the data rms
};

// Least-squares fit of chi^-1 to M(W^2 - w^2) - i M G w. Throws NumericalError
// when the residual exceeds `residual_threshold` or the fitted resonance lies
// outside the grid (degenerate, strongly non-Lorentzian input).
LorentzianFit fit_effective_params(const Susceptibility& chi, double residual_threshold = 0.02);

struct FrequencyRatioResult {
  double approximate = 0.0;  // detuning-based closed expression
  double closed_form = 0.0;  // ratio of the two self-consistent frequencies
  double delta_prime = 0.0;  // rad/s, effective detuning of the single-sided branch
};

// Trap-stiffness ratio between the double-sided cavity at per-port power P and
// the single-sided cavity pumped with 2P, in the soft-spring regime.
FrequencyRatioResult frequency_ratio(const SystemParams& p, const DriveField& drive);

struct OccupancyResult {
  double n_quanta = 0.0;
  double damping_ratio = 0.0;  // intrinsic/effective damping as used
  double freq_ratio = 0.0;     // mech_freq / omega_eff as used
};

// Mean phonon number of the trapped mirror. The intrinsic damping entering
// the ratio is mech_damping/2, the zero-power value of gamma_eff, so an
// undriven oscillator has damping_ratio exactly 1 (thermal occupation).
// Throws InvalidParameter for anti-trapped or net-antidamped input.
OccupancyResult phonon_number(const SystemParams& p, const EffectiveParams& eff);
OccupancyResult phonon_number_from_ratios(const SystemParams& p, double damping_ratio,
                                          double freq_ratio);

// Largest mech_damping for which the occupancy stays below n_target given the
// optical contributions in `eff`. Returns infinity when any damping works,
// nullopt when the optical damping is non-positive (no passive bound exists).
std::optional<double> mech_damping_bound_for_occupancy(const SystemParams& p,
                                                       const EffectiveParams& eff,
                                                       double n_target = 1.0);

}  // namespace optotrap
