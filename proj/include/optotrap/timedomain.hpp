#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "optotrap/linear_dynamics.hpp"
#include "optotrap/params.hpp"

namespace optotrap {

// White-noise model for the stochastic integrator. vacuum_strength scales the
// optical input correlators (1 = vacuum); the symmetrized per-quadrature
// input intensity is vacuum_strength/2. thermal_force_psd is the classical
// white approximation of the Brownian force on the mirror.
struct NoiseModel {
  double vacuum_strength = 1.0;
  double thermal_force_psd = 0.0;  // N^2 s
  std::uint64_t seed = 0;
};

// mirror_mass * mech_damping * k_B * T: the white force intensity that
// reproduces equipartition for the bare damped oscillator.
double classical_thermal_force_psd(const SystemParams& p);

struct TrajectoryOptions {
  double dt = 0.0;                    // s
  std::int64_t n_steps = 0;
  std::int64_t record_stride = 1;
  std::vector<int> record_components; // empty: record the full state
  Eigen::VectorXd initial_state;      // SI, empty: zero
  bool allow_unstable = false;
  bool trapezoidal = false;           // semi-implicit deterministic part
  double amplitude_cutoff = 1e9;      // zero-point units, overflow abort
};

struct StateTrajectory {
  double dt = 0.0;                    // integrator step
  std::int64_t stride = 1;
  std::vector<int> components;        // column -> state index
  std::vector<std::string> component_names;
  Eigen::MatrixXd samples;            // SI, one row per recorded step
  Eigen::VectorXd final_state;        // SI, full state

  double sample_dt() const { return dt * static_cast<double>(stride); }
};

// Stochastic Euler integration of u' = A u + noise, order-1/2 strong, with one
// independent seed-derived Gaussian stream per noise channel. Deterministic
// given NoiseModel::seed. Throws InvalidParameter for an unstable drift
// matrix unless allow_unstable is set, and when dt exceeds 0.1 / ||A||
// (infinity norm of the zero-point-scaled generator); throws NumericalError
// on amplitude overflow.
StateTrajectory integrate_trajectory(const DriftMatrix& a, const NoiseModel& noise,
                                     const TrajectoryOptions& opts);

// Diagonal of the scaled diffusion matrix B B^T (variance growth rates) used
// by the integrator; exposed so covariance oracles see the same normalization.
Eigen::VectorXd scaled_diffusion_diagonal(const DriftMatrix& a, const NoiseModel& noise);

struct WindowConfig {
  int segment_samples = 0;
  double overlap = 0.5;       // fraction of segment_samples
  int component = -1;         // recorded column; -1 selects the dQ column
  double peak_prominence = 10.0;  // peak/median power required for a fit
};

struct SpectrumEstimate {
  Eigen::VectorXd freq_grid;  // rad/s, nonnegative frequencies
  Eigen::VectorXd psd;        // m^2 s, two-sided density
  int segments_averaged = 0;
  double fitted_peak = 0.0;   // rad/s
  double fitted_width = 0.0;  // rad/s, full width at half maximum
  double fit_residual = 0.0;  // rms log-misfit of the Lorentzian fit
};

// Segment-averaged Hann-windowed periodogram of one trajectory component with
// a displacement-Lorentzian fit about the dominant peak. Requires the series
// to be at least 32 segments long; throws NumericalError when no prominent
// peak exists.
SpectrumEstimate estimate_spectrum(const StateTrajectory& series, const WindowConfig& cfg);

// CSV export: time or angular frequency first, one column per component.
void write_trajectory_csv(std::ostream& os, const StateTrajectory& series);
void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& spectrum);

}  // namespace optotrap
