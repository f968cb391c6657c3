#pragma once

#include <Eigen/Dense>
#include <vector>

#include "optotrap/params.hpp"
#include "optotrap/steady_state.hpp"

namespace optotrap {

// Static trapping potential and force profile over a symmetric position
// window. The potential zero is fixed at q = 0 so curves are comparable
// across parameter sets; the radiation part uses the closed arctangent
// antiderivative of the steady intracavity intensity.
struct PotentialCurve {
  Eigen::VectorXd positions;  // m, uniform samples
  Eigen::VectorXd potential;  // J
  Eigen::VectorXd force;      // N, total (spring + radiation)

  struct Minimum {
    double position = 0.0;   // m
    double curvature = 0.0;  // J/m^2
  };
  std::vector<Minimum> minima;  // sorted by position
};

// Valid for |q| <= wavelength/4 (single resonance of each sub-cavity);
// a larger window throws InvalidParameter.
PotentialCurve potential_2mc(const SystemParams& p, const DriveField& drive, double q_window,
                             int n_samples = 2001,
                             PumpConvention convention = PumpConvention::per_side);
PotentialCurve potential_3mc(const SystemParams& p, const DriveField& drive, double q_window,
                             int n_samples = 2001);

}  // namespace optotrap
