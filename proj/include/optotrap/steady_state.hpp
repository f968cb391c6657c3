#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "optotrap/params.hpp"

namespace optotrap {

// Whether DriveField::power is the per-port power of the matched double-sided
// setup (the two-mirror pump is then doubled to 2*power, the convention used
// when comparing configurations at equal total power) or already the total
// two-mirror pump.
enum class PumpConvention { per_side, total };

struct ThreeMirrorSteadyState {
  double field_amplitude = 0.0;  // dimensionless, common to both sub-cavity modes
  double mirror_position = 0.0;  // m, exactly 0
  double mirror_momentum = 0.0;  // kg m/s, exactly 0
};

enum class StabilityClass { monostable, bistable, critical };

struct TwoMirrorEquilibrium {
  std::vector<double> positions;            // m, real roots sorted ascending
  std::vector<double> effective_detunings;  // rad/s, detuning - coupling * q per root
  std::vector<double> field_amplitudes;     // dimensionless intracavity amplitude per root
  StabilityClass stability_class = StabilityClass::monostable;
  int physical_branch = 0;                  // index of the smallest-|q| root
  double total_power = 0.0;                 // W actually applied to the cavity
};

struct BistabilityResult {
  enum class Classification { never_bistable, conditionally_bistable, critical };
  Classification classification = Classification::never_bistable;
  std::optional<double> threshold_power;  // W, smallest in-range power with three real roots
};

// Steady intracavity amplitude of the symmetric double-sided cavity; the
// mirror rests at the center with zero momentum for any drive.
ThreeMirrorSteadyState three_mirror_steady_state(const SystemParams& p, const DriveField& drive);

// All real mirror equilibria of the single-sided cavity from the force-balance
// cubic, each polished to a force residual below 1e-10 relative.
// Throws NumericalError if polishing does not converge.
TwoMirrorEquilibrium two_mirror_equilibrium(const SystemParams& p, const DriveField& drive,
                                            PumpConvention convention = PumpConvention::per_side);

// Classifies a detuning as never bistable (single equilibrium at every power)
// or conditionally bistable, and scans [power_range.first, power_range.second]
// for the smallest power with three real roots via the cubic discriminant.
BistabilityResult bistability_analysis(const SystemParams& p, double detuning,
                                       std::pair<double, double> power_range);

// Real roots of the double-sided static force balance on [-window, window],
// located by a dense sign-change scan plus bisection refinement.
std::vector<double> three_mirror_monostability_check(const SystemParams& p, const DriveField& drive,
                                                     double search_window);

// Static radiation forces as a function of a frozen mirror position q.
// Single-sided cavity, total pump power p_total:
double two_mirror_radiation_force(const SystemParams& p, double p_total, double detuning, double q);
// Net force in the double-sided cavity, power per port p_side:
double three_mirror_net_radiation_force(const SystemParams& p, double p_side, double detuning,
                                        double q);

}  // namespace optotrap
