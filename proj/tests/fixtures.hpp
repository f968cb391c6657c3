#pragma once

#include "optotrap/params.hpp"

namespace optotrap::testing {

// Workhorse parameter set used throughout: 1 mg mirror on a 2*pi*100 Hz
// spring between 2.5 cm sub-cavities at 1064 nm with a 1e7 s^-1 linewidth,
// driven near half a linewidth below resonance. The mechanical damping is a
// toolkit choice (500 rad/s keeps the single-field trapping point with its
// weak optical anti-damping on the stable side and the driven linewidth
// resolvable in short stochastic runs).
inline SystemParams reference_system() {
  SystemParams p;
  p.mirror_mass = 1e-6;
  p.mech_freq = 2.0 * constants::pi * 100.0;
  p.mech_damping = 500.0;
  p.subcavity_length = 0.025;
  p.wavelength = 1064e-9;
  p.cavity_decay = 1e7;
  p.bath_temperature = 300.0;
  return p;
}

inline DriveField reference_drive() {
  DriveField d;
  d.power = 1e-3;
  d.detuning = -0.5e7;
  return d;
}

// Ground-state push: shorter cavity, strong far-detuned trap plus a weak
// near-resonant cooling beam.
inline SystemParams ground_state_system() {
  SystemParams p = reference_system();
  p.subcavity_length = 0.01;
  p.mech_damping = 2.0 * constants::pi * 100.0 / 1e4;  // quality factor 1e4
  return p;
}

inline DriveField ground_state_trap() { return {0.4, -2.5e7}; }
inline DriveField ground_state_cool() { return {5e-3, +0.5e7}; }

}  // namespace optotrap::testing
