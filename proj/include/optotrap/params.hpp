#pragma once

#include <span>
#include <string>
#include <vector>

#include "optotrap/constants.hpp"
#include "optotrap/errors.hpp"

namespace optotrap {

// Mechanical and cavity constants in strict SI. All rates are angular (rad/s
// or s^-1); the momentum equation damps as -(mech_damping/2) * P, so the bare
// mechanical susceptibility denominator is M(W^2 - w^2) - i M (mech_damping/2) w.
struct SystemParams {
  double mirror_mass = 0.0;       // kg
  double mech_freq = 0.0;         // rad/s
  double mech_damping = 0.0;      // rad/s
  double subcavity_length = 0.0;  // m
  double wavelength = 0.0;        // m
  double cavity_decay = 0.0;      // rad/s, identical for both sub-cavities
  double bath_temperature = 0.0;  // K
};

// One pump field. detuning = cavity resonance minus laser frequency; a
// negative detuning traps (stiffens the spring) and heats, a positive one
// cools (adds damping) and anti-traps.
struct DriveField {
  double power = 0.0;     // W per pumped port
  double detuning = 0.0;  // rad/s
};

struct DerivedConstants {
  double optical_freq = 0.0;          // rad/s, 2*pi*c / wavelength
  double coupling = 0.0;              // rad s^-1 m^-1, optical_freq / subcavity_length
  double thermal_quanta_scale = 0.0;  // k_B T / (hbar * mech_freq)
};

// Throws InvalidParameter naming the first violated invariant.
DerivedConstants derive_constants(const SystemParams& p);

struct ValidationIssue {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const;     // no errors (warnings allowed)
  bool clean() const;  // no issues at all
  std::size_t error_count() const;
};

// Report-style check of every SystemParams/DriveField invariant. Also warns
// when the predicted static mirror displacement under single-sided pumping
// approaches the optical wavelength (the model assumes displacement << lambda).
ValidationReport validate(const SystemParams& p, std::span<const DriveField> fields);

}  // namespace optotrap
