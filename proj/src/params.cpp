#include "optotrap/params.hpp"

#include <cmath>
#include <limits>

#include "optotrap/steady_state.hpp"

namespace optotrap {

namespace {

// A cavity shorter than this many wavelengths no longer supports the
// single-resonance description used throughout.
constexpr double min_wavelengths_per_cavity = 100.0;

void collect_issues(const SystemParams& p, std::vector<ValidationIssue>& out) {
  using Severity = ValidationIssue::Severity;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      out.push_back({Severity::error, name, std::string(name) + " must be strictly positive"});
    }
  };
  positive(p.mirror_mass, "mirror_mass");
  positive(p.mech_freq, "mech_freq");
  positive(p.mech_damping, "mech_damping");
  positive(p.subcavity_length, "subcavity_length");
  positive(p.wavelength, "wavelength");
  positive(p.cavity_decay, "cavity_decay");
  positive(p.bath_temperature, "bath_temperature");

  if (p.mech_damping > 0.0 && p.mech_freq > 0.0 && !(p.mech_damping < p.mech_freq)) {
    out.push_back({Severity::error, "mech_damping",
                   "mech_damping must be below mech_freq (underdamped oscillator)"});
  }
  if (p.wavelength > 0.0 && p.subcavity_length > 0.0 &&
      p.subcavity_length < min_wavelengths_per_cavity * p.wavelength) {
    out.push_back({Severity::error, "wavelength",
                   "subcavity_length must exceed 100 wavelengths"});
  }
}

}  // namespace

DerivedConstants derive_constants(const SystemParams& p) {
  std::vector<ValidationIssue> issues;
  collect_issues(p, issues);
  if (!issues.empty()) {
    throw InvalidParameter("invalid SystemParams: " + issues.front().field + ": " +
                           issues.front().message);
  }
  DerivedConstants d;
  d.optical_freq = 2.0 * constants::pi * constants::speed_of_light / p.wavelength;
  d.coupling = d.optical_freq / p.subcavity_length;
  d.thermal_quanta_scale =
      constants::boltzmann * p.bath_temperature / (constants::hbar * p.mech_freq);
  return d;
}

bool ValidationReport::ok() const { return error_count() == 0; }

bool ValidationReport::clean() const { return issues.empty(); }

std::size_t ValidationReport::error_count() const {
  std::size_t n = 0;
  for (const auto& i : issues) {
    if (i.severity == ValidationIssue::Severity::error) ++n;
  }
  return n;
}

ValidationReport validate(const SystemParams& p, std::span<const DriveField> fields) {
  using Severity = ValidationIssue::Severity;
  ValidationReport report;
  collect_issues(p, report.issues);

  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    const std::string tag = "fields[" + std::to_string(k) + "]";
    if (!(f.power >= 0.0) || !std::isfinite(f.power)) {
      report.issues.push_back({Severity::error, tag + ".power", "power must be non-negative"});
    }
    if (!std::isfinite(f.detuning)) {
      report.issues.push_back({Severity::error, tag + ".detuning", "detuning must be finite"});
    }
  }
  if (!report.ok()) return report;

  // Predicted static recoil under single-sided pumping; the description
  // assumes displacements well below the wavelength.
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    if (f.power <= 0.0) continue;
    try {
      const auto eq = two_mirror_equilibrium(p, f, PumpConvention::total);
      double q_max = 0.0;
      for (double q : eq.positions) q_max = std::max(q_max, std::abs(q));
      if (q_max > p.wavelength / 10.0) {
        report.issues.push_back(
            {Severity::warning, "fields[" + std::to_string(k) + "].power",
             "predicted static displacement exceeds wavelength/10; the small-displacement "
             "model is unreliable here"});
      }
    } catch (const NumericalError&) {
      report.issues.push_back({Severity::warning, "fields[" + std::to_string(k) + "]",
                               "static equilibrium search failed for this field"});
    }
  }
  return report;
}

}  // namespace optotrap
