#pragma once

#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "optotrap/linear_dynamics.hpp"
#include "optotrap/params.hpp"
#include "optotrap/steady_state.hpp"

namespace optotrap::cli {

using json = nlohmann::ordered_json;

// Invalid or unparsable configuration; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FieldRole { trap, cool };

struct RoleField {
  FieldRole role = FieldRole::trap;
  DriveField field;
};

struct SweepAxis {
  std::string path;       // system.<name>, fields.trap.<name>, fields.cool.<name>
  double start = 0.0;     // SI
  double stop = 0.0;      // SI
  int points = 0;
  bool log_spacing = false;
};

struct SweepSpec {
  SweepAxis axis1;
  std::optional<SweepAxis> axis2;
  std::vector<std::string> outputs;
};

struct SimulateSpec {
  double dt = 0.0;              // s; 0: pick 0.05/||A|| automatically
  std::int64_t steps = 1 << 21;
  std::int64_t record_stride = 1;
  int segment_samples = 4096;
  double overlap = 0.5;
  double vacuum_strength = 1.0;
  std::optional<double> thermal_force_psd;  // default: classical value from the system
  bool trapezoidal = false;
  bool displacement_only = true;   // record only dQ (full state otherwise)
  bool write_trajectory = true;    // long runs may skip the (large) series file
};

struct PotentialSpec {
  std::optional<double> window;  // m; default wavelength/8
  int samples = 2001;
};

struct EffectiveSpec {
  int grid_points = 129;
  double window_fraction = 0.08;  // half-width of the fit window around the peak
};

struct RunConfig {
  SystemParams system;
  std::vector<RoleField> fields;
  CavityConfig configuration = CavityConfig::three_mirror;
  PumpConvention convention = PumpConvention::per_side;
  SimulateSpec simulate;
  PotentialSpec potential;
  EffectiveSpec effective;
  std::optional<SweepSpec> sweep;

  const DriveField* find(FieldRole role) const;
  // the one field single-field commands act on; throws ConfigError if ambiguous
  const DriveField& single_field() const;
};

// Unit-suffixed quantity parser. Accepts plain JSON numbers (strict SI) or
// strings like "1mW", "1064nm", "-5MHz", "2pi*100Hz"; frequency suffixes are
// read as plain s^-1 with the 2pi* factor always explicit.
double parse_quantity(const json& value, const std::string& dimension, const std::string& field);

RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);

// Resolved strict-SI echo of the configuration for the metadata sidecar.
json resolved_config_json(const RunConfig& cfg);

json system_to_json(const SystemParams& p);
SystemParams system_from_json(const json& j);

}  // namespace optotrap::cli
