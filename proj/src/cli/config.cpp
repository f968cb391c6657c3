#include "cli/config.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

namespace optotrap::cli {

namespace {

struct UnitEntry {
  const char* suffix;
  const char* dimension;
  double factor;
};

// longest suffixes first so "mW" wins over "W"
constexpr std::array<UnitEntry, 27> unit_table{{
    {"kHz", "rate", 1e3},  {"MHz", "rate", 1e6},  {"GHz", "rate", 1e9}, {"Hz", "rate", 1.0},
    {"kg", "mass", 1.0},   {"mg", "mass", 1e-6},  {"ug", "mass", 1e-9}, {"g", "mass", 1e-3},
    {"pm", "length", 1e-12}, {"nm", "length", 1e-9}, {"um", "length", 1e-6},
    {"mm", "length", 1e-3}, {"cm", "length", 1e-2}, {"km", "length", 1e3}, {"m", "length", 1.0},
    {"kW", "power", 1e3},  {"mW", "power", 1e-3}, {"uW", "power", 1e-6},
    {"nW", "power", 1e-9}, {"W", "power", 1.0},
    {"mK", "temperature", 1e-3}, {"K", "temperature", 1.0},
    {"ns", "time", 1e-9}, {"us", "time", 1e-6}, {"ms", "time", 1e-3}, {"s", "time", 1.0},
    {"", "none", 1.0},
}};

double parse_quantity_string(const std::string& text, const std::string& dimension,
                             const std::string& field) {
  static const std::regex pattern(R"(^\s*([+-]?)\s*(2\*?pi\*)?\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z]*)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) {
    throw ConfigError(field + ": cannot parse quantity '" + text + "'");
  }
  const double sign = (m[1].str() == "-") ? -1.0 : 1.0;
  const double two_pi = m[2].matched && !m[2].str().empty() ? 2.0 * constants::pi : 1.0;
  const double mantissa = std::strtod(m[3].str().c_str(), nullptr);
  const std::string suffix = m[4].str();

  for (const auto& entry : unit_table) {
    if (suffix == entry.suffix) {
      if (!suffix.empty() && dimension != entry.dimension) {
        throw ConfigError(field + ": unit '" + suffix + "' does not measure a " + dimension);
      }
      return sign * two_pi * mantissa * entry.factor;
    }
  }
  throw ConfigError(field + ": unknown unit suffix '" + suffix + "'");
}

double get_quantity(const json& obj, const std::string& key, const std::string& dimension,
                    std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'");
  }
  return parse_quantity(obj.at(key), dimension, key);
}

}  // namespace

double parse_quantity(const json& value, const std::string& dimension, const std::string& field) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) return parse_quantity_string(value.get<std::string>(), dimension, field);
  throw ConfigError(field + ": expected a number or a unit-suffixed string");
}

const DriveField* RunConfig::find(FieldRole role) const {
  for (const auto& f : fields) {
    if (f.role == role) return &f.field;
  }
  return nullptr;
}

const DriveField& RunConfig::single_field() const {
  if (fields.size() == 1) return fields.front().field;
  if (const DriveField* trap = find(FieldRole::trap)) return *trap;
  throw ConfigError("this command needs a single field (or a field tagged 'trap')");
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("top-level config must be a JSON object");
  RunConfig cfg;

  const std::string configuration = doc.value("configuration", std::string("3MC"));
  if (configuration == "3MC") {
    cfg.configuration = CavityConfig::three_mirror;
  } else if (configuration == "2MC") {
    cfg.configuration = CavityConfig::two_mirror;
  } else {
    throw ConfigError("configuration must be '3MC' or '2MC'");
  }

  if (!doc.contains("system") || !doc.at("system").is_object()) {
    throw ConfigError("missing 'system' object");
  }
  const json& sys = doc.at("system");
  cfg.system.mirror_mass = get_quantity(sys, "mirror_mass", "mass");
  cfg.system.mech_freq = get_quantity(sys, "mech_freq", "rate");
  cfg.system.mech_damping = get_quantity(sys, "mech_damping", "rate");
  cfg.system.subcavity_length = get_quantity(sys, "subcavity_length", "length");
  cfg.system.wavelength = get_quantity(sys, "wavelength", "length");
  cfg.system.cavity_decay = get_quantity(sys, "cavity_decay", "rate");
  cfg.system.bath_temperature = get_quantity(sys, "bath_temperature", "temperature");

  if (!doc.contains("fields") || !doc.at("fields").is_array() || doc.at("fields").empty()) {
    throw ConfigError("at least one drive field is required");
  }
  bool have_trap = false, have_cool = false;
  for (const auto& fj : doc.at("fields")) {
    RoleField rf;
    std::string role = fj.value("role", std::string());
    if (role.empty()) {
      if (doc.at("fields").size() == 1) {
        role = "trap";
      } else {
        throw ConfigError("fields need explicit roles when more than one is given");
      }
    }
    if (role == "trap") {
      if (have_trap) throw ConfigError("duplicate 'trap' field role");
      have_trap = true;
      rf.role = FieldRole::trap;
    } else if (role == "cool") {
      if (have_cool) throw ConfigError("duplicate 'cool' field role");
      have_cool = true;
      rf.role = FieldRole::cool;
    } else {
      throw ConfigError("field role must be 'trap' or 'cool'");
    }
    rf.field.power = get_quantity(fj, "power", "power");
    rf.field.detuning = get_quantity(fj, "detuning", "rate");
    cfg.fields.push_back(rf);
  }

  if (doc.contains("two_mirror")) {
    const json& tm = doc.at("two_mirror");
    if (tm.value("power_is_total", false)) cfg.convention = PumpConvention::total;
  }

  if (doc.contains("simulate")) {
    const json& sim = doc.at("simulate");
    cfg.simulate.dt = get_quantity(sim, "dt", "time", 0.0);
    cfg.simulate.steps = sim.value("steps", cfg.simulate.steps);
    cfg.simulate.record_stride = sim.value("record_stride", cfg.simulate.record_stride);
    cfg.simulate.segment_samples = sim.value("segment_samples", cfg.simulate.segment_samples);
    cfg.simulate.overlap = sim.value("overlap", cfg.simulate.overlap);
    cfg.simulate.vacuum_strength = sim.value("vacuum_strength", cfg.simulate.vacuum_strength);
    if (sim.contains("thermal_force_psd")) {
      cfg.simulate.thermal_force_psd =
          parse_quantity(sim.at("thermal_force_psd"), "none", "thermal_force_psd");
    }
    cfg.simulate.trapezoidal = sim.value("trapezoidal", false);
    cfg.simulate.displacement_only = sim.value("displacement_only", true);
    cfg.simulate.write_trajectory = sim.value("write_trajectory", true);
    if (cfg.simulate.steps <= 0 || cfg.simulate.record_stride < 1) {
      throw ConfigError("simulate.steps and simulate.record_stride must be positive");
    }
  }

  if (doc.contains("potential")) {
    const json& pot = doc.at("potential");
    if (pot.contains("window")) {
      cfg.potential.window = parse_quantity(pot.at("window"), "length", "potential.window");
    }
    cfg.potential.samples = pot.value("samples", cfg.potential.samples);
  }

  if (doc.contains("effective")) {
    const json& eff = doc.at("effective");
    cfg.effective.grid_points = eff.value("grid_points", cfg.effective.grid_points);
    cfg.effective.window_fraction = eff.value("window_fraction", cfg.effective.window_fraction);
  }

  if (doc.contains("sweep")) {
    const json& sw = doc.at("sweep");
    SweepSpec spec;
    auto parse_axis = [&](const json& ax, const char* tag) {
      SweepAxis axis;
      if (!ax.contains("path")) throw ConfigError(std::string(tag) + ": missing 'path'");
      axis.path = ax.at("path").get<std::string>();
      const std::string dim = [&]() -> std::string {
        if (axis.path == "system.mirror_mass") return "mass";
        if (axis.path == "system.subcavity_length" || axis.path == "system.wavelength")
          return "length";
        if (axis.path == "system.bath_temperature") return "temperature";
        if (axis.path.ends_with(".power")) return "power";
        return "rate";
      }();
      axis.start = parse_quantity(ax.at("start"), dim, axis.path + ".start");
      axis.stop = parse_quantity(ax.at("stop"), dim, axis.path + ".stop");
      axis.points = ax.value("points", 0);
      const std::string spacing = ax.value("spacing", std::string("linear"));
      axis.log_spacing = spacing == "log";
      if (!axis.log_spacing && spacing != "linear") {
        throw ConfigError(std::string(tag) + ": spacing must be 'linear' or 'log'");
      }
      if (axis.points < 2) throw ConfigError(std::string(tag) + ": points must be >= 2");
      if (!std::isfinite(axis.start) || !std::isfinite(axis.stop) || axis.start >= axis.stop) {
        throw ConfigError(std::string(tag) + ": range must be finite and ordered");
      }
      if (axis.log_spacing && axis.start <= 0.0) {
        throw ConfigError(std::string(tag) + ": log spacing needs a positive range");
      }
      return axis;
    };
    if (!sw.contains("axis1")) throw ConfigError("sweep: missing 'axis1'");
    spec.axis1 = parse_axis(sw.at("axis1"), "axis1");
    if (sw.contains("axis2")) spec.axis2 = parse_axis(sw.at("axis2"), "axis2");
    if (sw.contains("outputs")) {
      for (const auto& o : sw.at("outputs")) spec.outputs.push_back(o.get<std::string>());
    }
    if (spec.outputs.empty()) spec.outputs = {"omega_eff", "gamma_eff"};
    for (const auto& o : spec.outputs) {
      if (o != "omega_eff" && o != "gamma_eff" && o != "n_quanta" && o != "stability" &&
          o != "root_count" && o != "delta_prime") {
        throw ConfigError("sweep: unknown output '" + o + "'");
      }
    }
    cfg.sweep = spec;
  }

  const auto report = validate(cfg.system, [&] {
    std::vector<DriveField> fs;
    for (const auto& f : cfg.fields) fs.push_back(f.field);
    return fs;
  }());
  if (!report.ok()) {
    std::string msg = "invalid parameters:";
    for (const auto& issue : report.issues) {
      if (issue.severity == ValidationIssue::Severity::error) {
        msg += " [" + issue.field + "] " + issue.message + ";";
      }
    }
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

json system_to_json(const SystemParams& p) {
  json j;
  j["mirror_mass"] = p.mirror_mass;
  j["mech_freq"] = p.mech_freq;
  j["mech_damping"] = p.mech_damping;
  j["subcavity_length"] = p.subcavity_length;
  j["wavelength"] = p.wavelength;
  j["cavity_decay"] = p.cavity_decay;
  j["bath_temperature"] = p.bath_temperature;
  return j;
}

SystemParams system_from_json(const json& j) {
  SystemParams p;
  p.mirror_mass = j.at("mirror_mass").get<double>();
  p.mech_freq = j.at("mech_freq").get<double>();
  p.mech_damping = j.at("mech_damping").get<double>();
  p.subcavity_length = j.at("subcavity_length").get<double>();
  p.wavelength = j.at("wavelength").get<double>();
  p.cavity_decay = j.at("cavity_decay").get<double>();
  p.bath_temperature = j.at("bath_temperature").get<double>();
  return p;
}

json resolved_config_json(const RunConfig& cfg) {
  json j;
  j["configuration"] = cfg.configuration == CavityConfig::three_mirror ? "3MC" : "2MC";
  j["system"] = system_to_json(cfg.system);
  json fields = json::array();
  for (const auto& f : cfg.fields) {
    json fj;
    fj["role"] = f.role == FieldRole::trap ? "trap" : "cool";
    fj["power"] = f.field.power;
    fj["detuning"] = f.field.detuning;
    fields.push_back(fj);
  }
  j["fields"] = fields;
  j["two_mirror"] = {{"power_is_total", cfg.convention == PumpConvention::total}};
  return j;
}

}  // namespace optotrap::cli
