#include "cli/run.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <thread>

#include "cli/config.hpp"
#include "optotrap/landscape.hpp"
#include "optotrap/response.hpp"
#include "optotrap/timedomain.hpp"
#include "optotrap/version.hpp"

namespace optotrap::cli {

namespace {

namespace fs = std::filesystem;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

// refusal to act on a dynamically unstable configuration; exit code 3
struct UnstableRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Csv {
  std::ofstream out;
  explicit Csv(const fs::path& path) : out(path) {
    if (!out) throw NumericalError("cannot open output file " + path.string());
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }
};

struct CommandContext {
  RunConfig cfg;
  fs::path out_dir;
  std::uint64_t seed = 0;
  bool allow_unstable = false;
  bool equal_total_power = true;
  std::string command;
  json sidecar_extra = json::object();
  std::vector<std::string> output_files;

  PumpConvention compare_convention() const {
    return equal_total_power ? PumpConvention::per_side : PumpConvention::total;
  }

  fs::path file(const std::string& name) { return out_dir / name; }
  void wrote(const std::string& name) { output_files.push_back(name); }

  void write_sidecar() {
    json j;
    j["artifact"] = "optotrap";
    j["version"] = optotrap::version;
    j["command"] = command;
    j["seed"] = seed;
    j["allow_unstable"] = allow_unstable;
    j["equal_total_power"] = equal_total_power;
    j["config"] = resolved_config_json(cfg);
    j["extra"] = sidecar_extra;
    j["outputs"] = output_files;
    std::ofstream out(file(command + ".run.json"));
    out << j.dump(2) << '\n';
  }
};

DriftMatrix build_drift(const RunConfig& cfg, const DriveField& field) {
  if (cfg.configuration == CavityConfig::three_mirror) {
    return build_drift_matrix_3mc(cfg.system, field);
  }
  return build_drift_matrix_2mc(cfg.system, field, cfg.convention);
}

void require_stable(const DriftMatrix& a, bool allow_unstable) {
  const auto report = routh_hurwitz_stable(a);
  if (!report.routh_hurwitz_stable && !allow_unstable) {
    throw UnstableRefusal("configuration is dynamically unstable (max Re eigenvalue " +
                          fmt(report.max_real_part) + " rad/s); pass --allow-unstable");
  }
}

// ---------------------------------------------------------------- steady

void cmd_steady(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  Csv csv(ctx.file("steady.csv"));
  if (ctx.cfg.configuration == CavityConfig::three_mirror) {
    const auto s = three_mirror_steady_state(ctx.cfg.system, field);
    csv.row({"field_amplitude_1", "mirror_position_m", "mirror_momentum_kg_m_per_s"});
    csv.row({fmt(s.field_amplitude), fmt(s.mirror_position), fmt(s.mirror_momentum)});
  } else {
    const auto eq = two_mirror_equilibrium(ctx.cfg.system, field, ctx.cfg.convention);
    csv.row({"position_m", "effective_detuning_rad_per_s", "effective_detuning_over_decay_1",
             "field_amplitude_1", "stability_class", "physical_branch"});
    const char* cls = eq.stability_class == StabilityClass::monostable ? "monostable"
                      : eq.stability_class == StabilityClass::bistable ? "bistable"
                                                                       : "critical";
    for (std::size_t i = 0; i < eq.positions.size(); ++i) {
      csv.row({fmt(eq.positions[i]), fmt(eq.effective_detunings[i]),
               fmt(eq.effective_detunings[i] / ctx.cfg.system.cavity_decay),
               fmt(eq.field_amplitudes[i]), cls,
               static_cast<int>(i) == eq.physical_branch ? "1" : "0"});
    }
  }
  ctx.wrote("steady.csv");
}

// ------------------------------------------------------------- stability

void cmd_stability(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  std::vector<DriftMatrix> branches;
  if (ctx.cfg.configuration == CavityConfig::three_mirror) {
    branches.push_back(build_drift_matrix_3mc(ctx.cfg.system, field));
  } else {
    const auto eq = two_mirror_equilibrium(ctx.cfg.system, field, ctx.cfg.convention);
    for (int b = 0; b < static_cast<int>(eq.positions.size()); ++b) {
      branches.push_back(build_drift_matrix_2mc(ctx.cfg.system, field, eq, b, ctx.cfg.convention));
    }
  }
  Csv csv(ctx.file("stability.csv"));
  csv.row({"branch", "routh_hurwitz_stable", "critical", "max_real_part_rad_per_s"});
  Csv eig(ctx.file("eigenvalues.csv"));
  eig.row({"branch", "real_rad_per_s", "imag_rad_per_s"});
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto report = routh_hurwitz_stable(branches[b]);
    csv.row({std::to_string(b), report.routh_hurwitz_stable ? "1" : "0",
             report.critical ? "1" : "0", fmt(report.max_real_part)});
    for (const auto& ev : report.eigenvalues) {
      eig.row({std::to_string(b), fmt(ev.real()), fmt(ev.imag())});
    }
  }
  ctx.wrote("stability.csv");
  ctx.wrote("eigenvalues.csv");
}

// ------------------------------------------------------------- effective

void cmd_effective(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  const auto closed = effective_params_self_consistent(ctx.cfg.system, field,
                                                       ctx.cfg.configuration, ctx.cfg.convention);

  const auto drift = build_drift(ctx.cfg, field);
  require_stable(drift, ctx.allow_unstable);

  double fit_omega = nan_value, fit_gamma = nan_value, fit_mass = nan_value,
         fit_residual = nan_value;
  std::string fit_note;
  try {
    const double lo = ctx.cfg.system.mech_freq / 50.0;
    const double hi = ctx.cfg.system.cavity_decay;
    const double peak = locate_resonance(drift, lo, hi);
    const double w = ctx.cfg.effective.window_fraction;
    const int n = ctx.cfg.effective.grid_points;
    Eigen::VectorXd grid(n);
    for (int i = 0; i < n; ++i) {
      grid(i) = peak * (1.0 - w + 2.0 * w * i / (n - 1));
    }
    const auto chi = susceptibility_numeric(drift, grid);
    const auto fit = fit_effective_params(chi);
    fit_omega = fit.omega_eff;
    fit_gamma = fit.gamma_eff;
    fit_mass = fit.mass;
    fit_residual = fit.residual;
  } catch (const std::exception& e) {
    fit_note = e.what();
  }

  Csv csv(ctx.file("effective.csv"));
  csv.row({"eval_freq_rad_per_s", "omega_eff_rad_per_s", "gamma_eff_rad_per_s",
           "omega_eff_over_mech_1", "trapped", "fit_omega_eff_rad_per_s",
           "fit_gamma_eff_rad_per_s", "fit_mass_kg", "fit_residual_1"});
  csv.row({fmt(closed.eval_freq), fmt(closed.omega_eff), fmt(closed.gamma_eff),
           fmt(closed.omega_eff / ctx.cfg.system.mech_freq), closed.trapped ? "1" : "0",
           fmt(fit_omega), fmt(fit_gamma), fmt(fit_mass), fmt(fit_residual)});
  if (!fit_note.empty()) ctx.sidecar_extra["fit_error"] = fit_note;
  ctx.wrote("effective.csv");
}

// ------------------------------------------------------------- potential

void cmd_potential(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  const double window = ctx.cfg.potential.window.value_or(ctx.cfg.system.wavelength / 8.0);
  const auto curve =
      ctx.cfg.configuration == CavityConfig::three_mirror
          ? potential_3mc(ctx.cfg.system, field, window, ctx.cfg.potential.samples)
          : potential_2mc(ctx.cfg.system, field, window, ctx.cfg.potential.samples,
                          ctx.cfg.convention);

  Csv csv(ctx.file("potential.csv"));
  csv.row({"position_m", "potential_J", "force_N"});
  for (Eigen::Index i = 0; i < curve.positions.size(); ++i) {
    csv.row({fmt(curve.positions(i)), fmt(curve.potential(i)), fmt(curve.force(i))});
  }
  Csv minima(ctx.file("minima.csv"));
  minima.row({"position_m", "curvature_J_per_m2"});
  for (const auto& m : curve.minima) {
    minima.row({fmt(m.position), fmt(m.curvature)});
  }
  ctx.wrote("potential.csv");
  ctx.wrote("minima.csv");
}

// ---------------------------------------------------------------- quanta

void cmd_quanta(CommandContext& ctx) {
  const DriveField* trap = ctx.cfg.find(FieldRole::trap);
  if (!trap) throw ConfigError("quanta needs a field tagged 'trap'");
  const DriveField* cool = ctx.cfg.find(FieldRole::cool);

  const auto eff = cool ? combine_fields(ctx.cfg.system, *trap, *cool, ctx.cfg.configuration)
                        : effective_params_self_consistent(ctx.cfg.system, *trap,
                                                           ctx.cfg.configuration,
                                                           ctx.cfg.convention);
  const auto occ = phonon_number(ctx.cfg.system, eff);
  const auto bound = mech_damping_bound_for_occupancy(ctx.cfg.system, eff, 1.0);

  Csv csv(ctx.file("quanta.csv"));
  csv.row({"n_quanta_1", "damping_ratio_1", "freq_ratio_1", "omega_eff_rad_per_s",
           "gamma_eff_rad_per_s", "mech_damping_bound_rad_per_s", "quality_factor_bound_1"});
  const double bound_v = bound ? *bound : nan_value;
  csv.row({fmt(occ.n_quanta), fmt(occ.damping_ratio), fmt(occ.freq_ratio), fmt(eff.omega_eff),
           fmt(eff.gamma_eff), fmt(bound_v),
           fmt(bound ? ctx.cfg.system.mech_freq / *bound : nan_value)});
  ctx.wrote("quanta.csv");
}

// -------------------------------------------------------------- simulate

void cmd_simulate(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  const auto drift = build_drift(ctx.cfg, field);
  const auto report = routh_hurwitz_stable(drift);
  if (!report.routh_hurwitz_stable && !ctx.allow_unstable) {
    throw UnstableRefusal("drift matrix is dynamically unstable (max Re eigenvalue " +
                          fmt(report.max_real_part) + " rad/s); pass --allow-unstable");
  }

  NoiseModel noise;
  noise.seed = ctx.seed;
  noise.vacuum_strength = ctx.cfg.simulate.vacuum_strength;
  noise.thermal_force_psd = ctx.cfg.simulate.thermal_force_psd.value_or(
      classical_thermal_force_psd(ctx.cfg.system));

  TrajectoryOptions opts;
  const double norm = drift.scaled().cwiseAbs().rowwise().sum().maxCoeff();
  opts.dt = ctx.cfg.simulate.dt > 0.0 ? ctx.cfg.simulate.dt : 0.05 / norm;
  opts.n_steps = ctx.cfg.simulate.steps;
  opts.record_stride = ctx.cfg.simulate.record_stride;
  opts.allow_unstable = ctx.allow_unstable;
  opts.trapezoidal = ctx.cfg.simulate.trapezoidal;
  if (ctx.cfg.simulate.displacement_only) {
    opts.record_components = {drift.position_index()};
  }

  const auto series = integrate_trajectory(drift, noise, opts);

  if (ctx.cfg.simulate.write_trajectory) {
    std::ofstream out(ctx.file("trajectory.csv"));
    write_trajectory_csv(out, series);
    ctx.wrote("trajectory.csv");
  }

  ctx.sidecar_extra["dt"] = opts.dt;
  ctx.sidecar_extra["thermal_force_psd"] = noise.thermal_force_psd;

  WindowConfig wc;
  wc.segment_samples = ctx.cfg.simulate.segment_samples;
  wc.overlap = ctx.cfg.simulate.overlap;
  if (series.samples.rows() >= 32ll * wc.segment_samples) {
    try {
      const auto spectrum = estimate_spectrum(series, wc);
      std::ofstream out(ctx.file("spectrum.csv"));
      write_spectrum_csv(out, spectrum);
      ctx.wrote("spectrum.csv");
      ctx.sidecar_extra["spectrum"] = {{"fitted_peak", spectrum.fitted_peak},
                                       {"fitted_width", spectrum.fitted_width},
                                       {"fit_residual", spectrum.fit_residual},
                                       {"segments_averaged", spectrum.segments_averaged}};
    } catch (const std::exception& e) {
      ctx.sidecar_extra["spectrum_error"] = e.what();
    }
  } else {
    ctx.sidecar_extra["spectrum_skipped"] = "series shorter than 32 segments";
  }
}

// ----------------------------------------------------------------- sweep

struct SweepSetter {
  std::function<void(RunConfig&, double)> apply;
  std::string header;
};

SweepSetter make_setter(const RunConfig& cfg, const SweepAxis& axis) {
  const std::string& path = axis.path;
  auto system_member = [&](double SystemParams::* member, const char* unit) {
    return SweepSetter{[member](RunConfig& c, double v) { c.system.*member = v; },
                       path + "_" + unit};
  };
  if (path == "system.mirror_mass") return system_member(&SystemParams::mirror_mass, "kg");
  if (path == "system.mech_freq") return system_member(&SystemParams::mech_freq, "rad_per_s");
  if (path == "system.mech_damping")
    return system_member(&SystemParams::mech_damping, "rad_per_s");
  if (path == "system.subcavity_length")
    return system_member(&SystemParams::subcavity_length, "m");
  if (path == "system.wavelength") return system_member(&SystemParams::wavelength, "m");
  if (path == "system.cavity_decay")
    return system_member(&SystemParams::cavity_decay, "rad_per_s");
  if (path == "system.bath_temperature")
    return system_member(&SystemParams::bath_temperature, "K");

  const bool trap_path = path.starts_with("fields.trap.");
  const bool cool_path = path.starts_with("fields.cool.");
  if (trap_path || cool_path) {
    const FieldRole role = trap_path ? FieldRole::trap : FieldRole::cool;
    if (!cfg.find(role)) {
      throw ConfigError("sweep path '" + path + "' refers to a field role not in the config");
    }
    const std::string member = path.substr(path.rfind('.') + 1);
    if (member == "power") {
      return SweepSetter{[role](RunConfig& c, double v) {
                           for (auto& f : c.fields) {
                             if (f.role == role) f.field.power = v;
                           }
                         },
                         path + "_W"};
    }
    if (member == "detuning") {
      return SweepSetter{[role](RunConfig& c, double v) {
                           for (auto& f : c.fields) {
                             if (f.role == role) f.field.detuning = v;
                           }
                         },
                         path + "_rad_per_s"};
    }
  }
  throw ConfigError("sweep path '" + path + "' is not recognized");
}

std::vector<double> axis_values(const SweepAxis& axis) {
  std::vector<double> vals(axis.points);
  for (int i = 0; i < axis.points; ++i) {
    const double t = static_cast<double>(i) / (axis.points - 1);
    vals[i] = axis.log_spacing ? axis.start * std::pow(axis.stop / axis.start, t)
                               : axis.start + (axis.stop - axis.start) * t;
  }
  return vals;
}

struct SweepRow {
  std::vector<double> axis;
  std::vector<double> values;
  std::string error;
};

SweepRow eval_sweep_point(const RunConfig& base, const SweepSetter& s1, double v1,
                          const SweepSetter* s2, double v2,
                          const std::vector<std::string>& outputs) {
  SweepRow row;
  row.axis.push_back(v1);
  if (s2) row.axis.push_back(v2);
  row.values.assign(outputs.size(), nan_value);
  try {
    RunConfig cfg = base;
    s1.apply(cfg, v1);
    if (s2) s2->apply(cfg, v2);

    const DriveField* trap = cfg.find(FieldRole::trap);
    const DriveField* cool = cfg.find(FieldRole::cool);
    const bool two_field = trap && cool;
    const DriveField& field = cfg.single_field();

    std::optional<EffectiveParams> eff;
    auto effective = [&]() -> const EffectiveParams& {
      if (!eff) {
        eff = two_field ? combine_fields(cfg.system, *trap, *cool, cfg.configuration)
                        : effective_params_self_consistent(cfg.system, field, cfg.configuration,
                                                           cfg.convention);
      }
      return *eff;
    };
    std::optional<TwoMirrorEquilibrium> eq;
    auto equilibrium = [&]() -> const TwoMirrorEquilibrium& {
      if (!eq) eq = two_mirror_equilibrium(cfg.system, field, cfg.convention);
      return *eq;
    };

    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const std::string& o = outputs[i];
      if (o == "omega_eff") {
        row.values[i] = effective().omega_eff;
      } else if (o == "gamma_eff") {
        row.values[i] = effective().gamma_eff;
      } else if (o == "n_quanta") {
        try {
          row.values[i] = phonon_number(cfg.system, effective()).n_quanta;
        } catch (const InvalidParameter&) {
          row.values[i] = nan_value;
        }
      } else if (o == "stability") {
        if (two_field) {
          row.values[i] = nan_value;  // two-field dynamics not modeled
        } else {
          const auto drift = cfg.configuration == CavityConfig::three_mirror
                                 ? build_drift_matrix_3mc(cfg.system, field)
                                 : build_drift_matrix_2mc(cfg.system, field, cfg.convention);
          row.values[i] = routh_hurwitz_stable(drift).routh_hurwitz_stable ? 1.0 : 0.0;
        }
      } else if (o == "root_count") {
        if (cfg.configuration == CavityConfig::two_mirror) {
          row.values[i] = static_cast<double>(equilibrium().positions.size());
        } else {
          row.values[i] = static_cast<double>(
              three_mirror_monostability_check(cfg.system, field, cfg.system.wavelength / 4.0)
                  .size());
        }
      } else if (o == "delta_prime") {
        row.values[i] = cfg.configuration == CavityConfig::two_mirror
                            ? equilibrium().effective_detunings[equilibrium().physical_branch]
                            : field.detuning;
      }
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

void cmd_sweep(CommandContext& ctx) {
  if (!ctx.cfg.sweep) throw ConfigError("sweep command needs a 'sweep' config block");
  const SweepSpec& spec = *ctx.cfg.sweep;
  const SweepSetter s1 = make_setter(ctx.cfg, spec.axis1);
  std::optional<SweepSetter> s2;
  if (spec.axis2) s2 = make_setter(ctx.cfg, *spec.axis2);

  const auto v1 = axis_values(spec.axis1);
  const std::vector<double> v2 = spec.axis2 ? axis_values(*spec.axis2) : std::vector<double>{0.0};

  const std::size_t total = v1.size() * v2.size();
  std::vector<SweepRow> rows(total);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= total) return;
      const std::size_t i1 = i / v2.size();
      const std::size_t i2 = i % v2.size();
      rows[i] = eval_sweep_point(ctx.cfg, s1, v1[i1], s2 ? &*s2 : nullptr, v2[i2], spec.outputs);
    }
  };
  const unsigned n_threads =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(total));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Csv csv(ctx.file("sweep.csv"));
  std::vector<std::string> header{s1.header};
  if (s2) header.push_back(s2->header);
  for (const auto& o : spec.outputs) {
    if (o == "omega_eff" || o == "gamma_eff" || o == "delta_prime") {
      header.push_back(o + "_rad_per_s");
    } else {
      header.push_back(o + "_1");
    }
  }
  header.push_back("error");
  csv.row(header);
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (double a : row.axis) cells.push_back(fmt(a));
    for (double v : row.values) cells.push_back(fmt(v));
    cells.push_back(row.error);
    csv.row(cells);
  }
  ctx.wrote("sweep.csv");
}

// --------------------------------------------------------------- compare

void cmd_compare(CommandContext& ctx) {
  const DriveField& field = ctx.cfg.single_field();
  const SystemParams& p = ctx.cfg.system;
  const PumpConvention convention = ctx.compare_convention();

  const auto three = effective_params_self_consistent(p, field, CavityConfig::three_mirror);
  const auto eq = two_mirror_equilibrium(p, field, convention);
  const auto two = effective_params_self_consistent(p, field, CavityConfig::two_mirror, convention);

  const double delta_prime = eq.effective_detunings[eq.physical_branch];
  const double g2 = p.cavity_decay * p.cavity_decay / 4.0;
  const double ratio_approx = std::sqrt(field.detuning / delta_prime) *
                              (delta_prime * delta_prime + g2) /
                              (field.detuning * field.detuning + g2);
  const double ratio_closed =
      three.trapped && two.trapped ? three.omega_eff / two.omega_eff : nan_value;

  auto quanta_or_nan = [&](const EffectiveParams& eff) {
    try {
      return phonon_number(p, eff).n_quanta;
    } catch (const InvalidParameter&) {
      return nan_value;
    }
  };

  Csv csv(ctx.file("compare.csv"));
  csv.row({"quantity", "three_mirror", "two_mirror"});
  csv.row({"total_pump_W", fmt(2.0 * field.power), fmt(eq.total_power)});
  csv.row({"omega_eff_rad_per_s", fmt(three.omega_eff), fmt(two.omega_eff)});
  csv.row({"omega_eff_over_mech_1", fmt(three.omega_eff / p.mech_freq),
           fmt(two.omega_eff / p.mech_freq)});
  csv.row({"gamma_eff_rad_per_s", fmt(three.gamma_eff), fmt(two.gamma_eff)});
  csv.row({"delta_prime_over_decay_1", fmt(field.detuning / p.cavity_decay),
           fmt(delta_prime / p.cavity_decay)});
  csv.row({"n_quanta_1", fmt(quanta_or_nan(three)), fmt(quanta_or_nan(two))});
  csv.row({"stiffness_ratio_closed_form_1", fmt(ratio_closed), ""});
  csv.row({"stiffness_ratio_detuning_approx_1", fmt(ratio_approx), ""});
  ctx.wrote("compare.csv");
}

int dispatch(CommandContext& ctx) {
  if (ctx.command == "steady") {
    cmd_steady(ctx);
  } else if (ctx.command == "stability") {
    cmd_stability(ctx);
  } else if (ctx.command == "effective") {
    cmd_effective(ctx);
  } else if (ctx.command == "potential") {
    cmd_potential(ctx);
  } else if (ctx.command == "quanta") {
    cmd_quanta(ctx);
  } else if (ctx.command == "simulate") {
    cmd_simulate(ctx);
  } else if (ctx.command == "sweep") {
    cmd_sweep(ctx);
  } else if (ctx.command == "compare") {
    cmd_compare(ctx);
  } else {
    throw ConfigError("unknown command '" + ctx.command + "'");
  }
  ctx.write_sidecar();
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"radiation-pressure trapping and cooling toolkit for layered mirror cavities"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool allow_unstable = false;
  bool equal_total_power = true;

  const std::vector<std::string> commands = {"steady",  "stability", "effective", "potential",
                                             "quanta",  "simulate",  "sweep",     "compare"};
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "pseudorandom seed");
    sub->add_flag("--allow-unstable", allow_unstable,
                  "proceed on dynamically unstable configurations");
    sub->add_flag("--equal-total-power,!--no-equal-total-power", equal_total_power,
                  "compare: double the single-sided pump so total powers match (default on)");
  }

  try {
    std::vector<std::string> rargs(args.rbegin(), args.rend());
    app.parse(rargs);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    CommandContext ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    ctx.cfg = load_config(config_path);
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    ctx.allow_unstable = allow_unstable;
    ctx.equal_total_power = equal_total_power;
    fs::create_directories(ctx.out_dir);
    return dispatch(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const UnstableRefusal& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace optotrap::cli
