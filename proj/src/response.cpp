#include "optotrap/response.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace optotrap {

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

void finish(EffectiveParams& eff) {
  eff.trapped = eff.omega_eff_sq > 0.0;
  eff.omega_eff = eff.trapped ? std::sqrt(eff.omega_eff_sq) : nan_value;
}

EffectiveParams assemble(const SystemParams& p, CavityConfig config, double eval_freq,
                         const std::vector<OpticalTerms>& terms) {
  EffectiveParams eff;
  eff.configuration = config;
  eff.eval_freq = eval_freq;
  eff.omega_eff_sq = p.mech_freq * p.mech_freq;
  eff.gamma_eff = p.mech_damping / 2.0;
  for (const auto& t : terms) {
    eff.omega_eff_sq -= t.spring;
    eff.gamma_eff += t.damping;
  }
  finish(eff);
  return eff;
}

// joint static equilibrium of the single-sided cavity under several fields,
// smallest-|q| balance point of the summed radiation force against the spring
double joint_two_mirror_equilibrium(const SystemParams& p,
                                    std::span<const DriveField> fields) {
  const double spring = p.mirror_mass * p.mech_freq * p.mech_freq;
  auto net = [&](double q) {
    double f = -spring * q;
    for (const auto& d : fields) f += two_mirror_radiation_force(p, d.power, d.detuning, q);
    return f;
  };
  const double window = p.wavelength / 4.0;
  constexpr int scan_points = 20000;
  const double step = window / scan_points;
  double x_prev = 0.0;
  double f_prev = net(0.0);
  if (f_prev == 0.0) return 0.0;
  for (int i = 1; i <= scan_points; ++i) {
    const double x = step * i;
    const double fx = net(x);
    if (f_prev * fx <= 0.0) {
      double a = x_prev, b = x, fa = f_prev;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = net(m);
        if (fm == 0.0) return m;
        if (fa * fm < 0.0) {
          b = m;
        } else {
          a = m;
          fa = fm;
        }
        if (b - a <= 1e-15 * std::max(b, 1e-30)) break;
      }
      return 0.5 * (a + b);
    }
    x_prev = x;
    f_prev = fx;
  }
  throw NumericalError("combine_fields: no static equilibrium inside a quarter wavelength");
}

}  // namespace

OpticalTerms optical_terms(const SystemParams& p, double power_side, double detuning_eff,
                           double eval_freq) {
  OpticalTerms t;
  if (power_side == 0.0) return t;
  const double g = p.cavity_decay;
  const double xi = 2.0 * constants::pi * constants::speed_of_light /
                    (p.wavelength * p.subcavity_length);
  const double d2 = detuning_eff * detuning_eff;
  const double g24 = g * g / 4.0;
  const double w2 = eval_freq * eval_freq;
  const double resonant = d2 - w2 + g24;
  const double denom = resonant * resonant + g * g * w2;
  const double prefactor = 4.0 * xi * g * power_side /
                           (p.mirror_mass * p.subcavity_length) * detuning_eff / (d2 + g24);
  t.spring = prefactor * resonant / denom;
  t.damping = prefactor * g / denom;
  return t;
}

EffectiveParams effective_params_3mc(const SystemParams& p, const DriveField& drive,
                                     double eval_freq) {
  return assemble(p, CavityConfig::three_mirror, eval_freq,
                  {optical_terms(p, drive.power, drive.detuning, eval_freq)});
}

EffectiveParams effective_params_2mc(const SystemParams& p, const TwoMirrorEquilibrium& eq,
                                     int branch, double eval_freq) {
  if (branch < 0 || branch >= static_cast<int>(eq.positions.size())) {
    throw InvalidParameter("effective_params_2mc: branch index out of range");
  }
  const double delta_prime = eq.effective_detunings[branch];
  return assemble(p, CavityConfig::two_mirror, eval_freq,
                  {optical_terms(p, eq.total_power / 2.0, delta_prime, eval_freq)});
}

EffectiveParams effective_params_closed_form(const SystemParams& p, const DriveField& drive,
                                             CavityConfig config, double eval_freq,
                                             PumpConvention convention) {
  if (config == CavityConfig::three_mirror) return effective_params_3mc(p, drive, eval_freq);
  const auto eq = two_mirror_equilibrium(p, drive, convention);
  return effective_params_2mc(p, eq, eq.physical_branch, eval_freq);
}

namespace {

template <typename Eval>
EffectiveParams fixed_point(Eval eval, double start_freq, FixedPointOptions opts) {
  double w = start_freq;
  EffectiveParams eff = eval(w);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    eff.iterations = it;
    if (!eff.trapped) {
      // anti-trapped: quote the static values, flagged
      eff = eval(0.0);
      eff.iterations = it;
      eff.converged = true;
      return eff;
    }
    const double next = eff.omega_eff;
    if (std::abs(next - w) <= opts.rel_tol * next) {
      eff.converged = true;
      return eff;
    }
    w = next;
    eff = eval(w);
  }
  eff.converged = false;
  throw NumericalError("effective-parameter fixed point did not converge; last iterate " +
                       std::to_string(w) + " rad/s");
}

}  // namespace

EffectiveParams effective_params_self_consistent(const SystemParams& p, const DriveField& drive,
                                                 CavityConfig config, PumpConvention convention,
                                                 FixedPointOptions opts) {
  if (config == CavityConfig::three_mirror) {
    return fixed_point([&](double w) { return effective_params_3mc(p, drive, w); }, 0.0, opts);
  }
  const auto eq = two_mirror_equilibrium(p, drive, convention);
  return fixed_point(
      [&](double w) { return effective_params_2mc(p, eq, eq.physical_branch, w); }, 0.0, opts);
}

EffectiveParams combine_fields(const SystemParams& p, const DriveField& trap,
                               const DriveField& cool, CavityConfig config,
                               FixedPointOptions opts) {
  if (config == CavityConfig::three_mirror) {
    return fixed_point(
        [&](double w) {
          return assemble(p, config, w,
                          {optical_terms(p, trap.power, trap.detuning, w),
                           optical_terms(p, cool.power, cool.detuning, w)});
        },
        0.0, opts);
  }
  const DriveField fields[] = {trap, cool};
  const double q_s = joint_two_mirror_equilibrium(p, fields);
  const double xi = 2.0 * constants::pi * constants::speed_of_light /
                    (p.wavelength * p.subcavity_length);
  return fixed_point(
      [&](double w) {
        return assemble(p, config, w,
                        {optical_terms(p, trap.power / 2.0, trap.detuning - xi * q_s, w),
                         optical_terms(p, cool.power / 2.0, cool.detuning - xi * q_s, w)});
      },
      0.0, opts);
}

bool Susceptibility::all_ok() const {
  for (auto v : point_ok) {
    if (!v) return false;
  }
  return true;
}

Susceptibility susceptibility_numeric(const DriftMatrix& a, const Eigen::VectorXd& freq_grid) {
  const int n = a.dim();
  const Eigen::MatrixXcd scaled = a.scaled().cast<std::complex<double>>();
  const int iq = a.position_index();
  const int ip = a.momentum_index();
  const double x_scale = a.state_scale(iq);
  const double p_scale = a.state_scale(ip);

  Susceptibility chi;
  chi.freq_grid = freq_grid;
  chi.chi.resize(freq_grid.size());
  chi.point_ok.assign(freq_grid.size(), 1);

  {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a.scaled());
    chi.stable_system = solver.eigenvalues().real().maxCoeff() < 0.0;
  }

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(ip) = std::complex<double>(1.0 / p_scale, 0.0);  // unit force on the mirror

  for (Eigen::Index k = 0; k < freq_grid.size(); ++k) {
    Eigen::MatrixXcd system = -scaled;
    system.diagonal().array() -= std::complex<double>(0.0, freq_grid(k));
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
    const Eigen::VectorXcd u = lu.solve(rhs);
    const double residual = (system * u - rhs).norm();
    if (!u.allFinite() || residual > 1e-8 * rhs.norm()) {
      chi.chi(k) = std::complex<double>(nan_value, nan_value);
      chi.point_ok[k] = 0;
      continue;
    }
    chi.chi(k) = u(iq) * x_scale;
  }
  return chi;
}

double locate_resonance(const DriftMatrix& a, double freq_lo, double freq_hi, int coarse_points) {
  if (!(freq_lo > 0.0) || !(freq_hi > freq_lo) || coarse_points < 8) {
    throw InvalidParameter("locate_resonance: need 0 < freq_lo < freq_hi and >= 8 points");
  }
  Eigen::VectorXd grid(coarse_points);
  const double ratio = freq_hi / freq_lo;
  for (int i = 0; i < coarse_points; ++i) {
    grid(i) = freq_lo * std::pow(ratio, static_cast<double>(i) / (coarse_points - 1));
  }
  const auto chi = susceptibility_numeric(a, grid);
  int best = -1;
  double best_mag = -1.0;
  for (int i = 0; i < coarse_points; ++i) {
    if (!chi.point_ok[i]) continue;
    const double mag = std::abs(chi.chi(i));
    if (mag > best_mag) {
      best_mag = mag;
      best = i;
    }
  }
  if (best < 0) throw NumericalError("locate_resonance: susceptibility singular everywhere");
  if (best == 0 || best == coarse_points - 1) return grid(best);

  // parabolic refinement on log|chi| over the log-spaced triplet
  const double y0 = std::log(std::abs(chi.chi(best - 1)));
  const double y1 = std::log(std::abs(chi.chi(best)));
  const double y2 = std::log(std::abs(chi.chi(best + 1)));
  const double denom = y0 - 2.0 * y1 + y2;
  if (denom >= 0.0) return grid(best);
  const double shift = 0.5 * (y0 - y2) / denom;
  const double log_step = std::log(grid(best + 1) / grid(best));
  return grid(best) * std::exp(shift * log_step);
}

LorentzianFit fit_effective_params(const Susceptibility& chi, double residual_threshold) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < chi.freq_grid.size(); ++i) {
    if (chi.point_ok[i] && chi.chi(i) != std::complex<double>(0.0, 0.0)) idx.push_back(i);
  }
  if (idx.size() < 4) {
    throw InvalidParameter("fit_effective_params: need at least 4 usable grid points");
  }

  // chi^-1 = (MW^2) - M w^2 - i (MG) w: linear least squares in the three
  // grouped coefficients, no mass input required
  double s0 = 0.0, s2 = 0.0, s4 = 0.0, sy = 0.0, sy2 = 0.0, siw = 0.0, sw2 = 0.0;
  for (auto i : idx) {
    const double w = chi.freq_grid(i);
    const std::complex<double> y = 1.0 / chi.chi(i);
    const double w2 = w * w;
    s0 += 1.0;
    s2 += w2;
    s4 += w2 * w2;
    sy += y.real();
    sy2 += y.real() * w2;
    siw += -y.imag() * w;
    sw2 += w2;
  }
  // [ s0 -s2 ] [alpha]   [ sy  ]          alpha = M W^2, m = M
  // [ s2 -s4 ] [  m  ] = [ sy2 ]
  const double det = s0 * (-s4) - (-s2) * s2;
  if (det == 0.0) throw NumericalError("fit_effective_params: degenerate grid");
  const double alpha = (sy * (-s4) - (-s2) * sy2) / det;
  const double m_fit = (s0 * sy2 - s2 * sy) / det;
  const double beta = siw / sw2;  // M G

  if (!(m_fit > 0.0) || !(alpha > 0.0)) {
    throw NumericalError("fit_effective_params: fit produced a non-physical mass or spring");
  }

  LorentzianFit fit;
  fit.mass = m_fit;
  fit.omega_eff = std::sqrt(alpha / m_fit);
  fit.gamma_eff = beta / m_fit;

  double misfit = 0.0, scale = 0.0;
  for (auto i : idx) {
    const double w = chi.freq_grid(i);
    const std::complex<double> y = 1.0 / chi.chi(i);
    const std::complex<double> model(alpha - m_fit * w * w, -beta * w);
    misfit += std::norm(y - model);
    scale += std::norm(y);
  }
  fit.residual = std::sqrt(misfit / scale);

  const double w_min = chi.freq_grid(idx.front());
  const double w_max = chi.freq_grid(idx.back());
  if (fit.omega_eff < w_min || fit.omega_eff > w_max) {
    throw NumericalError("fit_effective_params: fitted resonance lies outside the grid; "
                         "the response is not locally Lorentzian there");
  }
  if (fit.residual > residual_threshold) {
    throw NumericalError("fit_effective_params: residual " + std::to_string(fit.residual) +
                         " exceeds threshold (strongly non-Lorentzian response)");
  }
  return fit;
}

FrequencyRatioResult frequency_ratio(const SystemParams& p, const DriveField& drive) {
  FrequencyRatioResult r;
  const auto eq = two_mirror_equilibrium(p, drive, PumpConvention::per_side);
  r.delta_prime = eq.effective_detunings[eq.physical_branch];

  const double g2 = p.cavity_decay * p.cavity_decay / 4.0;
  const double d = drive.detuning;
  const double dp = r.delta_prime;
  r.approximate = std::sqrt(d / dp) * (dp * dp + g2) / (d * d + g2);

  const auto three = effective_params_self_consistent(p, drive, CavityConfig::three_mirror);
  const auto two = effective_params_self_consistent(p, drive, CavityConfig::two_mirror,
                                                    PumpConvention::per_side);
  r.closed_form = (three.trapped && two.trapped) ? three.omega_eff / two.omega_eff : nan_value;
  return r;
}

OccupancyResult phonon_number_from_ratios(const SystemParams& p, double damping_ratio,
                                          double freq_ratio) {
  if (!(damping_ratio > 0.0) || !(freq_ratio > 0.0)) {
    throw InvalidParameter("phonon_number: ratios must be positive");
  }
  OccupancyResult res;
  res.damping_ratio = damping_ratio;
  res.freq_ratio = freq_ratio;
  const double thermal =
      constants::boltzmann * p.bath_temperature / (constants::hbar * p.mech_freq);
  res.n_quanta = thermal * damping_ratio * freq_ratio * freq_ratio * freq_ratio;
  return res;
}

OccupancyResult phonon_number(const SystemParams& p, const EffectiveParams& eff) {
  if (!eff.trapped || !(eff.omega_eff > 0.0)) {
    throw InvalidParameter("phonon_number: anti-trapped input rejected");
  }
  if (!(eff.gamma_eff > 0.0)) {
    throw InvalidParameter("phonon_number: net-antidamped input rejected");
  }
  return phonon_number_from_ratios(p, (p.mech_damping / 2.0) / eff.gamma_eff,
                                   p.mech_freq / eff.omega_eff);
}

std::optional<double> mech_damping_bound_for_occupancy(const SystemParams& p,
                                                       const EffectiveParams& eff,
                                                       double n_target) {
  if (!eff.trapped || !(eff.omega_eff > 0.0) || !(n_target > 0.0)) return std::nullopt;
  const double gamma_opt = eff.gamma_eff - p.mech_damping / 2.0;
  if (!(gamma_opt > 0.0)) return std::nullopt;
  const double thermal =
      constants::boltzmann * p.bath_temperature / (constants::hbar * p.mech_freq);
  const double ratio = p.mech_freq / eff.omega_eff;
  const double a0 = thermal * ratio * ratio * ratio;
  if (a0 <= n_target) return std::numeric_limits<double>::infinity();
  return 2.0 * n_target * gamma_opt / (a0 - n_target);
}

}  // namespace optotrap
