#include "optotrap/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "optotrap/cubic.hpp"

namespace optotrap {

namespace {

double coupling_of(const SystemParams& p) {
  return 2.0 * constants::pi * constants::speed_of_light /
         (p.wavelength * p.subcavity_length);
}

double photon_flux(const SystemParams& p, double power) {
  const double omega_c =
      2.0 * constants::pi * constants::speed_of_light / p.wavelength;
  return power / (constants::hbar * omega_c);
}

double intracavity_amplitude(const SystemParams& p, double power, double detuning_eff) {
  const double g = p.cavity_decay;
  const double f_in = std::sqrt(photon_flux(p, power));
  return std::sqrt(g) * f_in / std::sqrt(g * g / 4.0 + detuning_eff * detuning_eff);
}

double total_pump(const DriveField& drive, PumpConvention convention) {
  return convention == PumpConvention::per_side ? 2.0 * drive.power : drive.power;
}

// Force balance in the detuning variable u = coupling * q:
//   h(u) = u * (g^2/4 + (D - u)^2) - K,  K = coupling * g * P_total / (L M W^2)
double force_balance_scale(const SystemParams& p, double p_total) {
  return coupling_of(p) * p.cavity_decay * p_total /
         (p.subcavity_length * p.mirror_mass * p.mech_freq * p.mech_freq);
}

}  // namespace

double two_mirror_radiation_force(const SystemParams& p, double p_total, double detuning,
                                  double q) {
  const double coupling = coupling_of(p);
  const double g = p.cavity_decay;
  const double d = detuning - coupling * q;
  return p.cavity_decay * p_total / (p.subcavity_length * (g * g / 4.0 + d * d));
}

double three_mirror_net_radiation_force(const SystemParams& p, double p_side, double detuning,
                                        double q) {
  const double coupling = coupling_of(p);
  const double g = p.cavity_decay;
  const double da = detuning - coupling * q;
  const double db = detuning + coupling * q;
  const double pref = p.cavity_decay * p_side / p.subcavity_length;
  return pref * (1.0 / (g * g / 4.0 + da * da) - 1.0 / (g * g / 4.0 + db * db));
}

ThreeMirrorSteadyState three_mirror_steady_state(const SystemParams& p, const DriveField& drive) {
  ThreeMirrorSteadyState s;
  s.field_amplitude = intracavity_amplitude(p, drive.power, drive.detuning);
  s.mirror_position = 0.0;
  s.mirror_momentum = 0.0;
  return s;
}

TwoMirrorEquilibrium two_mirror_equilibrium(const SystemParams& p, const DriveField& drive,
                                            PumpConvention convention) {
  const double g = p.cavity_decay;
  const double delta = drive.detuning;
  const double p_total = total_pump(drive, convention);
  const double coupling = coupling_of(p);
  const double spring = p.mirror_mass * p.mech_freq * p.mech_freq;

  TwoMirrorEquilibrium eq;
  eq.total_power = p_total;

  if (p_total <= 0.0) {
    eq.positions = {0.0};
    eq.effective_detunings = {delta};
    eq.field_amplitudes = {0.0};
    eq.stability_class = StabilityClass::monostable;
    eq.physical_branch = 0;
    return eq;
  }

  // cubic in u = coupling * q: u^3 - 2 D u^2 + (D^2 + g^2/4) u - K = 0
  const double k = force_balance_scale(p, p_total);
  const double a = -2.0 * delta;
  const double b = delta * delta + g * g / 4.0;
  const double c = -k;

  auto roots = solve_cubic_real(a, b, c);

  auto h = [&](double u) { return u * (g * g / 4.0 + (delta - u) * (delta - u)) - k; };
  auto dh = [&](double u) {
    return (g * g / 4.0 + (delta - u) * (delta - u)) + 2.0 * u * (u - delta);
  };

  std::vector<double> polished;
  for (int i = 0; i < roots.count; ++i) {
    double u = roots.roots[i];
    for (int it = 0; it < 50; ++it) {
      const double f = h(u);
      const double d = dh(u);
      if (d == 0.0) break;
      const double step = f / d;
      u -= step;
      if (std::abs(step) <= 1e-16 * std::abs(u)) break;
    }
    polished.push_back(u);
  }

  // residual check in force units, relative to the larger of the two balanced terms
  for (double u : polished) {
    const double q = u / coupling;
    const double f_rad = two_mirror_radiation_force(p, p_total, delta, q);
    const double f_spring = spring * q;
    const double denom = std::max(std::abs(f_rad), std::abs(f_spring));
    if (denom > 0.0 && !(std::abs(f_rad - f_spring) <= 1e-10 * denom)) {
      throw NumericalError("two_mirror_equilibrium: root refinement did not converge");
    }
  }

  std::sort(polished.begin(), polished.end());
  // near-degenerate roots collapse only the classification, not the list
  const double disc = cubic_discriminant(a, b, c);
  const double scale = std::max({std::abs(a), std::sqrt(b), std::cbrt(k)});
  const double disc_tol = 1e-9 * std::pow(scale, 6.0);

  if (polished.size() == 3 && disc > disc_tol) {
    eq.stability_class = StabilityClass::bistable;
  } else if (std::abs(disc) <= disc_tol || roots.repeated) {
    eq.stability_class = StabilityClass::critical;
  } else {
    eq.stability_class = StabilityClass::monostable;
  }

  for (double u : polished) {
    const double q = u / coupling;
    const double d_eff = delta - u;
    eq.positions.push_back(q);
    eq.effective_detunings.push_back(d_eff);
    eq.field_amplitudes.push_back(intracavity_amplitude(p, p_total, d_eff));
  }
  eq.physical_branch = 0;
  for (std::size_t i = 1; i < eq.positions.size(); ++i) {
    if (std::abs(eq.positions[i]) < std::abs(eq.positions[eq.physical_branch])) {
      eq.physical_branch = static_cast<int>(i);
    }
  }
  return eq;
}

BistabilityResult bistability_analysis(const SystemParams& p, double detuning,
                                       std::pair<double, double> power_range) {
  if (!(power_range.first >= 0.0) || !(power_range.second > power_range.first)) {
    throw InvalidParameter("bistability_analysis: power_range must be ordered and non-negative");
  }
  const double g = p.cavity_decay;
  const double threshold_detuning = std::sqrt(3.0) * g / 2.0;

  BistabilityResult res;
  const double margin = 1e-9 * g;
  if (std::abs(std::abs(detuning) - threshold_detuning) <= margin) {
    res.classification = BistabilityResult::Classification::critical;
    return res;
  }
  if (std::abs(detuning) < threshold_detuning) {
    res.classification = BistabilityResult::Classification::never_bistable;
    return res;
  }
  res.classification = BistabilityResult::Classification::conditionally_bistable;

  // discriminant of the force-balance cubic as a function of pump power
  auto disc_at = [&](double p_total) {
    const double k = force_balance_scale(p, p_total);
    return cubic_discriminant(-2.0 * detuning, detuning * detuning + g * g / 4.0, -k);
  };

  const double lo = std::max(power_range.first, 1e-300);
  const double hi = power_range.second;
  constexpr int scan_points = 400;
  double prev_p = lo;
  double prev_disc = disc_at(prev_p);
  double bracket_lo = 0.0, bracket_hi = 0.0;
  bool found = prev_disc > 0.0;
  if (found) bracket_hi = prev_p;
  for (int i = 1; i <= scan_points && !found; ++i) {
    const double t = static_cast<double>(i) / scan_points;
    const double pw = lo * std::pow(hi / lo, t);
    const double d = disc_at(pw);
    if (d > 0.0) {
      bracket_lo = prev_p;
      bracket_hi = pw;
      found = true;
      break;
    }
    prev_p = pw;
    prev_disc = d;
  }
  if (!found) return res;  // classification without an in-range threshold

  if (bracket_lo > 0.0) {
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(bracket_lo * bracket_hi);
      if (disc_at(mid) > 0.0) {
        bracket_hi = mid;
      } else {
        bracket_lo = mid;
      }
      if (bracket_hi - bracket_lo <= 1e-9 * bracket_hi) break;
    }
  }
  res.threshold_power = bracket_hi;
  return res;
}

std::vector<double> three_mirror_monostability_check(const SystemParams& p,
                                                     const DriveField& drive,
                                                     double search_window) {
  if (!(search_window > 0.0)) {
    throw InvalidParameter("three_mirror_monostability_check: search_window must be positive");
  }
  const double spring = p.mirror_mass * p.mech_freq * p.mech_freq;
  auto f = [&](double q) {
    return three_mirror_net_radiation_force(p, drive.power, drive.detuning, q) - spring * q;
  };

  constexpr int scan_points = 10000;
  const double lo = -search_window;
  const double step = 2.0 * search_window / scan_points;

  std::vector<double> roots;
  double x_prev = lo;
  double f_prev = f(x_prev);
  for (int i = 1; i <= scan_points; ++i) {
    const double x = lo + step * i;
    const double fx = f(x);
    if (f_prev == 0.0) {
      roots.push_back(x_prev);
    } else if (f_prev * fx < 0.0) {
      double a = x_prev, b = x, fa = f_prev;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (fa * fm < 0.0) {
          b = m;
        } else {
          a = m;
          fa = fm;
        }
        if (b - a <= 1e-15 * std::max(1.0, std::abs(m))) break;
      }
      roots.push_back(0.5 * (a + b));
    }
    x_prev = x;
    f_prev = fx;
  }
  if (f_prev == 0.0) roots.push_back(x_prev);

  // dedupe and snap near-zero roots, which the scan brackets around exactly 0
  std::sort(roots.begin(), roots.end());
  std::vector<double> unique_roots;
  const double merge_tol = 4.0 * step;
  for (double r : roots) {
    if (std::abs(r) < 1e-6 * search_window) r = 0.0;
    if (unique_roots.empty() || std::abs(r - unique_roots.back()) > merge_tol) {
      unique_roots.push_back(r);
    }
  }
  return unique_roots;
}

}  // namespace optotrap
