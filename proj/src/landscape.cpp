#include "optotrap/landscape.hpp"

#include <cmath>

namespace optotrap {

namespace {

double coupling_of(const SystemParams& p) {
  return 2.0 * constants::pi * constants::speed_of_light /
         (p.wavelength * p.subcavity_length);
}

struct StaticModel {
  const SystemParams& p;
  double p_side = 0.0;   // per-port power of the matched double-sided setup
  double detuning = 0.0;
  bool double_sided = false;

  double spring() const { return p.mirror_mass * p.mech_freq * p.mech_freq; }

  double radiation_force(double q) const {
    if (double_sided) return three_mirror_net_radiation_force(p, p_side, detuning, q);
    return two_mirror_radiation_force(p, 2.0 * p_side, detuning, q);
  }

  // closed arctangent antiderivative of the intensity Lorentzian, zeroed at q=0
  double radiation_potential(double q) const {
    const double xi = coupling_of(p);
    const double g = p.cavity_decay;
    auto arm = [&](double d) {
      return std::atan(2.0 * (d - xi * q) / g) - std::atan(2.0 * d / g);
    };
    // d/dq of 2*(P/L/xi)*arm equals -radiation_force for one pumped side
    const double unit = 2.0 * 2.0 * p_side / (p.subcavity_length * xi);
    if (!double_sided) return unit * arm(detuning);
    // both arms, with the mirror shifting them in opposite senses
    auto arm_b = [&](double d) {
      return std::atan(2.0 * (d + xi * q) / g) - std::atan(2.0 * d / g);
    };
    return (unit / 2.0) * (arm(detuning) + arm_b(detuning));
  }

  double total_potential(double q) const {
    return 0.5 * spring() * q * q + radiation_potential(q);
  }

  double total_force(double q) const { return radiation_force(q) - spring() * q; }

  // analytic derivative of the radiation force (curvature = spring - this)
  double radiation_force_derivative(double q) const {
    const double xi = coupling_of(p);
    const double g = p.cavity_decay;
    const double g24 = g * g / 4.0;
    auto one_sided = [&](double power_total, double sign) {
      const double d = detuning + sign * xi * q;
      const double denom = g24 + d * d;
      return p.cavity_decay * power_total / p.subcavity_length * (-sign) * 2.0 * xi * d /
             (denom * denom);
    };
    if (!double_sided) return one_sided(2.0 * p_side, -1.0);
    return one_sided(p_side, -1.0) - one_sided(p_side, +1.0);
  }
};

PotentialCurve sample_curve(const StaticModel& model, double q_window, int n_samples,
                            double wavelength) {
  if (!(q_window > 0.0) || q_window > wavelength / 4.0) {
    throw InvalidParameter(
        "potential window must be positive and at most a quarter wavelength");
  }
  if (n_samples < 9) throw InvalidParameter("potential curve needs at least 9 samples");

  PotentialCurve curve;
  curve.positions.resize(n_samples);
  curve.potential.resize(n_samples);
  curve.force.resize(n_samples);
  const double step = 2.0 * q_window / (n_samples - 1);
  for (int i = 0; i < n_samples; ++i) {
    const double q = -q_window + step * i;
    curve.positions(i) = q;
    curve.potential(i) = model.total_potential(q);
    curve.force(i) = model.total_force(q);
  }

  // minima: total force crossing + -> - (restoring on both sides)
  for (int i = 1; i < n_samples; ++i) {
    const double f0 = curve.force(i - 1);
    const double f1 = curve.force(i);
    bool bracketed = f0 > 0.0 && f1 < 0.0;
    const bool exactly_zero = f1 == 0.0 && i + 1 < n_samples;
    if (exactly_zero && f0 > 0.0 && curve.force(i + 1) < 0.0) {
      curve.minima.push_back({curve.positions(i),
                              model.spring() - model.radiation_force_derivative(curve.positions(i))});
      continue;
    }
    if (!bracketed) continue;
    double a = curve.positions(i - 1), b = curve.positions(i), fa = f0;
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = model.total_force(m);
      if (fm == 0.0) {
        a = b = m;
        break;
      }
      if (fa * fm > 0.0) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
      if (b - a <= 1e-16 * std::max(std::abs(a), std::abs(b)) + 1e-300) break;
    }
    const double q_min = 0.5 * (a + b);
    curve.minima.push_back({q_min, model.spring() - model.radiation_force_derivative(q_min)});
  }
  return curve;
}

}  // namespace

PotentialCurve potential_2mc(const SystemParams& p, const DriveField& drive, double q_window,
                             int n_samples, PumpConvention convention) {
  const double p_total =
      convention == PumpConvention::per_side ? 2.0 * drive.power : drive.power;
  StaticModel model{p, p_total / 2.0, drive.detuning, false};
  return sample_curve(model, q_window, n_samples, p.wavelength);
}

PotentialCurve potential_3mc(const SystemParams& p, const DriveField& drive, double q_window,
                             int n_samples) {
  StaticModel model{p, drive.power, drive.detuning, true};
  return sample_curve(model, q_window, n_samples, p.wavelength);
}

}  // namespace optotrap
