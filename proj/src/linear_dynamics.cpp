#include "optotrap/linear_dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace optotrap {

namespace {

double coupling_of(const SystemParams& p) {
  return 2.0 * constants::pi * constants::speed_of_light /
         (p.wavelength * p.subcavity_length);
}

// zero-point scales for the mechanical pair; quadratures are already
// dimensionless
double position_scale(const SystemParams& p) {
  return std::sqrt(constants::hbar / (p.mirror_mass * p.mech_freq));
}
double momentum_scale(const SystemParams& p) {
  return std::sqrt(constants::hbar * p.mirror_mass * p.mech_freq);
}

}  // namespace

Eigen::MatrixXd DriftMatrix::scaled() const {
  const int n = dim();
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out(i, j) = entries(i, j) * state_scale(j) / state_scale(i);
    }
  }
  return out;
}

DriftMatrix build_drift_matrix_3mc(const SystemParams& p, const DriveField& drive) {
  const double g = p.cavity_decay;
  const double delta = drive.detuning;
  const double xi = coupling_of(p);
  const double f_s = three_mirror_steady_state(p, drive).field_amplitude;
  const double spring = p.mirror_mass * p.mech_freq * p.mech_freq;

  // Field rows gain sqrt(2) xi f_s (the linearized detuning shift carries no
  // hbar); the force row gains sqrt(2) hbar xi f_s, with opposite signs
  // between the two sub-cavities.
  const double field_coupling = std::sqrt(2.0) * xi * f_s;
  const double force_coupling = std::sqrt(2.0) * constants::hbar * xi * f_s;

  DriftMatrix a;
  a.configuration = CavityConfig::three_mirror;
  a.entries = Eigen::MatrixXd::Zero(6, 6);
  auto& m = a.entries;
  m(0, 0) = -g / 2.0;  m(0, 1) = delta;
  m(1, 0) = -delta;    m(1, 1) = -g / 2.0;  m(1, 4) = field_coupling;
  m(2, 2) = -g / 2.0;  m(2, 3) = delta;
  m(3, 2) = -delta;    m(3, 3) = -g / 2.0;  m(3, 4) = -field_coupling;
  m(4, 5) = 1.0 / p.mirror_mass;
  m(5, 0) = force_coupling;
  m(5, 2) = -force_coupling;
  m(5, 4) = -spring;
  m(5, 5) = -p.mech_damping / 2.0;

  a.state_scale = Eigen::VectorXd::Ones(6);
  a.state_scale(4) = position_scale(p);
  a.state_scale(5) = momentum_scale(p);
  a.state_names = {"dXa", "dYa", "dXb", "dYb", "dQ", "dP"};
  a.state_units = {"1", "1", "1", "1", "m", "kg*m/s"};
  return a;
}

DriftMatrix build_drift_matrix_2mc(const SystemParams& p, const DriveField& drive,
                                   const TwoMirrorEquilibrium& eq, int branch,
                                   PumpConvention convention) {
  if (branch < 0 || branch >= static_cast<int>(eq.positions.size())) {
    throw InvalidParameter("build_drift_matrix_2mc: branch index out of range");
  }
  const double q_s = eq.positions[branch];
  const double p_total = eq.total_power;

  // the supplied root must actually balance the forces
  const double f_rad = two_mirror_radiation_force(p, p_total, drive.detuning, q_s);
  const double f_spring = p.mirror_mass * p.mech_freq * p.mech_freq * q_s;
  const double denom = std::max(std::abs(f_rad), std::abs(f_spring));
  if (denom > 0.0 && std::abs(f_rad - f_spring) > 1e-8 * denom) {
    throw InvalidParameter("build_drift_matrix_2mc: supplied root does not satisfy the "
                           "force balance");
  }
  (void)convention;

  const double g = p.cavity_decay;
  const double xi = coupling_of(p);
  const double delta_prime = eq.effective_detunings[branch];
  const double a_s = eq.field_amplitudes[branch];
  const double spring = p.mirror_mass * p.mech_freq * p.mech_freq;

  const double field_coupling = std::sqrt(2.0) * xi * a_s;
  const double force_coupling = std::sqrt(2.0) * constants::hbar * xi * a_s;

  DriftMatrix a;
  a.configuration = CavityConfig::two_mirror;
  a.entries = Eigen::MatrixXd::Zero(4, 4);
  auto& m = a.entries;
  m(0, 0) = -g / 2.0;      m(0, 1) = delta_prime;
  m(1, 0) = -delta_prime;  m(1, 1) = -g / 2.0;  m(1, 2) = field_coupling;
  m(2, 3) = 1.0 / p.mirror_mass;
  m(3, 0) = force_coupling;
  m(3, 2) = -spring;
  m(3, 3) = -p.mech_damping / 2.0;

  a.state_scale = Eigen::VectorXd::Ones(4);
  a.state_scale(2) = position_scale(p);
  a.state_scale(3) = momentum_scale(p);
  a.state_names = {"dXa", "dYa", "dQ", "dP"};
  a.state_units = {"1", "1", "m", "kg*m/s"};
  return a;
}

DriftMatrix build_drift_matrix_2mc(const SystemParams& p, const DriveField& drive,
                                   PumpConvention convention) {
  const auto eq = two_mirror_equilibrium(p, drive, convention);
  return build_drift_matrix_2mc(p, drive, eq, eq.physical_branch, convention);
}

Eigen::VectorXd characteristic_polynomial(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  if (n != a.cols() || n < 1) {
    throw InvalidParameter("characteristic_polynomial: square matrix required");
  }
  // The recursion forms traces of matrix powers, which reach ||A||^n while
  // the low-order coefficients can be ten decades smaller; quad precision
  // absorbs that cancellation (the matrices here are at most 8x8, so the
  // software floats cost nothing).
  using quad = __float128;
  std::vector<quad> aq(n * n), m(n * n, quad(0)), am(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aq[i * n + j] = quad(a(i, j));
  }
  std::vector<quad> coeffs(n + 1);
  coeffs[0] = quad(1);
  for (int k = 1; k <= n; ++k) {
    // M_k = A M_{k-1} + c_{k-1} I ; c_k = -tr(A M_k) / k
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        quad acc = i == j ? coeffs[k - 1] : quad(0);
        for (int l = 0; l < n; ++l) acc += aq[i * n + l] * m[l * n + j];
        am[i * n + j] = acc;
      }
    }
    m.swap(am);
    quad trace = quad(0);
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < n; ++l) trace += aq[i * n + l] * m[l * n + i];
    }
    coeffs[k] = -trace / quad(k);
  }
  Eigen::VectorXd out(n + 1);
  for (int k = 0; k <= n; ++k) out(k) = static_cast<double>(coeffs[k]);
  return out;
}

RouthVerdict routh_array_verdict(std::span<const double> coeffs) {
  const int n = static_cast<int>(coeffs.size()) - 1;  // polynomial degree
  if (n < 1) throw InvalidParameter("routh_array_verdict: degree >= 1 required");

  double lead = coeffs[0];
  double magnitude = 0.0;
  for (double c : coeffs) magnitude = std::max(magnitude, std::abs(c));
  if (magnitude == 0.0 || std::abs(lead) < 1e-300 * magnitude) {
    throw NumericalError("routh_array_verdict: vanishing leading coefficient");
  }

  RouthVerdict verdict;

  // normalize sign so the first column starts positive
  std::vector<double> c(coeffs.begin(), coeffs.end());
  if (lead < 0.0) {
    for (double& v : c) v = -v;
  }

  const int cols = n / 2 + 1;
  std::vector<double> above(cols, 0.0), below(cols, 0.0);
  for (int j = 0; j < cols; ++j) {
    above[j] = (2 * j <= n) ? c[2 * j] : 0.0;
    below[j] = (2 * j + 1 <= n) ? c[2 * j + 1] : 0.0;
  }

  std::vector<double> first_column;
  first_column.push_back(above[0]);

  for (int row = 1; row <= n; ++row) {
    double row_norm = 0.0;
    for (double v : below) row_norm = std::max(row_norm, std::abs(v));

    if (row_norm == 0.0) {
      // whole row vanished: even auxiliary polynomial, roots symmetric about
      // the imaginary axis; continue with its derivative and flag marginal
      verdict.critical = true;
      const int aux_degree = n - row + 1;
      for (int j = 0; j < cols; ++j) {
        const int power = aux_degree - 2 * j;
        below[j] = power > 0 ? above[j] * static_cast<double>(power) : 0.0;
      }
      for (double v : below) row_norm = std::max(row_norm, std::abs(v));
      if (row_norm == 0.0) break;
    }

    double pivot = below[0];
    if (std::abs(pivot) < 1e-12 * row_norm) {
      // zero first element with nonzero remainder: epsilon substitution
      verdict.critical = true;
      pivot = (pivot >= 0.0 ? 1.0 : -1.0) * 1e-12 * row_norm;
      below[0] = pivot;
    }
    first_column.push_back(pivot);

    std::vector<double> next(cols, 0.0);
    for (int j = 0; j + 1 < cols; ++j) {
      next[j] = (pivot * above[j + 1] - above[0] * below[j + 1]) / pivot;
    }
    above = below;
    below = next;
  }

  int changes = 0;
  for (std::size_t i = 1; i < first_column.size(); ++i) {
    if (first_column[i - 1] * first_column[i] < 0.0) ++changes;
  }
  verdict.sign_changes = changes;
  verdict.stable = (changes == 0) && !verdict.critical;
  return verdict;
}

StabilityReport routh_hurwitz_stable(const Eigen::MatrixXd& a) {
  if (!a.allFinite()) throw NumericalError("routh_hurwitz_stable: non-finite matrix");
  StabilityReport report;
  const Eigen::VectorXd poly = characteristic_polynomial(a);

  // condition the Routh recursion by rescaling the eigenvalue, lambda -> s*mu;
  // the verdict is invariant under a positive rescaling
  const double s = std::max(a.cwiseAbs().rowwise().sum().maxCoeff(), 1e-30);
  const int n = static_cast<int>(poly.size()) - 1;
  std::vector<double> scaled(poly.size());
  double power = 1.0;
  for (int k = 0; k <= n; ++k) {
    scaled[k] = poly(k) / power;
    power *= s;
  }

  const RouthVerdict verdict = routh_array_verdict(scaled);
  report.routh_hurwitz_stable = verdict.stable;
  report.critical = verdict.critical;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(a);
  report.max_real_part = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    const std::complex<double> ev = solver.eigenvalues()(i);
    report.eigenvalues.push_back(ev);
    report.max_real_part = std::max(report.max_real_part, ev.real());
  }
  return report;
}

StabilityReport routh_hurwitz_stable(const DriftMatrix& a) {
  return routh_hurwitz_stable(a.scaled());
}

std::vector<StabilityPoint> stability_region(const SystemParams& p,
                                             std::span<const DriveField> drives,
                                             CavityConfig config, PumpConvention convention) {
  std::vector<StabilityPoint> points;
  points.reserve(drives.size());
  for (const auto& drive : drives) {
    StabilityPoint point;
    point.drive = drive;
    try {
      if (config == CavityConfig::three_mirror) {
        point.reports.push_back(routh_hurwitz_stable(build_drift_matrix_3mc(p, drive)));
      } else {
        const auto eq = two_mirror_equilibrium(p, drive, convention);
        for (int b = 0; b < static_cast<int>(eq.positions.size()); ++b) {
          point.reports.push_back(
              routh_hurwitz_stable(build_drift_matrix_2mc(p, drive, eq, b, convention)));
        }
      }
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace optotrap
