#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "optotrap/linear_dynamics.hpp"
#include "optotrap/response.hpp"

using namespace optotrap;
using namespace optotrap::testing;

namespace {

// full nonlinear right-hand side of the double-sided cavity equations in SI
// quadratures, with the pump phases chosen so the steady field is real
struct NonlinearRhs3mc {
  SystemParams p;
  DriveField drive;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    using cplx = std::complex<double>;
    const auto d = derive_constants(p);
    const double g = p.cavity_decay;
    const double xi = d.coupling;
    const double f_s = three_mirror_steady_state(p, drive).field_amplitude;
    const cplx pump = (cplx(0.0, drive.detuning) + g / 2.0) * f_s / std::sqrt(g);

    const cplx a = cplx(x(0), x(1)) / std::sqrt(2.0);
    const cplx b = cplx(x(2), x(3)) / std::sqrt(2.0);
    const double q = x(4);
    const double mom = x(5);

    const cplx da = -(cplx(0.0, drive.detuning - xi * q) + g / 2.0) * a + std::sqrt(g) * pump;
    const cplx db = -(cplx(0.0, drive.detuning + xi * q) + g / 2.0) * b + std::sqrt(g) * pump;

    Eigen::VectorXd f(6);
    f(0) = std::sqrt(2.0) * da.real();
    f(1) = std::sqrt(2.0) * da.imag();
    f(2) = std::sqrt(2.0) * db.real();
    f(3) = std::sqrt(2.0) * db.imag();
    f(4) = mom / p.mirror_mass;
    f(5) = -p.mirror_mass * p.mech_freq * p.mech_freq * q +
           constants::hbar * xi * (std::norm(a) - std::norm(b)) - p.mech_damping / 2.0 * mom;
    return f;
  }
};

// single-sided analogue, pump phase fixed by the chosen equilibrium
struct NonlinearRhs2mc {
  SystemParams p;
  DriveField drive;
  double a_steady;
  double delta_prime;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    using cplx = std::complex<double>;
    const auto d = derive_constants(p);
    const double g = p.cavity_decay;
    const double xi = d.coupling;
    const cplx pump = (cplx(0.0, delta_prime) + g / 2.0) * a_steady / std::sqrt(g);

    const cplx a = cplx(x(0), x(1)) / std::sqrt(2.0);
    const double q = x(2);
    const double mom = x(3);

    const cplx da = -(cplx(0.0, drive.detuning - xi * q) + g / 2.0) * a + std::sqrt(g) * pump;

    Eigen::VectorXd f(4);
    f(0) = std::sqrt(2.0) * da.real();
    f(1) = std::sqrt(2.0) * da.imag();
    f(2) = mom / p.mirror_mass;
    f(3) = -p.mirror_mass * p.mech_freq * p.mech_freq * q + constants::hbar * xi * std::norm(a) -
           p.mech_damping / 2.0 * mom;
    return f;
  }
};

// scaled central-difference Jacobian; the flow is quadratic in the state, so
// central differences are exact up to roundoff
template <typename Rhs>
Eigen::MatrixXd fd_scaled_jacobian(const Rhs& rhs, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& scale, double h = 1e-4) {
  const int n = static_cast<int>(x0.size());
  Eigen::MatrixXd j(n, n);
  for (int col = 0; col < n; ++col) {
    Eigen::VectorXd plus = x0, minus = x0;
    plus(col) += h * scale(col);
    minus(col) -= h * scale(col);
    const Eigen::VectorXd df = (rhs(plus) - rhs(minus)) / (2.0 * h);
    for (int row = 0; row < n; ++row) j(row, col) = df(row) / scale(row);
  }
  return j;
}

std::vector<std::complex<double>> sorted_eigs(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> s(a);
  std::vector<std::complex<double>> v;
  for (int i = 0; i < s.eigenvalues().size(); ++i) v.push_back(s.eigenvalues()(i));
  std::sort(v.begin(), v.end(), [](auto l, auto r) {
    return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag();
  });
  return v;
}

}  // namespace

TEST_CASE("undriven drift matrix decouples into optics and mechanics") {
  const auto p = reference_system();
  const DriveField off{0.0, -0.5e7};
  const auto a = build_drift_matrix_3mc(p, off);

  for (int i = 0; i < 4; ++i) {
    for (int j = 4; j < 6; ++j) {
      CHECK(a.entries(i, j) == 0.0);
      CHECK(a.entries(j, i) == 0.0);
    }
  }

  const auto eigs = sorted_eigs(a.scaled());
  int optical = 0, mechanical = 0;
  for (const auto& ev : eigs) {
    if (std::abs(ev.real() + p.cavity_decay / 2.0) < 1e-6 * p.cavity_decay) {
      CHECK(std::abs(std::abs(ev.imag()) - std::abs(off.detuning)) < 1e-6 * p.cavity_decay);
      ++optical;
    } else {
      const double re = -p.mech_damping / 4.0;
      const double im = std::sqrt(p.mech_freq * p.mech_freq -
                                  p.mech_damping * p.mech_damping / 16.0);
      CHECK(ev.real() == doctest::Approx(re).epsilon(1e-9));
      CHECK(std::abs(ev.imag()) == doctest::Approx(im).epsilon(1e-9));
      ++mechanical;
    }
  }
  CHECK(optical == 4);
  CHECK(mechanical == 2);

  // characteristic polynomial factorizes into the uncoupled blocks
  const auto full = characteristic_polynomial(a.scaled());
  const auto po = characteristic_polynomial(Eigen::MatrixXd(a.scaled().topLeftCorner(4, 4)));
  const auto pm = characteristic_polynomial(Eigen::MatrixXd(a.scaled().bottomRightCorner(2, 2)));
  Eigen::VectorXd prod = Eigen::VectorXd::Zero(7);
  for (int i = 0; i < po.size(); ++i) {
    for (int j = 0; j < pm.size(); ++j) prod(i + j) += po(i) * pm(j);
  }
  for (int k = 0; k < 7; ++k) {
    const double scale = std::max(std::abs(prod(k)), std::abs(full(k)));
    if (scale > 0.0) CHECK(std::abs(full(k) - prod(k)) <= 1e-12 * scale);
  }
}

TEST_CASE("drift matrix agrees with a finite-difference Jacobian of the nonlinear flow") {
  const auto p = reference_system();

  SUBCASE("double-sided cavity") {
    const auto drive = reference_drive();
    const auto a = build_drift_matrix_3mc(p, drive);
    const double f_s = three_mirror_steady_state(p, drive).field_amplitude;

    NonlinearRhs3mc rhs{p, drive};
    Eigen::VectorXd x0(6);
    x0 << std::sqrt(2.0) * f_s, 0.0, std::sqrt(2.0) * f_s, 0.0, 0.0, 0.0;

    // the constructed point is a steady state of the nonlinear flow
    const Eigen::VectorXd residual = rhs(x0);
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(residual(i) / a.state_scale(i)) <
            1e-8 * p.cavity_decay * std::sqrt(2.0) * f_s);
    }

    const Eigen::MatrixXd jac = fd_scaled_jacobian(rhs, x0, a.state_scale);
    const Eigen::MatrixXd scaled = a.scaled();
    const double norm = scaled.cwiseAbs().maxCoeff();
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        CHECK(std::abs(jac(i, j) - scaled(i, j)) <= 1e-6 * norm);
      }
    }
  }

  SUBCASE("single-sided cavity about its equilibrium") {
    const auto drive = reference_drive();
    const auto eq = two_mirror_equilibrium(p, drive, PumpConvention::per_side);
    const auto a = build_drift_matrix_2mc(p, drive, eq, eq.physical_branch);

    NonlinearRhs2mc rhs{p, drive, eq.field_amplitudes[eq.physical_branch],
                        eq.effective_detunings[eq.physical_branch]};
    Eigen::VectorXd x0(4);
    x0 << std::sqrt(2.0) * eq.field_amplitudes[eq.physical_branch], 0.0,
        eq.positions[eq.physical_branch], 0.0;

    const Eigen::MatrixXd jac = fd_scaled_jacobian(rhs, x0, a.state_scale);
    const Eigen::MatrixXd scaled = a.scaled();
    const double norm = scaled.cwiseAbs().maxCoeff();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(jac(i, j) - scaled(i, j)) <= 1e-6 * norm);
      }
    }

    // optical block rotates at the effective detuning, exactly
    CHECK(a.entries(0, 1) == eq.effective_detunings[eq.physical_branch]);
    // coupling magnitude sqrt(2) xi a_s
    const auto d = derive_constants(p);
    CHECK(a.entries(1, 2) ==
          doctest::Approx(std::sqrt(2.0) * d.coupling *
                          eq.field_amplitudes[eq.physical_branch]).epsilon(1e-14));
  }
}

TEST_CASE("characteristic polynomial matches a determinant expansion") {
  const auto p = reference_system();
  const auto a = build_drift_matrix_3mc(p, reference_drive());
  const Eigen::MatrixXd scaled = a.scaled();

  const Eigen::VectorXd fl = characteristic_polynomial(scaled);
  const Eigen::VectorXd det = char_poly_by_determinant(scaled);
  REQUIRE(fl.size() == det.size());
  for (int k = 0; k < fl.size(); ++k) {
    const double scale = std::max({std::abs(fl(k)), std::abs(det(k)), 1e-300});
    CHECK(std::abs(fl(k) - det(k)) <= 1e-10 * scale);
  }
}

TEST_CASE("detuning sign flips the optical rotation but not the coupling") {
  const auto p = reference_system();
  const auto drive = reference_drive();
  const auto plus = build_drift_matrix_3mc(p, drive);
  const auto minus = build_drift_matrix_3mc(p, {drive.power, -drive.detuning});

  CHECK(minus.entries(0, 1) == -plus.entries(0, 1));
  CHECK(minus.entries(1, 0) == -plus.entries(1, 0));
  CHECK(minus.entries(2, 3) == -plus.entries(2, 3));
  CHECK(minus.entries(3, 2) == -plus.entries(3, 2));
  CHECK(std::abs(minus.entries(1, 4)) == doctest::Approx(std::abs(plus.entries(1, 4))));
  CHECK(std::abs(minus.entries(5, 0)) == doctest::Approx(std::abs(plus.entries(5, 0))));
}

TEST_CASE("sub-cavity relabeling is a similarity transform") {
  const auto p = reference_system();
  const auto a = build_drift_matrix_3mc(p, reference_drive());
  const Eigen::MatrixXd scaled = a.scaled();

  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(6, 6);
  perm(0, 2) = perm(1, 3) = perm(2, 0) = perm(3, 1) = perm(4, 4) = perm(5, 5) = 1.0;
  const Eigen::MatrixXd swapped = perm * scaled * perm.transpose();

  const auto e1 = sorted_eigs(scaled);
  const auto e2 = sorted_eigs(swapped);
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(std::abs(e1[i] - e2[i]) <= 1e-10 * p.cavity_decay);
  }
}

TEST_CASE("a rejected equilibrium root cannot seed the linearization") {
  const auto p = reference_system();
  const auto drive = reference_drive();
  auto eq = two_mirror_equilibrium(p, drive, PumpConvention::per_side);
  eq.positions[0] *= 1.5;  // no longer balances the forces
  CHECK_THROWS_AS(build_drift_matrix_2mc(p, drive, eq, 0), InvalidParameter);
  CHECK_THROWS_AS(build_drift_matrix_2mc(p, drive, eq, 7), InvalidParameter);
}

TEST_CASE("Routh-Hurwitz verdicts on constructed matrices") {
  SUBCASE("negative identity") {
    for (int n : {2, 3, 4, 5, 6}) {
      const auto report = routh_hurwitz_stable(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(n, n)));
      CHECK(report.routh_hurwitz_stable);
      CHECK(report.max_real_part == doctest::Approx(-1.0));
    }
  }

  SUBCASE("planted positive eigenvalue") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 3 + trial % 4;
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
      d(0, 0) = 1.0;
      for (int i = 1; i < n; ++i) d(i, i) = -1.0 - i;
      Eigen::MatrixXd t(n, n);
      do {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) t(i, j) = gauss(rng);
        }
      } while (std::abs(t.determinant()) < 1e-3);
      const Eigen::MatrixXd a = t * d * t.inverse();
      const auto report = routh_hurwitz_stable(a);
      CHECK_FALSE(report.routh_hurwitz_stable);
      CHECK(report.max_real_part == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("degenerate polynomial rejected") {
    const double coeffs[] = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(routh_array_verdict(coeffs), NumericalError);
  }
}

TEST_CASE("Routh-Hurwitz verdict matches the eigenvalue verdict on random matrices") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 8);

  int stable_checked = 0, mixed_checked = 0;

  // stable by construction: negative-definite symmetric part
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    Eigen::MatrixXd b(n, n), c(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        b(i, j) = gauss(rng);
        c(i, j) = gauss(rng);
      }
    }
    const Eigen::MatrixXd a = -b * b.transpose() - 0.1 * Eigen::MatrixXd::Identity(n, n) +
                              (c - c.transpose());
    const auto report = routh_hurwitz_stable(a);
    REQUIRE(report.max_real_part < 0.0);
    REQUIRE(report.routh_hurwitz_stable);
    ++stable_checked;
  }

  // unconstrained draws, skipping the near-marginal tolerance band
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
    }
    const auto report = routh_hurwitz_stable(a);
    const double band = 1e-9 * a.cwiseAbs().rowwise().sum().maxCoeff();
    if (std::abs(report.max_real_part) <= band || report.critical) continue;
    REQUIRE(report.routh_hurwitz_stable == (report.max_real_part < 0.0));
    ++mixed_checked;
  }
  CHECK(stable_checked == 1000);
  CHECK(mixed_checked > 950);
}

TEST_CASE("stability over drive grids") {
  const auto p = reference_system();

  SUBCASE("reference trapping point is stable and matches the eigenvalue verdict") {
    const DriveField drives[] = {reference_drive()};
    const auto grid = stability_region(p, drives, CavityConfig::three_mirror);
    REQUIRE(grid.size() == 1);
    REQUIRE(grid[0].error.empty());
    REQUIRE(grid[0].reports.size() == 1);
    CHECK(grid[0].reports[0].routh_hurwitz_stable);
    CHECK(grid[0].reports[0].max_real_part < 0.0);
  }

  SUBCASE("anti-trapping beyond the closed-form onset is unstable") {
    const double detuning = 0.5e7;
    double power = 1e-3;
    while (effective_params_3mc(p, {power, detuning}, 0.0).trapped) power *= 2.0;
    const DriveField drives[] = {{4.0 * power, detuning}};
    const auto grid = stability_region(p, drives, CavityConfig::three_mirror);
    REQUIRE(grid[0].error.empty());
    CHECK_FALSE(grid[0].reports[0].routh_hurwitz_stable);
    CHECK(grid[0].reports[0].max_real_part > 0.0);
  }

  SUBCASE("zero power grid is stable everywhere, both configurations") {
    std::vector<DriveField> drives;
    for (int i = 0; i < 7; ++i) drives.push_back({0.0, (i - 3) * 0.5e7});
    for (auto config : {CavityConfig::three_mirror, CavityConfig::two_mirror}) {
      const auto grid = stability_region(p, drives, config);
      for (const auto& point : grid) {
        REQUIRE(point.error.empty());
        for (const auto& report : point.reports) {
          REQUIRE(report.routh_hurwitz_stable);
        }
      }
    }
  }

  SUBCASE("per-point failures do not abort the grid") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const DriveField drives[] = {reference_drive(), {nan, -0.5e7}, {0.0, -0.5e7}};
    const auto grid = stability_region(p, drives, CavityConfig::three_mirror);
    REQUIRE(grid.size() == 3);
    CHECK(grid[0].error.empty());
    CHECK_FALSE(grid[1].error.empty());
    CHECK(grid[2].error.empty());
  }

  SUBCASE("single-sided grids report every branch") {
    const auto res = bistability_analysis(p, 2.0 * p.cavity_decay, {1e-9, 1e3});
    REQUIRE(res.threshold_power.has_value());
    const DriveField drives[] = {{*res.threshold_power * 1.2, 2.0 * p.cavity_decay}};
    const auto grid = stability_region(p, drives, CavityConfig::two_mirror,
                                       PumpConvention::total);
    REQUIRE(grid[0].error.empty());
    CHECK(grid[0].reports.size() >= 1);
  }
}
