#pragma once

#include <array>
#include <cmath>

namespace optotrap {

template <typename Scalar>
struct CubicRoots {
  std::array<Scalar, 3> roots{};  // only the first `count` entries are valid
  int count = 0;
  bool repeated = false;  // a root with multiplicity > 1 is present
};

// Discriminant of x^3 + a x^2 + b x + c; positive iff three distinct real roots.
template <typename Scalar>
Scalar cubic_discriminant(Scalar a, Scalar b, Scalar c) {
  return Scalar(18) * a * b * c - Scalar(4) * a * a * a * c + a * a * b * b -
         Scalar(4) * b * b * b - Scalar(27) * c * c;
}

// Real roots of x^3 + a x^2 + b x + c, trigonometric branch for the
// three-real-root case and Cardano (via cbrt) otherwise. Roots are
// unordered and unpolished; callers refine with Newton where accuracy
// beyond ~sqrt(eps) matters near degeneracies.
template <typename Scalar>
CubicRoots<Scalar> solve_cubic_real(Scalar a, Scalar b, Scalar c) {
  using std::abs;
  using std::acos;
  using std::cbrt;
  using std::cos;
  using std::sqrt;

  CubicRoots<Scalar> out;

  // depressed form t^3 + p t + q with x = t - a/3
  const Scalar shift = a / Scalar(3);
  const Scalar p = b - a * a / Scalar(3);
  const Scalar q = Scalar(2) * a * a * a / Scalar(27) - a * b / Scalar(3) + c;

  const Scalar half_q = q / Scalar(2);
  const Scalar third_p = p / Scalar(3);
  const Scalar disc = half_q * half_q + third_p * third_p * third_p;

  const Scalar scale = abs(half_q) + abs(third_p) * sqrt(abs(third_p));
  const Scalar tol = Scalar(1e-14) * scale * scale;

  if (disc > tol) {
    // one real root
    const Scalar s = sqrt(disc);
    const Scalar u = cbrt(-half_q + s);
    const Scalar v = cbrt(-half_q - s);
    out.roots[0] = u + v - shift;
    out.count = 1;
  } else if (disc < -tol) {
    // three distinct real roots
    const Scalar m = Scalar(2) * sqrt(-third_p);
    Scalar arg = Scalar(3) * q / (p * m);
    if (arg > Scalar(1)) arg = Scalar(1);
    if (arg < Scalar(-1)) arg = Scalar(-1);
    const Scalar theta = acos(arg) / Scalar(3);
    constexpr Scalar two_thirds_pi = Scalar(2.0943951023931953);
    out.roots[0] = m * cos(theta) - shift;
    out.roots[1] = m * cos(theta - two_thirds_pi) - shift;
    out.roots[2] = m * cos(theta + two_thirds_pi) - shift;
    out.count = 3;
  } else {
    // borderline: repeated root
    out.repeated = true;
    if (abs(half_q) <= tol && abs(third_p) <= tol) {
      out.roots[0] = -shift;  // triple root
      out.count = 1;
    } else {
      const Scalar u = cbrt(-half_q);
      out.roots[0] = Scalar(2) * u - shift;
      out.roots[1] = -u - shift;  // double root
      out.count = 2;
    }
  }
  return out;
}

}  // namespace optotrap
