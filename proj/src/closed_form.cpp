#include "qeconf/closed_form.hpp"

#include <cmath>
#include <limits>

#include "qeconf/error.hpp"

namespace qeconf {
namespace {

// Integer power; keeps the sign of a negative base.
double ipow(double base, int exponent) {
  double out = 1.0;
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

void require_dimension(int n) {
  if (n < 3) throw Error(ErrorKind::kConstraint, "dimension n must be >= 3");
}

}  // namespace

Profile1D thm11_profile(int n, const Thm11Constants& c) {
  require_dimension(n);
  if (!(c.C2 > 0.0) || !(c.C3 > 0.0) || !(c.C4 > 0.0)) {
    throw Error(ErrorKind::kConstraint, "C2, C3 and C4 must be positive");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Interval domain = c.branch == Branch::kPositive ? Interval{-c.C1, inf}
                                                        : Interval{-inf, -c.C1};

  auto eval = [n, c](double xi) {
    const double t = xi + c.C1;
    const double sign = t > 0.0 ? 1.0 : -1.0;
    const double e = c.C3 * ipow(t, n - 1);
    const double e1 = c.C3 * (n - 1) * ipow(t, n - 2);
    const double e2 = c.C3 * (n - 1) * (n - 2) * ipow(t, n - 3);

    const double phi = sign * c.C4 * std::exp(e);
    // (log u)' = 1/t - E', (log u)'' = -1/t^2 - E''
    const double u = c.C2 * std::abs(t) * std::exp(-e);
    const double lu = 1.0 / t - e1;
    const double lu1 = -1.0 / (t * t) - e2;
    // f = (n-2) log u in closed form, so f' and f'' skip the u jet.
    const double k = n - 2.0;
    return ProfilePoint{
        Jet{phi, phi * e1, phi * (e2 + e1 * e1)},
        Jet{u, u * lu, u * (lu1 + lu * lu)},
        Jet{k * (std::log(c.C2 * std::abs(t)) - e), k * lu, k * lu1},
    };
  };
  return Profile1D({domain}, eval, {-c.C1});
}

double thm11_potential(int n, const Thm11Constants& c, double xi) {
  const double t = xi + c.C1;
  return (n - 2) * (std::log(c.C2 * std::abs(t)) - c.C3 * ipow(t, n - 1));
}

Profile1D homothetic_profile(double gamma, double a, double b) {
  if (gamma == 0.0) throw Error(ErrorKind::kConstraint, "gamma must be nonzero");
  if (a == 0.0) {
    throw Error(ErrorKind::kConstraint, "a = 0 gives constant u, a trivial solution");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double edge = -b / a;
  const Interval domain = a > 0.0 ? Interval{edge, inf} : Interval{-inf, edge};
  return Profile1D(
      {domain},
      [gamma, a, b](double xi) {
        return ProfilePoint{Jet{gamma, 0.0, 0.0}, Jet{a * xi + b, a, 0.0}};
      },
      {edge});
}

Profile1D example14_profile(int n, double C, double C2, double C3) {
  require_dimension(n);
  if (!(C > 0.0)) throw Error(ErrorKind::kConstraint, "C must be positive");
  if (C2 == 0.0) throw Error(ErrorKind::kConstraint, "C2 must be nonzero");
  // -C2 (C2 xi + C3) > 0  <=>  xi < -C3/C2 for either sign of C2.
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double edge = -C3 / C2;
  const double k = n - 2.0;

  auto eval = [k, C, C2, C3](double xi) {
    const double s = C2 * xi + C3;
    // phi = |k s / 2|^(-2/k); (log phi)' = -(2/k) C2 / s
    const double phi = std::pow(std::abs(k * s / 2.0), -2.0 / k);
    const double lp = -(2.0 / k) * C2 / s;
    const double lp1 = (2.0 / k) * C2 * C2 / (s * s);
    // u = -2C / (C2 k s); (log u)' = -C2 / s
    const double u = -2.0 * C / (C2 * k * s);
    const double lu = -C2 / s;
    const double lu1 = C2 * C2 / (s * s);
    return ProfilePoint{
        Jet{phi, phi * lp, phi * (lp1 + lp * lp)},
        Jet{u, u * lu, u * (lu1 + lu * lu)},
    };
  };
  return Profile1D({Interval{-inf, edge}}, eval, {edge});
}

}  // namespace qeconf
