#include "qeconf/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qeconf/error.hpp"

namespace qeconf {
namespace {

void require_nonzero_phi(double phi) {
  if (phi == 0.0) throw Error(ErrorKind::kPole, "phi = 0 is a singular point of the chain");
}

// C1 phi^s, via logs so that phi^s never overflows before the product does.
double branch_z(double phi, double C1, const QuadratureConstants& c) {
  if (!(phi > 0.0)) throw Error(ErrorKind::kBranchDomain, "phi^sqrt(b) requires phi > 0");
  return C1 * std::exp(c.sqrt_b * std::log(phi));
}

std::pair<double, double> roots_of(const QuadratureConstants& c) {
  if (!c.a1 || !c.a2) {
    throw Error(ErrorKind::kConstraint, "particular roots are defined only for m > 1");
  }
  return {*c.a1, *c.a2};
}

}  // namespace

double third_order_residual(double phi, double dphi, double d2phi, double d3phi,
                            const QuadratureConstants& c) {
  require_nonzero_phi(phi);
  if (dphi == 0.0) throw Error(ErrorKind::kPole, "phi' = 0 in the third-order equation");
  const double p = dphi / phi;
  const double q = d2phi / dphi;
  return c.P * d2phi / phi - c.Q * p * p - c.R * q * q + d3phi / dphi;
}

double riccati_rhs(double phi, double v, const QuadratureConstants& c) {
  require_nonzero_phi(phi);
  return -(1.0 - c.R / 2.0) * v * v - (c.P / phi) * v + 2.0 * c.Q / (phi * phi);
}

std::pair<double, double> particular_roots(const QuadratureConstants& c) {
  const double lead = 1.0 - c.R / 2.0;
  if (lead == 0.0) {
    throw Error(ErrorKind::kConstraint, "R = 2 (m = 1): the quadratic degenerates");
  }
  const double lin = c.P - 1.0;
  const double disc = lin * lin + 8.0 * lead * c.Q;
  if (disc < 0.0) throw Error(ErrorKind::kConstraint, "particular roots are complex");
  // Cancellation-free pairing of the quadratic formula with Vieta.
  const double root = std::sqrt(disc);
  const double qq = -0.5 * (lin + std::copysign(root, lin));
  const double r1 = qq / lead;
  const double r2 = -2.0 * c.Q / qq;
  return {std::max(r1, r2), std::min(r1, r2)};
}

double general_v(double phi, double C1, const QuadratureConstants& c) {
  const auto [a1, a2] = roots_of(c);
  const double z = branch_z(phi, C1, c);
  const double denom = phi * (1.0 - z);
  if (denom == 0.0) throw Error(ErrorKind::kPole, "general_v has a pole at C1 phi^sqrt(b) = 1");
  return (a2 - z * a1) / denom;
}

double general_v_derivative(double phi, double C1, const QuadratureConstants& c) {
  const auto [a1, a2] = roots_of(c);
  const double s = c.sqrt_b;
  const double z = branch_z(phi, C1, c);
  const double num = a2 - a1 * z;
  const double num1 = -a1 * s * z / phi;
  const double den = phi * (1.0 - z);
  if (den == 0.0) throw Error(ErrorKind::kPole, "general_v has a pole at C1 phi^sqrt(b) = 1");
  const double den1 = 1.0 - z - s * z;
  return (num1 * den - num * den1) / (den * den);
}

double w_from_v(double phi, double C1, double C2, const QuadratureConstants& c) {
  const auto [a1, a2] = roots_of(c);
  static_cast<void>(a1);
  const double z = branch_z(phi, C1, c);
  if (!(z > 1.0)) {
    throw Error(ErrorKind::kBranchDomain, "w requires C1 phi^sqrt(b) - 1 > 0");
  }
  const double exponent = 2.0 / (2.0 - c.R);
  return C2 * std::exp(exponent * std::log(z - 1.0) + a2 * std::log(phi));
}

double w_log_derivative(double phi, double C1, const QuadratureConstants& c) {
  const auto [a1, a2] = roots_of(c);
  static_cast<void>(a1);
  const double z = branch_z(phi, C1, c);
  if (!(z > 1.0)) {
    throw Error(ErrorKind::kBranchDomain, "w requires C1 phi^sqrt(b) - 1 > 0");
  }
  return 2.0 / (2.0 - c.R) * c.sqrt_b * z / (phi * (z - 1.0)) + a2 / phi;
}

RiccatiState riccati_state(double phi, double C1, double C2, const QuadratureConstants& c) {
  return RiccatiState{phi, w_log_derivative(phi, C1, c), w_from_v(phi, C1, C2, c)};
}

double m1_general_v(double phi, double C0, int n) {
  require_nonzero_phi(phi);
  return n / phi + C0 * std::pow(phi, 1.0 - 2.0 * n);
}

double m1_general_v_derivative(double phi, double C0, int n) {
  require_nonzero_phi(phi);
  return -n / (phi * phi) + C0 * (1.0 - 2.0 * n) * std::pow(phi, -2.0 * n);
}

double integrate_riccati_numeric(double phi_start, double v_start, double phi_end,
                                 const QuadratureConstants& c, double tol) {
  if (phi_start == phi_end) return v_start;
  if (!(tol > 0.0)) throw Error(ErrorKind::kConstraint, "tolerance must be positive");
  if (phi_start * phi_end <= 0.0) {
    throw Error(ErrorKind::kPole, "integration interval contains phi = 0");
  }

  auto rk4 = [&c](double x, double y, double h) {
    const double k1 = riccati_rhs(x, y, c);
    const double k2 = riccati_rhs(x + h / 2.0, y + h / 2.0 * k1, c);
    const double k3 = riccati_rhs(x + h / 2.0, y + h / 2.0 * k2, c);
    const double k4 = riccati_rhs(x + h, y + h * k3, c);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  const double span = phi_end - phi_start;
  const double dir = span > 0.0 ? 1.0 : -1.0;
  const double min_step = 1e-13 * std::max(std::abs(phi_start), std::abs(phi_end));
  constexpr double kEscape = 1e150;
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  auto sweep = [&](double local_tol) {
    double x = phi_start;
    double y = v_start;
    double h = span / 64.0;
    while (dir * (phi_end - x) > 0.0) {
      if (dir * (x + h - phi_end) > 0.0) h = phi_end - x;
      const double full = rk4(x, y, h);
      const double half = rk4(x + h / 2.0, rk4(x, y, h / 2.0), h / 2.0);
      // RK4 step doubling: the half-step result is off by about diff / 15.
      const double err = std::abs(half - full) / 15.0;
      // Error per unit step, so the local errors summed over the interval
      // stay within local_tol; never below the round-off of one step.
      const double scale = std::max(1.0, std::abs(half));
      const double allowed = std::max(local_tol * std::abs(h / span), 64.0 * kEps) * scale;
      if (std::isfinite(err) && err <= allowed) {
        x += h;
        y = half + (half - full) / 15.0;
        if (!std::isfinite(y) || std::abs(y) > kEscape) {
          throw Error(ErrorKind::kPole, "solution escaped to infinity: pole detected");
        }
        const double grow = err > 0.0 ? 0.9 * std::pow(allowed / err, 0.25) : 4.0;
        h *= std::min(4.0, std::max(1.0, grow));
      } else {
        const double shrink =
            std::isfinite(err) && err > 0.0 ? 0.9 * std::pow(allowed / err, 0.25) : 0.25;
        h *= std::max(0.1, std::min(0.5, shrink));
        if (std::abs(h) < min_step) {
          std::ostringstream os;
          os << "step size collapsed near phi = " << x << ": pole detected";
          throw Error(ErrorKind::kPole, os.str());
        }
      }
    }
    return y;
  };

  // Local control alone lets errors grow where nearby solutions diverge, so
  // tighten until two sweeps agree to tol.
  double local_tol = tol;
  double y = sweep(local_tol);
  // Below about 1e-15 the step-doubling estimate is round-off.
  while (local_tol / 16.0 >= 1e-15) {
    local_tol /= 16.0;
    const double finer = sweep(local_tol);
    const bool settled = std::abs(finer - y) <= tol * std::max(1.0, std::abs(finer));
    y = finer;
    if (settled) break;
  }
  return y;
}

}  // namespace qeconf
