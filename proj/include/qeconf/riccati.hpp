#pragma once

#include <utility>

#include "qeconf/quadrature.hpp"

namespace qeconf {

/// Point on the reduced chain: w(phi) = (dphi/ds)^2 and v = w'/w.
struct RiccatiState {
  double phi = 0.0;
  double v = 0.0;
  double w = 0.0;
};

/// P phi''/phi - Q (phi'/phi)^2 - R (phi''/phi')^2 + phi'''/phi'.
double third_order_residual(double phi, double dphi, double d2phi, double d3phi,
                            const QuadratureConstants& consts);

/// dv/dphi = -(1 - R/2) v^2 - (P/phi) v + 2Q/phi^2.
double riccati_rhs(double phi, double v, const QuadratureConstants& consts);

/// Roots (a1, a2) of (1 - R/2) a^2 + (P - 1) a - 2Q = 0, a1 > a2.
/// Throws Error(kConstraint) when R = 2 (m = 1).
std::pair<double, double> particular_roots(const QuadratureConstants& consts);

/// (a2 - C1 phi^s a1) / (phi (1 - C1 phi^s)), s = sqrt(b).
double general_v(double phi, double C1, const QuadratureConstants& consts);

/// Analytic d/dphi of general_v.
double general_v_derivative(double phi, double C1, const QuadratureConstants& consts);

/// C2 (C1 phi^s - 1)^(2/(2-R)) phi^a2 on the branch C1 phi^s > 1.
double w_from_v(double phi, double C1, double C2, const QuadratureConstants& consts);

/// Analytic w'/w of w_from_v.
double w_log_derivative(double phi, double C1, const QuadratureConstants& consts);

/// RiccatiState at phi on the branch C1 phi^s > 1.
RiccatiState riccati_state(double phi, double C1, double C2, const QuadratureConstants& consts);

/// m = 1 general solution n/phi + C0/phi^(2n-1) and its derivative.
double m1_general_v(double phi, double C0, int n);
double m1_general_v_derivative(double phi, double C0, int n);

/// Integrates dv/dphi = riccati_rhs with classical RK4 under step-doubling
/// error control (local error per unit step), repeating with tighter local
/// tolerances until successive results agree to tol * max(1, |v|). Throws
/// Error(kPole) when the step collapses or v escapes, i.e. near a pole of
/// the solution.
double integrate_riccati_numeric(double phi_start, double v_start, double phi_end,
                                 const QuadratureConstants& consts, double tol = 1e-10);

}  // namespace qeconf
