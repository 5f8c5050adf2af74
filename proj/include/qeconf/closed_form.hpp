#pragma once

#include "qeconf/profile.hpp"

namespace qeconf {

enum class Branch { kPositive, kNegative };

/// Integration constants of the m = 2 - n family. C2, C3, C4 must be positive;
/// `branch` picks the component xi + C1 > 0 or xi + C1 < 0.
struct Thm11Constants {
  double C1 = 0.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double C4 = 1.0;
  Branch branch = Branch::kPositive;
};

/// u = C2 |t| exp(-C3 t^(n-1)), phi = sgn(t) C4 exp(C3 t^(n-1)), t = xi + C1,
/// on one component of R \ {-C1}. The metric solves the quasi-Einstein
/// equation with m = 2 - n and lambda = 0.
Profile1D thm11_profile(int n, const Thm11Constants& consts);

/// f = (n-2) [log(C2 |t|) - C3 t^(n-1)].
double thm11_potential(int n, const Thm11Constants& consts, double xi);

inline double thm11_m(int n) { return 2.0 - n; }

/// phi = gamma, u = a xi + b on the half line a xi + b > 0. Solves the
/// equation for every m != 0 with lambda = 0.
Profile1D homothetic_profile(double gamma, double a, double b);

/// The explicit m = 1 solution on the half line -C2 (C2 xi + C3) > 0:
/// phi^-2 = ((n-2)^2 (C2 xi + C3)^2 / 4)^(2/(n-2)),
/// u = -2C / (C2 (n-2)(C2 xi + C3)).
Profile1D example14_profile(int n, double C, double C2, double C3);

}  // namespace qeconf
