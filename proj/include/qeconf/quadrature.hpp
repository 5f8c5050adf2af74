#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "qeconf/profile.hpp"

namespace qeconf {

/// Which value of the coefficient P enters the reduced third-order equation.
///
/// kPublished uses P = 2m - 1 + 2(n-1)/m together with the published
/// closed forms for b and a. kCorrected uses P = 1 + 2(n-1)/m, the
/// coefficient obtained by substituting u = C phi^((n-1)/m) (phi')^(-1/m)
/// into the first reduced ODE; then b = 4(n-1)(m+n-2)/m. The two agree at
/// m = 1.
enum class CoefficientConvention { kPublished, kCorrected };

const char* to_string(CoefficientConvention c) noexcept;

struct QuadratureConstants {
  int n = 3;
  double m = 1.0;
  CoefficientConvention convention = CoefficientConvention::kPublished;

  double P = 0.0;
  double Q = 0.0;
  double R = 0.0;
  double b = 0.0;
  /// sqrt(b), evaluated once in extended precision and shared by every
  /// phi^sqrt(b) in the module chain.
  double sqrt_b = 0.0;
  // Only defined for m > 1.
  std::optional<double> a;
  std::optional<double> a1;
  std::optional<double> a2;

  // Integration constants. C scales u; C2 != 0 sets the xi scale; C1 shapes
  // the integrand (C1 != 0 and, on the real branch used here, C1 > 0 when
  // m > 1); C3 shifts xi.
  double C = 1.0;
  double C1 = 0.0;
  double C2 = 1.0;
  double C3 = 0.0;
};

/// P, Q, R, b (and a, a1, a2 for m > 1). Throws Error(kOutOfScope) for m < 1.
QuadratureConstants constants(int n, double m,
                              CoefficientConvention convention = CoefficientConvention::kPublished);

/// exp(C1 / (2 phi^(2(n-1)))) / phi^(n/2).
double integrand_m1(double phi, double C1, int n);

/// 1 / ((C1 phi^sqrt(b) - 1)^(m/(m-1)) phi^(a/2)) with m = consts.m.
double integrand_mgt1(double phi, const QuadratureConstants& consts);

/// Integrand value with the first two derivatives of its logarithm.
struct IntegrandJet {
  double value = 0.0;
  double dlog = 0.0;
  double d2log = 0.0;
};

/// Dispatches on m == 1 / m > 1.
IntegrandJet integrand_jet(double phi, const QuadratureConstants& consts);

/// Lower end of the admissible phi range (0 for m = 1, C1^(-1/sqrt(b)) for m > 1).
double phi_lower_bound(const QuadratureConstants& consts);

/// u = C phi^((n-1)/m) (phi')^(-1/m). Throws Error(kOrientation) if dphi <= 0.
double u_from_phi(double phi, double dphi, int n, double m, double C);

/// u and its first two xi-derivatives from (phi, phi', phi'', phi''').
Jet u_jet_from_phi(double phi, double d1, double d2, double d3, int n, double m, double C);

/// phi and its first three xi-derivatives.
struct PhiJet3 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

struct InversionOptions {
  /// Absolute tolerance of every quadrature panel (raised to the round-off
  /// floor of the panel when its integral is large).
  double abs_tol = 1e-12;
  /// Root-finder stopping width, measured in xi.
  double xi_tol = 1e-13;
  /// Accept a table that covers only part of the requested range instead of
  /// throwing; certified() then reports what was reached.
  bool allow_partial = false;
};

/// phi(xi) defined implicitly by F(phi) = C2 (xi - xi0), where
/// F(phi) = int_{phi0}^{phi} integrand. C2 < 0 yields the mirrored branch
/// phi(xi) = phi_+(-xi), on which phi' < 0 and u uses |phi'|.
///
/// Construction tabulates F on a geometric phi grid that covers the
/// requested xi range; the table is immutable afterwards, so evaluation is
/// safe to share across threads.
class ImplicitProfile {
 public:
  /// Throws Error(kDomainExhausted) if xi_range is not inside the image of F,
  /// kIntegration if a quadrature panel fails to converge.
  ImplicitProfile(const QuadratureConstants& consts, Interval xi_range, double phi0,
                  double xi0, InversionOptions options = {});

  const QuadratureConstants& constants() const { return consts_; }
  bool mirrored() const { return sign_ < 0.0; }
  double phi0() const { return phi0_; }
  double xi0() const { return xi0_; }

  /// The open xi interval on which phi is certified.
  Interval certified() const { return certified_; }

  /// F(phi) = int_{phi0}^{phi} integrand, for phi inside the table.
  double antiderivative(double phi) const;

  /// phi solving F(phi) = C2 (xi - xi0).
  double phi_at(double xi) const;

  PhiJet3 phi_jet(double xi) const;
  ProfilePoint point(double xi) const;

  Profile1D to_profile() const;

 private:
  double integral(double lo, double hi) const;
  std::size_t anchor_node(std::size_t panel) const;

  QuadratureConstants consts_;
  InversionOptions options_;
  double phi0_;
  double xi0_;
  double sign_;
  double scale_;  // |C2|
  std::vector<double> nodes_;
  std::vector<double> cumulative_;  // F at nodes_
  Interval certified_;
};

/// Shorthand for ImplicitProfile(...).to_profile().
Profile1D invert_profile(const QuadratureConstants& consts, Interval xi_range, double phi0,
                         double xi0, InversionOptions options = {});

}  // namespace qeconf
