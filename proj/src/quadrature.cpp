#include "qeconf/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <exception>
#include <memory>
#include <mutex>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <boost/math/tools/toms748_solve.hpp>

#include "qeconf/error.hpp"

namespace qeconf {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Doublings allowed when extending the table towards large phi.
constexpr int kMaxUpwardSteps = 160;
// Halvings of the gap to the lower phi bound.
constexpr int kMaxDownwardSteps = 200;
// Relative floor on panel accuracy; a 1e-12 absolute target is unreachable
// in double precision once a panel integral exceeds about 10.
constexpr double kRelTol = 1e-13;

void require_m_gt1_branch(const QuadratureConstants& c) {
  if (c.C1 == 0.0) throw Error(ErrorKind::kConstraint, "C1 must be nonzero when m > 1");
  if (c.C1 < 0.0) {
    throw Error(ErrorKind::kBranchDomain,
                "C1 < 0 makes C1 phi^sqrt(b) - 1 negative for every phi > 0");
  }
}

// log(C1 phi^s - 1), evaluated without forming phi^s.
double log_branch_base(double phi, const QuadratureConstants& c) {
  const double log_z = std::log(c.C1) + c.sqrt_b * std::log(phi);
  if (log_z <= 0.0) {
    std::ostringstream os;
    os << "C1 phi^sqrt(b) - 1 <= 0 at phi = " << phi;
    throw Error(ErrorKind::kBranchDomain, os.str());
  }
  // z - 1 = z (1 - 1/z)
  return log_z + std::log1p(-std::exp(-log_z));
}

template <typename F>
double adaptive_integral(const F& f, double lo, double hi, double abs_tol) {
  if (lo == hi) return 0.0;
  static std::once_flag handler_once;
  std::call_once(handler_once, [] { gsl_set_error_handler_off(); });

  constexpr std::size_t kLimit = 2000;
  std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)> ws(
      gsl_integration_workspace_alloc(kLimit), &gsl_integration_workspace_free);

  // Exceptions cannot cross the C callback; record the first one and rethrow.
  struct Context {
    const F* f;
    std::exception_ptr failure;
  } ctx{&f, nullptr};
  gsl_function fn;
  fn.params = &ctx;
  fn.function = [](double x, void* p) -> double {
    auto* c = static_cast<Context*>(p);
    if (c->failure) return 0.0;
    try {
      return (*c->f)(x);
    } catch (...) {
      c->failure = std::current_exception();
      return 0.0;
    }
  };

  double value = 0.0;
  double error = 0.0;
  const int status = gsl_integration_qag(&fn, lo, hi, abs_tol, kRelTol, kLimit,
                                         GSL_INTEG_GAUSS21, ws.get(), &value, &error);
  if (ctx.failure) std::rethrow_exception(ctx.failure);
  // A round-off diagnosis is harmless when the estimate still meets the target.
  const bool converged = status == GSL_SUCCESS || status == GSL_EROUND;
  if (!converged || !std::isfinite(value) || error > std::max(abs_tol, kRelTol * std::abs(value))) {
    std::ostringstream os;
    os << "quadrature on [" << lo << ", " << hi << "] did not reach tolerance (error " << error
       << ", " << gsl_strerror(status) << ")";
    throw Error(ErrorKind::kIntegration, os.str());
  }
  return value;
}

}  // namespace

const char* to_string(CoefficientConvention c) noexcept {
  return c == CoefficientConvention::kPublished ? "published" : "corrected";
}

QuadratureConstants constants(int n, double m, CoefficientConvention convention) {
  if (n < 3) throw Error(ErrorKind::kConstraint, "dimension n must be >= 3");
  if (!(m >= 1.0) || !std::isfinite(m)) {
    throw Error(ErrorKind::kOutOfScope, "implicit families are classified only for m >= 1");
  }
  QuadratureConstants c;
  c.n = n;
  c.m = m;
  c.convention = convention;
  const double nm1 = n - 1.0;
  c.Q = nm1 * nm1 / m + nm1;
  c.R = 1.0 + 1.0 / m;
  if (convention == CoefficientConvention::kPublished) {
    c.P = 2.0 * m - 1.0 + 2.0 * nm1 / m;
    c.b = 4.0 * ((m - 1.0) * (m - 1.0) + nm1 / m * (3.0 * m + n - 4.0));
  } else {
    c.P = 1.0 + 2.0 * nm1 / m;
    c.b = 4.0 * nm1 * (m + n - 2.0) / m;
  }
  c.sqrt_b = static_cast<double>(std::sqrt(static_cast<long double>(c.b)));

  if (m > 1.0) {
    const double k = m / (m - 1.0);  // 1 / (2 - R)
    c.a1 = k * (-(c.P - 1.0) + c.sqrt_b);
    c.a2 = k * (-(c.P - 1.0) - c.sqrt_b);
    c.a = c.a2;
  }
  return c;
}

double integrand_m1(double phi, double C1, int n) {
  if (!(phi > 0.0)) throw Error(ErrorKind::kOutOfDomain, "integrand requires phi > 0");
  const double log_phi = std::log(phi);
  return std::exp(C1 / 2.0 * std::exp(-2.0 * (n - 1) * log_phi) - n / 2.0 * log_phi);
}

double integrand_mgt1(double phi, const QuadratureConstants& c) {
  require_m_gt1_branch(c);
  if (!(phi > 0.0)) throw Error(ErrorKind::kBranchDomain, "integrand requires phi > 0");
  const double k = c.m / (c.m - 1.0);
  return std::exp(-k * log_branch_base(phi, c) - c.a.value() / 2.0 * std::log(phi));
}

IntegrandJet integrand_jet(double phi, const QuadratureConstants& c) {
  const int n = c.n;
  if (c.m == 1.0) {
    const double value = integrand_m1(phi, c.C1, n);
    const double p2n = std::pow(phi, -2.0 * n);
    return IntegrandJet{
        value,
        -c.C1 * (n - 1) * p2n * phi - n / (2.0 * phi),
        c.C1 * (n - 1) * (2.0 * n - 1) * p2n + n / (2.0 * phi * phi),
    };
  }
  const double value = integrand_mgt1(phi, c);
  const double k = c.m / (c.m - 1.0);
  const double s = c.sqrt_b;
  const double a = c.a.value();
  // z / (z - 1) with z = C1 phi^s
  const double z = std::exp(std::log(c.C1) + s * std::log(phi));
  const double ratio = std::isfinite(z) ? z / (z - 1.0) : 1.0;
  const double dlog = -k * s * ratio / phi - a / (2.0 * phi);
  // z (z + s - 1) / (z - 1)^2 = ratio * (1 + s / (z - 1))
  const double tail = std::isfinite(z) ? s / (z - 1.0) : 0.0;
  const double d2log = k * s * ratio * (1.0 + tail) / (phi * phi) + a / (2.0 * phi * phi);
  return IntegrandJet{value, dlog, d2log};
}

double phi_lower_bound(const QuadratureConstants& c) {
  if (c.m == 1.0) return 0.0;
  require_m_gt1_branch(c);
  return std::pow(c.C1, -1.0 / c.sqrt_b);
}

double u_from_phi(double phi, double dphi, int n, double m, double C) {
  if (!(dphi > 0.0)) throw Error(ErrorKind::kOrientation, "u(phi) requires phi' > 0");
  if (!(phi > 0.0)) throw Error(ErrorKind::kOutOfDomain, "u(phi) requires phi > 0");
  if (!(C > 0.0)) throw Error(ErrorKind::kConstraint, "C must be positive");
  return C * std::exp(((n - 1) * std::log(phi) - std::log(dphi)) / m);
}

Jet u_jet_from_phi(double phi, double d1, double d2, double d3, int n, double m, double C) {
  const double u = u_from_phi(phi, d1, n, m, C);
  const double p = d1 / phi;
  const double q = d2 / d1;
  const double lu = ((n - 1) * p - q) / m;
  const double lu1 = ((n - 1) * (d2 / phi - p * p) - (d3 / d1 - q * q)) / m;
  return Jet{u, u * lu, u * (lu1 + lu * lu)};
}

ImplicitProfile::ImplicitProfile(const QuadratureConstants& consts, Interval xi_range,
                                 double phi0, double xi0, InversionOptions options)
    : consts_(consts), options_(options), phi0_(phi0), xi0_(xi0) {
  if (consts_.n < 3) throw Error(ErrorKind::kConstraint, "dimension n must be >= 3");
  if (!(consts_.m >= 1.0)) {
    throw Error(ErrorKind::kOutOfScope, "implicit families are classified only for m >= 1");
  }
  if (!(consts_.C > 0.0)) throw Error(ErrorKind::kConstraint, "C must be positive");
  if (consts_.C2 == 0.0) throw Error(ErrorKind::kConstraint, "C2 must be nonzero");
  if (!(xi_range.lo < xi_range.hi)) {
    throw Error(ErrorKind::kConstraint, "xi range must satisfy lo < hi");
  }
  const double lower = phi_lower_bound(consts_);
  if (!(phi0_ > lower)) {
    throw Error(consts_.m == 1.0 ? ErrorKind::kOutOfDomain : ErrorKind::kBranchDomain,
                "anchor phi0 lies outside the admissible phi range");
  }
  const double i0 = integrand_jet(phi0_, consts_).value;
  if (!(i0 > 0.0) || !std::isfinite(i0)) {
    throw Error(ErrorKind::kIntegration, "integrand is not finite and positive at phi0");
  }

  sign_ = consts_.C2 > 0.0 ? 1.0 : -1.0;
  scale_ = std::abs(consts_.C2);

  // Work in eta = sign * xi, where F(phi) = |C2| (eta - eta0) is increasing.
  const double eta0 = sign_ * xi0_;
  const double eta_a = sign_ * xi_range.lo;
  const double eta_b = sign_ * xi_range.hi;
  const double f_lo = scale_ * (std::min(eta_a, eta_b) - eta0);
  const double f_hi = scale_ * (std::max(eta_a, eta_b) - eta0);

  std::vector<double> up_nodes{phi0_};
  std::vector<double> up_cum{0.0};
  bool up_ok = true;
  for (int step = 0; up_cum.back() <= f_hi; ++step) {
    const double cur = up_nodes.back();
    const double next = 2.0 * cur;
    double piece = 0.0;
    try {
      piece = integral(cur, next);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kIntegration) throw;
      up_ok = false;
    }
    if (!up_ok || step >= kMaxUpwardSteps || !std::isfinite(piece) ||
        !std::isfinite(integrand_jet(next, consts_).value)) {
      up_ok = false;
      break;
    }
    up_nodes.push_back(next);
    up_cum.push_back(up_cum.back() + piece);
  }

  std::vector<double> down_nodes;
  std::vector<double> down_cum;
  bool down_ok = true;
  {
    double cur = phi0_;
    double cum = 0.0;
    for (int step = 0; !(cum < f_lo); ++step) {
      const double next = lower + (cur - lower) / 2.0;
      if (step >= kMaxDownwardSteps || cur - next <= 4.0 * kEps * cur) {
        down_ok = false;
        break;
      }
      double piece = 0.0;
      try {
        piece = integral(next, cur);
        const double v = integrand_jet(next, consts_).value;
        if (!std::isfinite(piece) || !std::isfinite(v) || !(v > 0.0)) down_ok = false;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kIntegration) throw;
        down_ok = false;
      }
      if (!down_ok) break;
      cum -= piece;
      cur = next;
      down_nodes.push_back(cur);
      down_cum.push_back(cum);
    }
  }

  nodes_.assign(down_nodes.rbegin(), down_nodes.rend());
  cumulative_.assign(down_cum.rbegin(), down_cum.rend());
  nodes_.insert(nodes_.end(), up_nodes.begin(), up_nodes.end());
  cumulative_.insert(cumulative_.end(), up_cum.begin(), up_cum.end());

  const double eta_first = eta0 + cumulative_.front() / scale_;
  const double eta_last = eta0 + cumulative_.back() / scale_;
  certified_ = sign_ > 0.0 ? Interval{eta_first, eta_last} : Interval{-eta_last, -eta_first};

  if ((!up_ok || !down_ok) && !options_.allow_partial) {
    std::ostringstream os;
    os.precision(17);
    os << "requested xi range [" << xi_range.lo << ", " << xi_range.hi
       << "] leaves the certified image [" << certified_.lo << ", " << certified_.hi
       << "] of the implicit integral";
    throw Error(ErrorKind::kDomainExhausted, os.str());
  }
}

double ImplicitProfile::integral(double lo, double hi) const {
  const auto& c = consts_;
  auto f = [&c](double phi) {
    return c.m == 1.0 ? integrand_m1(phi, c.C1, c.n) : integrand_mgt1(phi, c);
  };
  return adaptive_integral(f, lo, hi, options_.abs_tol);
}

double ImplicitProfile::antiderivative(double phi) const {
  if (!(phi >= nodes_.front() && phi <= nodes_.back())) {
    throw Error(ErrorKind::kDomainExhausted, "phi lies outside the tabulated range");
  }
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), phi);
  if (it == nodes_.end()) return cumulative_.back();
  const std::size_t j = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  const std::size_t e = anchor_node(j);
  return cumulative_[e] + integral(nodes_[e], phi);
}

// Panel endpoint to integrate from: the one with the smaller |F|. Panels
// next to a pole can carry |F| near 1e300 at one end, and starting there
// would cancel every digit of a small result.
std::size_t ImplicitProfile::anchor_node(std::size_t j) const {
  return std::abs(cumulative_[j + 1]) < std::abs(cumulative_[j]) ? j + 1 : j;
}

double ImplicitProfile::phi_at(double xi) const {
  const double target = scale_ * (sign_ * xi - sign_ * xi0_);
  if (!(target >= cumulative_.front() && target <= cumulative_.back())) {
    std::ostringstream os;
    os << "xi = " << xi << " is outside the certified interval";
    throw Error(ErrorKind::kDomainExhausted, os.str());
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) return nodes_.back();
  const std::size_t j = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const double f_a = cumulative_[j] - target;
  const double f_b = cumulative_[j + 1] - target;
  if (f_a == 0.0) return nodes_[j];

  const std::size_t e = anchor_node(j);
  const double base = nodes_[e];
  const double offset = cumulative_[e] - target;
  auto residual = [&](double phi) { return offset + integral(base, phi); };
  auto converged = [&](double a, double b) {
    const double width = std::abs(b - a);
    if (width <= 4.0 * kEps * std::max(std::abs(a), std::abs(b))) return true;
    const double rate = integrand_jet(0.5 * (a + b), consts_).value / scale_;
    return width * rate <= options_.xi_tol;
  };
  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(residual, nodes_[j], nodes_[j + 1],
                                                         f_a, f_b, converged, max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

PhiJet3 ImplicitProfile::phi_jet(double xi) const {
  const double phi = phi_at(xi);
  const IntegrandJet g = integrand_jet(phi, consts_);
  // d phi / d eta = |C2| / I(phi), then differentiate through phi.
  const double d1 = scale_ / g.value;
  const double d2 = -g.dlog * d1 * d1;
  const double d3 = d1 * d1 * d1 * (2.0 * g.dlog * g.dlog - g.d2log);
  return PhiJet3{phi, sign_ * d1, d2, sign_ * d3};
}

ProfilePoint ImplicitProfile::point(double xi) const {
  const PhiJet3 p = phi_jet(xi);
  // u is built on the increasing branch; odd derivatives flip under mirroring.
  const Jet u = u_jet_from_phi(p.value, sign_ * p.d1, p.d2, sign_ * p.d3, consts_.n,
                               consts_.m, consts_.C);
  return ProfilePoint{Jet{p.value, p.d1, p.d2}, Jet{u.value, sign_ * u.d1, u.d2}};
}

Profile1D ImplicitProfile::to_profile() const {
  auto self = std::make_shared<const ImplicitProfile>(*this);
  return Profile1D({certified_}, [self](double xi) { return self->point(xi); });
}

Profile1D invert_profile(const QuadratureConstants& consts, Interval xi_range, double phi0,
                         double xi0, InversionOptions options) {
  return ImplicitProfile(consts, xi_range, phi0, xi0, options).to_profile();
}

}  // namespace qeconf
