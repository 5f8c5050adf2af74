#include "qeconf/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qeconf/error.hpp"

namespace qeconf {
namespace {

constexpr double kUnitTolerance = 1e-12;

void require_nondegenerate(const Jet& phi) {
  if (phi.value == 0.0 || !std::isfinite(phi.value)) {
    throw Error(ErrorKind::kDegenerateMetric, "conformal factor phi vanishes");
  }
}

void require_positive_u(const Jet& u) {
  if (!(u.value > 0.0)) {
    std::ostringstream os;
    os << "u = " << u.value << " is not positive";
    throw Error(ErrorKind::kInvalidPotential, os.str());
  }
}

// Fills the upper triangle through `entry` and mirrors it.
template <typename F>
Eigen::MatrixXd symmetric(int n, F&& entry) {
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      out(i, j) = entry(i, j);
      out(j, i) = out(i, j);
    }
  }
  return out;
}

double kronecker(int i, int j) { return i == j ? 1.0 : 0.0; }

}  // namespace

ModelParams::ModelParams(int n, double m, double lambda, Eigen::VectorXd alpha)
    : n_(n), m_(m), lambda_(lambda), alpha_(std::move(alpha)) {
  if (n_ < 3) throw Error(ErrorKind::kConstraint, "dimension n must be >= 3");
  if (m_ == 0.0 || !std::isfinite(m_)) {
    throw Error(ErrorKind::kConstraint, "parameter m must be finite and nonzero");
  }
  if (!std::isfinite(lambda_)) throw Error(ErrorKind::kConstraint, "lambda must be finite");
  if (alpha_.size() != n_) {
    throw Error(ErrorKind::kConstraint, "alpha must have exactly n components");
  }
  if (std::abs(alpha_.squaredNorm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorKind::kConstraint, "alpha must be a unit vector");
  }
}

ModelParams::ModelParams(int n, double m, double lambda)
    : ModelParams(n, m, lambda, n >= 1 ? Eigen::VectorXd::Unit(n, n - 1)
                                       : Eigen::VectorXd()) {}

double ResidualReport::mu_relative_variance() const {
  const double denom = std::max(mu_mean * mu_mean, mu_scale * mu_scale);
  return denom > 0.0 ? mu_var / denom : 0.0;
}

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Jet potential_jet(double m, const Jet& u) {
  require_positive_u(u);
  const double lu = u.d1 / u.value;
  return Jet{-m * std::log(u.value), -m * lu, -m * (u.d2 / u.value - lu * lu)};
}

Jet potential_of(const ModelParams& params, const ProfilePoint& p) {
  if (!p.f) return potential_jet(params.m(), p.u);
  require_positive_u(p.u);
  return *p.f;
}

Christoffel conformal_christoffel(const ModelParams& params, const ProfilePoint& p) {
  require_nondegenerate(p.phi);
  const int n = params.n();
  const auto& alpha = params.alpha();
  const double rho = p.phi.d1 / p.phi.value;
  Christoffel gamma(n);
  // Gamma^k_ij = (phi'/phi)(delta_ij alpha_k - delta_ki alpha_j - delta_kj alpha_i)
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const double v = rho * (kronecker(i, j) * alpha(k) - kronecker(k, i) * alpha(j) -
                                kronecker(k, j) * alpha(i));
        gamma(k, i, j) = v;
        gamma(k, j, i) = v;
      }
    }
  }
  return gamma;
}

Christoffel conformal_christoffel(const ModelParams& params, const Profile1D& profile,
                                  double xi) {
  return conformal_christoffel(params, profile.at(xi));
}

Eigen::MatrixXd ricci_conformal(const ModelParams& params, const ProfilePoint& p) {
  require_nondegenerate(p.phi);
  const int n = params.n();
  const auto& alpha = params.alpha();
  const double phi = p.phi.value;
  const double inv2 = 1.0 / (phi * phi);
  const double aa = (n - 2) * phi * p.phi.d2 * inv2;
  const double id = (phi * p.phi.d2 - (n - 1) * p.phi.d1 * p.phi.d1) * inv2;
  return symmetric(n, [&](int i, int j) { return aa * alpha(i) * alpha(j) + id * kronecker(i, j); });
}

Eigen::MatrixXd ricci_conformal(const ModelParams& params, const Profile1D& profile,
                                double xi) {
  return ricci_conformal(params, profile.at(xi));
}

Eigen::MatrixXd hessian_conformal(const ModelParams& params, const Jet& scalar,
                                  const Jet& phi) {
  require_nondegenerate(phi);
  const auto& alpha = params.alpha();
  const double rho = phi.d1 / phi.value;
  const double aa = scalar.d2 + 2.0 * rho * scalar.d1;
  const double id = -rho * scalar.d1;
  return symmetric(params.n(),
                   [&](int i, int j) { return aa * alpha(i) * alpha(j) + id * kronecker(i, j); });
}

Eigen::MatrixXd hessian_conformal(const ModelParams& params, const Jet& scalar,
                                  const Profile1D& profile, double xi) {
  return hessian_conformal(params, scalar, profile.at(xi).phi);
}

TensorFrame assemble_frame(const ModelParams& params, const ProfilePoint& p) {
  require_nondegenerate(p.phi);
  const int n = params.n();
  const Jet f = potential_of(params, p);
  const auto& alpha = params.alpha();
  const double inv2 = 1.0 / (p.phi.value * p.phi.value);
  return TensorFrame{
      Eigen::MatrixXd::Identity(n, n) * inv2,
      conformal_christoffel(params, p),
      hessian_conformal(params, p.u, p.phi),
      hessian_conformal(params, f, p.phi),
      ricci_conformal(params, p),
      symmetric(n, [&](int i, int j) { return f.d1 * f.d1 * alpha(i) * alpha(j); }),
  };
}

TensorFrame assemble_frame(const ModelParams& params, const Profile1D& profile, double xi) {
  return assemble_frame(params, profile.at(xi));
}

Eigen::MatrixXd fundamental_residual(const ModelParams& params, const ProfilePoint& p) {
  const TensorFrame frame = assemble_frame(params, p);
  return frame.ricci + frame.hess_f - frame.df_df / params.m() -
         params.lambda() * frame.gbar;
}

Eigen::MatrixXd fundamental_residual(const ModelParams& params, const Profile1D& profile,
                                     double xi) {
  return fundamental_residual(params, profile.at(xi));
}

Eigen::MatrixXd hessian_identity_residual(const ModelParams& params,
                                          const ProfilePoint& p) {
  const TensorFrame frame = assemble_frame(params, p);
  const double m = params.m();
  return frame.hess_f - frame.df_df / m + (m / p.u.value) * frame.hess_u;
}

Eigen::MatrixXd hessian_identity_residual(const ModelParams& params,
                                          const Profile1D& profile, double xi) {
  return hessian_identity_residual(params, profile.at(xi));
}

namespace {

struct MuTerms {
  double mu;
  double scale;
};

// Laplacian and squared gradient of f in gbar: gbar^-1 = phi^2 delta.
MuTerms mu_terms(const ModelParams& params, const ProfilePoint& p) {
  const double m = params.m();
  const Jet f = potential_of(params, p);
  const Eigen::MatrixXd hess_f = hessian_conformal(params, f, p.phi);
  const double phi2 = p.phi.value * p.phi.value;
  const double laplacian = phi2 * hess_f.trace();
  const double grad2 = phi2 * f.d1 * f.d1;
  // exp(2f/m) = u^-2
  const double u2 = p.u.value * p.u.value;
  const double mu = u2 * (m * params.lambda() - (laplacian - grad2)) / m;
  const double scale =
      u2 * (std::abs(params.lambda()) + std::abs(laplacian / m) + std::abs(grad2 / m));
  return {mu, scale};
}

}  // namespace

double mu_at(const ModelParams& params, const ProfilePoint& p) {
  return mu_terms(params, p).mu;
}

double mu_at(const ModelParams& params, const Profile1D& profile, double xi) {
  return mu_at(params, profile.at(xi));
}

double scalar_identity_residual(const ModelParams& params, const ProfilePoint& p,
                                double mu) {
  require_positive_u(p.u);
  const double m = params.m();
  const double lambda = params.lambda();
  const double phi2 = p.phi.value * p.phi.value;
  const double scalar_curvature = phi2 * ricci_conformal(params, p).trace();
  const double u2 = p.u.value * p.u.value;
  const double grad_u2 = phi2 * p.u.d1 * p.u.d1;
  return (u2 / m) * (scalar_curvature - lambda * params.n()) + (m - 1.0) * grad_u2 +
         lambda * u2 - mu;
}

double scalar_identity_residual(const ModelParams& params, const Profile1D& profile,
                                double xi, double mu) {
  return scalar_identity_residual(params, profile.at(xi), mu);
}

std::pair<double, double> ode_residuals(const ModelParams& params, const ProfilePoint& p) {
  require_nondegenerate(p.phi);
  require_positive_u(p.u);
  const int n = params.n();
  const double m = params.m();
  const double phi = p.phi.value;
  const double rho = p.phi.d1 / phi;
  const double r1 = (n - 2) * p.phi.d2 / phi - (m / p.u.value) * (p.u.d2 + 2.0 * rho * p.u.d1);
  const double r2 = p.phi.d2 / phi - (n - 1) * rho * rho + m * rho * (p.u.d1 / p.u.value) -
                    params.lambda() / (phi * phi);
  return {r1, r2};
}

std::pair<double, double> ode_residuals(const ModelParams& params,
                                        const Profile1D& profile, double xi) {
  return ode_residuals(params, profile.at(xi));
}

PdeResiduals pde_residual_components(const ModelParams& params, const Profile1D& profile,
                                     const Eigen::VectorXd& x) {
  const int n = params.n();
  if (x.size() != n) throw Error(ErrorKind::kConstraint, "point x must have n components");
  const auto& alpha = params.alpha();
  const ProfilePoint p = profile.at(alpha.dot(x));
  require_nondegenerate(p.phi);
  require_positive_u(p.u);

  const double m = params.m();
  const double phi = p.phi.value;
  const double u = p.u.value;

  // Ambient partial derivatives of phi(xi(x)) and u(xi(x)).
  const Eigen::VectorXd dphi = p.phi.d1 * alpha;
  const Eigen::VectorXd du = p.u.d1 * alpha;
  const Eigen::MatrixXd ddphi = p.phi.d2 * alpha * alpha.transpose();
  const Eigen::MatrixXd ddu = p.u.d2 * alpha * alpha.transpose();
  const double laplacian_phi = ddphi.trace();
  const double grad_phi2 = dphi.squaredNorm();
  const double mixed = dphi.dot(du) / phi;

  PdeResiduals out{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double lhs = (m / u) * (ddu(i, j) + dphi(j) / phi * du(i) + dphi(i) / phi * du(j));
      const double rhs = (n - 2) * ddphi(i, j) / phi;
      out.offdiag(i, j) = lhs - rhs;
      out.offdiag(j, i) = out.offdiag(i, j);
    }
    const double lhs = (m / u) * (ddu(i, i) + 2.0 * dphi(i) / phi * du(i) - mixed);
    const double rhs = (n - 2) * ddphi(i, i) / phi + laplacian_phi / phi -
                       (n - 1) * grad_phi2 / (phi * phi) - params.lambda() / (phi * phi);
    out.diag(i) = lhs - rhs;
  }
  return out;
}

std::pair<double, double> pde_residuals(const ModelParams& params, const Profile1D& profile,
                                        const Eigen::VectorXd& x) {
  const PdeResiduals r = pde_residual_components(params, profile, x);
  return {max_abs(r.offdiag), r.diag.cwiseAbs().maxCoeff()};
}

ResidualReport verify_profile(const ModelParams& params, const Profile1D& profile,
                              std::span<const double> xis) {
  if (xis.empty()) throw Error(ErrorKind::kConstraint, "verification needs at least one sample");

  ResidualReport report;
  std::vector<double> mus;
  mus.reserve(xis.size());
  double scale_sum = 0.0;
  double mu_ref = 0.0;

  for (double xi : xis) {
    const ProfilePoint p = profile.at(xi);
    report.fundamental_max =
        std::max(report.fundamental_max, max_abs(fundamental_residual(params, p)));
    report.hessian_identity_max =
        std::max(report.hessian_identity_max, max_abs(hessian_identity_residual(params, p)));

    const auto [r1, r2] = ode_residuals(params, p);
    report.ode_max.first = std::max(report.ode_max.first, std::abs(r1));
    report.ode_max.second = std::max(report.ode_max.second, std::abs(r2));

    // xi * alpha is an ambient point on the level set of xi.
    const auto [off, diag] = pde_residuals(params, profile, xi * params.alpha());
    report.pde_max.first = std::max(report.pde_max.first, off);
    report.pde_max.second = std::max(report.pde_max.second, diag);

    const MuTerms terms = mu_terms(params, p);
    if (mus.empty()) mu_ref = terms.mu;
    mus.push_back(terms.mu);
    scale_sum += terms.scale;

    report.scalar_identity_max = std::max(
        report.scalar_identity_max, std::abs(scalar_identity_residual(params, p, mu_ref)));
  }

  const double count = static_cast<double>(mus.size());
  double mean = 0.0;
  for (double mu : mus) mean += mu;
  mean /= count;
  double var = 0.0;
  for (double mu : mus) var += (mu - mean) * (mu - mean);
  var = mus.size() > 1 ? var / (count - 1.0) : 0.0;

  report.mu_mean = mean;
  report.mu_var = var;
  report.mu_scale = scale_sum / count;
  report.samples = static_cast<int>(mus.size());
  return report;
}

}  // namespace qeconf
