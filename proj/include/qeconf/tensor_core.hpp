#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qeconf/profile.hpp"

namespace qeconf {

/// Ansatz setting: dimension, quasi-Einstein parameter m, Einstein constant
/// lambda and the unit direction alpha of xi = sum_i alpha_i x_i.
class ModelParams {
 public:
  /// Throws Error(kConstraint) unless n >= 3, m != 0, alpha has n entries and
  /// |alpha|^2 = 1 to within 1e-12.
  ModelParams(int n, double m, double lambda, Eigen::VectorXd alpha);

  /// Uses alpha = e_n.
  ModelParams(int n, double m, double lambda = 0.0);

  int n() const { return n_; }
  double m() const { return m_; }
  double lambda() const { return lambda_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  int n_;
  double m_;
  double lambda_;
  Eigen::VectorXd alpha_;
};

/// Christoffel symbols Gamma^k_ij of the conformal metric, stored densely.
class Christoffel {
 public:
  explicit Christoffel(int n) : n_(n), data_(static_cast<std::size_t>(n * n * n), 0.0) {}

  int n() const { return n_; }
  double operator()(int k, int i, int j) const { return data_[index(k, i, j)]; }
  double& operator()(int k, int i, int j) { return data_[index(k, i, j)]; }

 private:
  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>((k * n_ + i) * n_ + j);
  }

  int n_;
  std::vector<double> data_;
};

/// Point-wise tensors of gbar = phi^-2 delta at one xi.
struct TensorFrame {
  Eigen::MatrixXd gbar;
  Christoffel christoffel;
  Eigen::MatrixXd hess_u;
  Eigen::MatrixXd hess_f;
  Eigen::MatrixXd ricci;
  Eigen::MatrixXd df_df;
};

/// Max-abs residuals of every checked identity over a set of sample points.
struct ResidualReport {
  double fundamental_max = 0.0;
  std::pair<double, double> ode_max{0.0, 0.0};
  std::pair<double, double> pde_max{0.0, 0.0};
  double hessian_identity_max = 0.0;
  double mu_mean = 0.0;
  double mu_var = 0.0;
  /// Mean magnitude of the terms that make up mu; the denominator for a
  /// relative variance when mu itself is (close to) zero.
  double mu_scale = 0.0;
  double scalar_identity_max = 0.0;
  int samples = 0;

  /// mu_var / max(mu_mean^2, mu_scale^2); 0 when both vanish.
  double mu_relative_variance() const;
};

/// Jet of the potential f = -m log u. Throws Error(kInvalidPotential) if u <= 0.
Jet potential_jet(double m, const Jet& u);

/// p.f if the profile supplies it, potential_jet(m, p.u) otherwise. Throws
/// Error(kInvalidPotential) if u <= 0 either way.
Jet potential_of(const ModelParams& params, const ProfilePoint& p);

// Every operation below comes in two forms: one on an already evaluated
// ProfilePoint, and one on (profile, xi) that performs the domain check.

Christoffel conformal_christoffel(const ModelParams& params, const ProfilePoint& p);
Christoffel conformal_christoffel(const ModelParams& params, const Profile1D& profile,
                                  double xi);

Eigen::MatrixXd ricci_conformal(const ModelParams& params, const ProfilePoint& p);
Eigen::MatrixXd ricci_conformal(const ModelParams& params, const Profile1D& profile,
                                double xi);

/// Hess_gbar s for a scalar s(xi): alpha_i alpha_j (s'' + 2 (phi'/phi) s')
/// - delta_ij (phi'/phi) s'.
Eigen::MatrixXd hessian_conformal(const ModelParams& params, const Jet& scalar,
                                  const Jet& phi);
Eigen::MatrixXd hessian_conformal(const ModelParams& params, const Jet& scalar,
                                  const Profile1D& profile, double xi);

/// Ric + Hess f - (1/m) df (x) df - lambda gbar, with f = -m log u.
Eigen::MatrixXd fundamental_residual(const ModelParams& params, const ProfilePoint& p);
Eigen::MatrixXd fundamental_residual(const ModelParams& params, const Profile1D& profile,
                                     double xi);

/// Hess f - (1/m) df (x) df + (m/u) Hess u; zero for every admissible profile.
Eigen::MatrixXd hessian_identity_residual(const ModelParams& params,
                                          const ProfilePoint& p);
Eigen::MatrixXd hessian_identity_residual(const ModelParams& params,
                                          const Profile1D& profile, double xi);

/// mu from Delta f - |grad f|^2 = m lambda - m mu exp(2f/m), metric gbar.
double mu_at(const ModelParams& params, const ProfilePoint& p);
double mu_at(const ModelParams& params, const Profile1D& profile, double xi);

/// (u^2/m)(R - lambda n) + (m-1)|grad u|^2 + lambda u^2 - mu.
double scalar_identity_residual(const ModelParams& params, const ProfilePoint& p,
                                double mu);
double scalar_identity_residual(const ModelParams& params, const Profile1D& profile,
                                double xi, double mu);

/// The reduced ODE pair (r1, r2); both vanish iff the profile is a solution.
std::pair<double, double> ode_residuals(const ModelParams& params, const ProfilePoint& p);
std::pair<double, double> ode_residuals(const ModelParams& params,
                                        const Profile1D& profile, double xi);

/// Both PDE families written in ambient coordinates at a point x.
/// `offdiag(i, j)` is the i != j family (diagonal entries unused, left 0);
/// `diag(i)` the i = i family.
struct PdeResiduals {
  Eigen::MatrixXd offdiag;
  Eigen::VectorXd diag;
};

PdeResiduals pde_residual_components(const ModelParams& params, const Profile1D& profile,
                                     const Eigen::VectorXd& x);

/// (max |offdiag|, max |diag|) at x.
std::pair<double, double> pde_residuals(const ModelParams& params, const Profile1D& profile,
                                        const Eigen::VectorXd& x);

TensorFrame assemble_frame(const ModelParams& params, const ProfilePoint& p);
TensorFrame assemble_frame(const ModelParams& params, const Profile1D& profile, double xi);

/// Evaluates every residual at each xi. The scalar identity uses the mu found
/// at the first sample as its reference value. `xis` must be nonempty.
ResidualReport verify_profile(const ModelParams& params, const Profile1D& profile,
                              std::span<const double> xis);

double max_abs(const Eigen::MatrixXd& m);

}  // namespace qeconf
