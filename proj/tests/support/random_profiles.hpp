#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "qeconf/closed_form.hpp"
#include "qeconf/profile.hpp"

namespace qeconf::testing {

// Portable draws: the distributions in <random> are implementation-defined,
// so build uniforms directly from the engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  double sign() { return (engine_() >> 63) ? -1.0 : 1.0; }

  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  Eigen::VectorXd unit_vector(int n) {
    // Box-Muller on our own uniforms, then normalize.
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      const double r = std::sqrt(-2.0 * std::log(uniform(1e-300, 1.0)));
      v(i) = r * std::cos(2.0 * M_PI * uniform(0.0, 1.0));
    }
    return v / v.norm();
  }

 private:
  std::mt19937_64 engine_;
};

// phi(xi) = s * exp(p0 + p1 sin(k1 xi + q1) + p2 xi)
// u(xi)   = exp(r0 + r1 cos(k2 xi + q2) + r2 xi^2 / 2)
// Smooth on all of R, phi never vanishes, u stays positive. Not a solution
// for generic coefficients.
struct SmoothProfile {
  double s = 1.0;
  double p0 = 0.0, p1 = 0.0, k1 = 1.0, q1 = 0.0, p2 = 0.0;
  double r0 = 0.0, r1 = 0.0, k2 = 1.0, q2 = 0.0, r2 = 0.0;

  template <typename T>
  T phi(T xi) const {
    using std::exp;
    using std::sin;
    return T(s) * exp(T(p0) + T(p1) * sin(T(k1) * xi + T(q1)) + T(p2) * xi);
  }

  template <typename T>
  T u(T xi) const {
    using std::cos;
    using std::exp;
    return exp(T(r0) + T(r1) * cos(T(k2) * xi + T(q2)) + T(r2) * xi * xi / T(2));
  }

  ProfilePoint point(double xi) const {
    const double g1 = p1 * k1 * std::cos(k1 * xi + q1) + p2;
    const double g2 = -p1 * k1 * k1 * std::sin(k1 * xi + q1);
    const double ph = phi(xi);
    const double h1 = -r1 * k2 * std::sin(k2 * xi + q2) + r2 * xi;
    const double h2 = -r1 * k2 * k2 * std::cos(k2 * xi + q2) + r2;
    const double uu = u(xi);
    return ProfilePoint{Jet{ph, ph * g1, ph * (g2 + g1 * g1)},
                        Jet{uu, uu * h1, uu * (h2 + h1 * h1)}};
  }

  Profile1D profile() const {
    const SmoothProfile copy = *this;
    return Profile1D({Interval{}}, [copy](double xi) { return copy.point(xi); });
  }
};

inline SmoothProfile random_smooth_profile(Rng& rng) {
  SmoothProfile p;
  p.s = rng.sign();
  p.p0 = rng.uniform(-0.5, 0.5);
  p.p1 = rng.uniform(-0.7, 0.7);
  p.k1 = rng.uniform(0.3, 2.0);
  p.q1 = rng.uniform(0.0, 6.0);
  p.p2 = rng.uniform(-0.4, 0.4);
  p.r0 = rng.uniform(-0.5, 0.5);
  p.r1 = rng.uniform(-0.7, 0.7);
  p.k2 = rng.uniform(0.3, 2.0);
  p.q2 = rng.uniform(0.0, 6.0);
  p.r2 = rng.uniform(-0.5, 0.5);
  return p;
}

inline Thm11Constants random_thm11_constants(Rng& rng) {
  Thm11Constants c;
  c.C1 = rng.uniform(-1.0, 1.0);
  c.C2 = rng.uniform(0.2, 2.0);
  c.C3 = rng.uniform(0.2, 2.0);
  c.C4 = rng.uniform(0.2, 2.0);
  c.branch = rng.sign() > 0 ? Branch::kPositive : Branch::kNegative;
  return c;
}

}  // namespace qeconf::testing
