#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace qeconf {

/// Value and first two derivatives of a scalar function of xi.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Conformal factor and potential carrier u = exp(-f/m) at one xi.
struct ProfilePoint {
  Jet phi;
  Jet u;
  /// The potential f when a family supplies it in closed form. When absent
  /// it is derived from u as f = -m log u.
  std::optional<Jet> f = std::nullopt;
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return lo < x && x < hi; }
};

/// A translation-invariant solution candidate: phi(xi) and u(xi) with their
/// analytic derivatives, defined on a union of disjoint open intervals.
///
/// `singular_loci` lists finite xi values where the underlying family blows
/// up (e.g. the hyperplane xi + C1 = 0). Sample grids keep a margin from them.
class Profile1D {
 public:
  using Evaluator = std::function<ProfilePoint(double)>;

  Profile1D(std::vector<Interval> domain, Evaluator eval,
            std::vector<double> singular_loci = {});

  const std::vector<Interval>& domain() const { return domain_; }
  const std::vector<double>& singular_loci() const { return singular_loci_; }

  bool contains(double xi) const;

  /// Throws Error(kOutOfDomain) when xi is outside every interval.
  ProfilePoint at(double xi) const;

 private:
  std::vector<Interval> domain_;
  Evaluator eval_;
  std::vector<double> singular_loci_;
};

/// phi taken from `phi_source`, u from `u_source`, on the intersection of
/// their domains. Used to build mismatched (non-solution) pairs.
Profile1D splice(const Profile1D& phi_source, const Profile1D& u_source);

/// Equally spaced points on [lo, hi]; every point must lie in the profile
/// domain and at least `margin` away from each singular locus.
std::vector<double> sample_grid(const Profile1D& profile, double lo, double hi,
                                int count, double margin);

}  // namespace qeconf
