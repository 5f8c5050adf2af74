#include "qeconf/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "qeconf/error.hpp"

namespace qeconf {

Profile1D::Profile1D(std::vector<Interval> domain, Evaluator eval,
                     std::vector<double> singular_loci)
    : domain_(std::move(domain)),
      eval_(std::move(eval)),
      singular_loci_(std::move(singular_loci)) {
  std::sort(domain_.begin(), domain_.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (const auto& iv : domain_) {
    if (!(iv.lo < iv.hi)) {
      throw Error(ErrorKind::kConstraint, "profile domain interval is empty");
    }
  }
  for (std::size_t i = 1; i < domain_.size(); ++i) {
    if (domain_[i].lo < domain_[i - 1].hi) {
      throw Error(ErrorKind::kConstraint, "profile domain intervals overlap");
    }
  }
}

bool Profile1D::contains(double xi) const {
  return std::any_of(domain_.begin(), domain_.end(),
                     [xi](const Interval& iv) { return iv.contains(xi); });
}

ProfilePoint Profile1D::at(double xi) const {
  if (!contains(xi)) {
    std::ostringstream os;
    os << "xi = " << xi << " is outside the profile domain";
    throw Error(ErrorKind::kOutOfDomain, os.str());
  }
  return eval_(xi);
}

Profile1D splice(const Profile1D& phi_source, const Profile1D& u_source) {
  std::vector<Interval> domain;
  for (const auto& a : phi_source.domain()) {
    for (const auto& b : u_source.domain()) {
      Interval iv{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
      if (iv.lo < iv.hi) domain.push_back(iv);
    }
  }
  std::vector<double> loci = phi_source.singular_loci();
  loci.insert(loci.end(), u_source.singular_loci().begin(),
              u_source.singular_loci().end());
  return Profile1D(
      std::move(domain),
      [phi_source, u_source](double xi) {
        const ProfilePoint u_point = u_source.at(xi);
        return ProfilePoint{phi_source.at(xi).phi, u_point.u, u_point.f};
      },
      std::move(loci));
}

std::vector<double> sample_grid(const Profile1D& profile, double lo, double hi,
                                int count, double margin) {
  if (count < 2) throw Error(ErrorKind::kConstraint, "grid count must be >= 2");
  if (margin < 0.0) throw Error(ErrorKind::kConstraint, "grid margin must be >= 0");
  if (!(lo < hi)) throw Error(ErrorKind::kConstraint, "grid requires min < max");

  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  for (double xi : grid) {
    if (!profile.contains(xi)) {
      std::ostringstream os;
      os << "grid point xi = " << xi << " is outside the profile domain";
      throw Error(ErrorKind::kOutOfDomain, os.str());
    }
    for (double s : profile.singular_loci()) {
      // The margin check is inclusive of rounding at the grid end points.
      if (std::abs(xi - s) < margin * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "grid point xi = " << xi << " lies within margin " << margin
           << " of the singular locus xi = " << s;
        throw Error(ErrorKind::kOutOfDomain, os.str());
      }
    }
  }
  return grid;
}

}  // namespace qeconf
