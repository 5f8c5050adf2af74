#pragma once

#include <stdexcept>
#include <string>

namespace qeconf {

enum class ErrorKind {
  kOutOfDomain,      // evaluation point outside the profile domain
  kDomainExhausted,  // requested range outside the certified image
  kBranchDomain,     // real power of a nonpositive base
  kDegenerateMetric, // conformal factor vanishes
  kInvalidPotential, // u <= 0
  kConstraint,       // parameter violates a stated constraint
  kOutOfScope,       // parameter regime not covered (e.g. m < 1)
  kOrientation,      // phi' <= 0 where a positive derivative is required
  kIntegration,      // quadrature failed to converge
  kPole,             // singular point of a reduced equation
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qeconf
