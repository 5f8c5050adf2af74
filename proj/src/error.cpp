#include "qeconf/error.hpp"

namespace qeconf {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kOutOfDomain: return "out-of-domain";
    case ErrorKind::kDomainExhausted: return "domain-exhausted";
    case ErrorKind::kBranchDomain: return "branch-domain";
    case ErrorKind::kDegenerateMetric: return "degenerate-metric";
    case ErrorKind::kInvalidPotential: return "invalid-potential";
    case ErrorKind::kConstraint: return "constraint";
    case ErrorKind::kOutOfScope: return "out-of-scope";
    case ErrorKind::kOrientation: return "orientation";
    case ErrorKind::kIntegration: return "integration";
    case ErrorKind::kPole: return "pole";
  }
  return "unknown";
}

}  // namespace qeconf
