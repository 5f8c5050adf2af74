#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qeconf/profile.hpp"
#include "qeconf/quadrature.hpp"
#include "qeconf/tensor_core.hpp"

namespace qeconf::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitResidualFailure = 1,
  kExitUsage = 2,
  kExitDomain = 3,
};

/// Malformed or incomplete job description.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  std::optional<double> min;
  std::optional<double> max;
  int count = 50;
  double margin = 0.05;
};

struct OutputSpec {
  std::string format = "csv";
  std::string path;  // empty: standard output
};

struct SweepSpec {
  std::vector<int> n_values;
  std::vector<double> m_values;
  int draws = 0;
};

struct JobConfig {
  std::string family;
  int n = 3;
  std::optional<double> m;
  std::map<std::string, double> constants;
  GridSpec xi_grid;
  std::optional<std::vector<double>> alpha;
  std::map<std::string, double> tolerances;
  OutputSpec output;
  CoefficientConvention coefficients = CoefficientConvention::kPublished;
  std::uint64_t seed = 0;
  SweepSpec sweep;
};

/// Parses the JobConfig JSON schema. Throws UsageError on malformed input;
/// invariants (known family, count >= 2, ...) are checked when a command
/// runs, after command-line overrides.
JobConfig config_from_json(const nlohmann::json& j);

/// A constructed job: model parameters, the profile and its sample grid.
struct BuiltJob {
  ModelParams params;
  Profile1D profile;
  std::vector<double> grid;
};

/// Throws UsageError for missing or contradictory settings, qeconf::Error
/// when construction fails.
BuiltJob build_job(const JobConfig& config);

/// Tolerances with family defaults filled in.
std::map<std::string, double> effective_tolerances(const JobConfig& config);

/// Names of the checks in `report` exceeding their tolerance.
std::vector<std::string> failed_checks(const ResidualReport& report,
                                       const std::map<std::string, double>& tolerances);

nlohmann::ordered_json report_to_json(const ResidualReport& report);

/// Serializes with every floating-point number printed to `digits`
/// significant digits (non-finite values become null).
std::string dump_json(const nlohmann::ordered_json& j, int digits = 17);

int cmd_solve(const JobConfig& config, std::ostream& out, std::ostream& err);
int cmd_verify(const JobConfig& config, std::ostream& out, std::ostream& err);
int cmd_constants(int n, double m, CoefficientConvention convention, std::ostream& out,
                  std::ostream& err);
int cmd_sweep(const JobConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qeconf::cli
