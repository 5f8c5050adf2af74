#include "qeconf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "qeconf/closed_form.hpp"
#include "qeconf/error.hpp"

namespace qeconf::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string> kFamilies = {"thm11", "homothetic", "example14", "quad_m1",
                                            "quad_mgt1"};

const std::vector<std::string> kToleranceKeys = {
    "fundamental", "ode", "pde", "hessian_identity", "mu_relative_variance", "scalar_identity"};

std::string format_number(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double constant_or(const JobConfig& c, const std::string& key, double fallback) {
  const auto it = c.constants.find(key);
  return it == c.constants.end() ? fallback : it->second;
}

double require_constant(const JobConfig& c, const std::string& key) {
  const auto it = c.constants.find(key);
  if (it == c.constants.end()) {
    throw UsageError("family " + c.family + " requires constant " + key);
  }
  return it->second;
}

double require_m(const JobConfig& c) {
  if (!c.m) throw UsageError("family " + c.family + " requires --m");
  return *c.m;
}

// m is fixed by the family; a conflicting --m is a usage error.
double forced_m(const JobConfig& c, double value) {
  if (c.m && *c.m != value) {
    throw UsageError("family " + c.family + " fixes m = " + format_number(value, 17));
  }
  return value;
}

ModelParams make_params(const JobConfig& c, double m) {
  Eigen::VectorXd alpha;
  if (c.alpha) {
    alpha = Eigen::Map<const Eigen::VectorXd>(c.alpha->data(),
                                              static_cast<Eigen::Index>(c.alpha->size()));
  } else {
    alpha = Eigen::VectorXd::Unit(c.n, c.n - 1);
  }
  try {
    return ModelParams(c.n, m, 0.0, alpha);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct Window {
  double lo;
  double hi;
};

// Default window: `extent` beyond a boundary, on the side `side` (+1 / -1).
Window one_sided(double edge, double side, double margin, double extent) {
  return side > 0.0 ? Window{edge + margin, edge + extent} : Window{edge - extent, edge - margin};
}

std::vector<double> grid_for(const JobConfig& c, const Profile1D& profile, Window fallback) {
  const double lo = c.xi_grid.min.value_or(fallback.lo);
  const double hi = c.xi_grid.max.value_or(fallback.hi);
  if (!(lo < hi)) throw UsageError("xi-min must be smaller than xi-max");
  return sample_grid(profile, lo, hi, c.xi_grid.count, c.xi_grid.margin);
}

Thm11Constants thm11_constants(const JobConfig& c, const std::string& prefix,
                               const Thm11Constants& base) {
  Thm11Constants k = base;
  k.C1 = constant_or(c, prefix + "C1", base.C1);
  k.C2 = constant_or(c, prefix + "C2", base.C2);
  k.C3 = constant_or(c, prefix + "C3", base.C3);
  k.C4 = constant_or(c, prefix + "C4", base.C4);
  return k;
}

BuiltJob build_thm11(const JobConfig& c) {
  const double m = forced_m(c, thm11_m(c.n));
  Thm11Constants k = thm11_constants(c, "", Thm11Constants{});
  k.branch = constant_or(c, "branch", 1.0) >= 0.0 ? Branch::kPositive : Branch::kNegative;
  ModelParams params = make_params(c, m);
  Profile1D profile = thm11_profile(c.n, k);

  // u_C1..u_C4 override constants in u only, producing a mismatched pair.
  const bool overridden = std::any_of(c.constants.begin(), c.constants.end(),
                                      [](const auto& kv) { return kv.first.rfind("u_", 0) == 0; });
  if (overridden) profile = splice(profile, thm11_profile(c.n, thm11_constants(c, "u_", k)));

  const double side = k.branch == Branch::kPositive ? 1.0 : -1.0;
  // Beyond |xi + C1| = 1 the exponential factors grow like exp(C3 |xi + C1|^(n-1)).
  auto grid = grid_for(c, profile, one_sided(-k.C1, side, c.xi_grid.margin, 1.0));
  return BuiltJob{std::move(params), std::move(profile), std::move(grid)};
}

BuiltJob build_homothetic(const JobConfig& c) {
  const double m = require_m(c);
  const double gamma = constant_or(c, "gamma", 1.0);
  const double a = constant_or(c, "a", 1.0);
  const double b = constant_or(c, "b", 0.0);
  ModelParams params = make_params(c, m);
  Profile1D profile = homothetic_profile(gamma, a, b);
  const double side = a > 0.0 ? 1.0 : -1.0;
  auto grid = grid_for(c, profile, one_sided(-b / a, side, c.xi_grid.margin, 2.0));
  return BuiltJob{std::move(params), std::move(profile), std::move(grid)};
}

BuiltJob build_example14(const JobConfig& c) {
  const double m = forced_m(c, 1.0);
  const double C = constant_or(c, "C", 1.0);
  const double C2 = constant_or(c, "C2", 1.0);
  const double C3 = constant_or(c, "C3", 0.0);
  ModelParams params = make_params(c, m);
  Profile1D profile = example14_profile(c.n, C, C2, C3);
  // Residual terms grow like |C2 xi + C3|^(-8/(n-2)) near the edge, so the
  // default window stays 0.5 away from it.
  const double edge = -C3 / C2;
  auto grid = grid_for(c, profile, one_sided(edge, -1.0, std::max(c.xi_grid.margin, 0.5), 2.5));
  return BuiltJob{std::move(params), std::move(profile), std::move(grid)};
}

BuiltJob build_quadrature(const JobConfig& c, bool m_equals_one) {
  double m = 1.0;
  if (m_equals_one) {
    m = forced_m(c, 1.0);
  } else {
    m = require_m(c);
    if (m == 1.0) throw UsageError("m = 1 belongs to family quad_m1");
  }
  // m < 1 surfaces as Error(kOutOfScope) from constants().
  QuadratureConstants k = constants(c.n, m, c.coefficients);
  k.C = constant_or(c, "C", 1.0);
  k.C1 = m_equals_one ? constant_or(c, "C1", 0.0) : require_constant(c, "C1");
  k.C2 = constant_or(c, "C2", 1.0);
  k.C3 = constant_or(c, "C3", 0.0);
  if (k.C2 == 0.0) throw UsageError("C2 must be nonzero");

  double phi0 = 1.0;
  if (!m_equals_one) {
    // Default anchor where C1 phi^sqrt(b) = 2.
    phi0 = k.C1 > 0.0 ? std::pow(2.0 / k.C1, 1.0 / k.sqrt_b) : 1.0;
  }
  phi0 = constant_or(c, "phi0", phi0);
  // F(phi0) = 0 anchors C2 xi0 + C3 = 0.
  const double xi0 = -k.C3 / k.C2;

  ModelParams params = make_params(c, m);
  if (c.xi_grid.min && c.xi_grid.max) {
    if (!(*c.xi_grid.min < *c.xi_grid.max)) throw UsageError("xi-min must be smaller than xi-max");
    Profile1D profile = invert_profile(k, Interval{*c.xi_grid.min, *c.xi_grid.max}, phi0, xi0);
    auto grid = grid_for(c, profile, Window{*c.xi_grid.min, *c.xi_grid.max});
    return BuiltJob{std::move(params), std::move(profile), std::move(grid)};
  }
  // Default window: xi0 +- 0.25, clipped to the certified image of F and kept
  // `margin` away from its ends.
  InversionOptions options;
  options.allow_partial = true;
  const double want_lo = c.xi_grid.min.value_or(xi0 - 0.25);
  const double want_hi = c.xi_grid.max.value_or(xi0 + 0.25);
  if (!(want_lo < want_hi)) throw UsageError("xi-min must be smaller than xi-max");
  const ImplicitProfile implicit(k, Interval{want_lo, want_hi}, phi0, xi0, options);
  const Interval cert = implicit.certified();
  const double lo = c.xi_grid.min ? want_lo : std::max(want_lo, cert.lo + c.xi_grid.margin);
  const double hi = c.xi_grid.max ? want_hi : std::min(want_hi, cert.hi - c.xi_grid.margin);
  Profile1D profile = implicit.to_profile();
  auto grid = grid_for(c, profile, Window{lo, hi});
  return BuiltJob{std::move(params), std::move(profile), std::move(grid)};
}

bool is_quadrature(const std::string& family) {
  return family == "quad_m1" || family == "quad_mgt1";
}

// Writes to the configured path or to `out`.
template <typename F>
void emit(const JobConfig& c, std::ostream& out, F&& write) {
  if (c.output.path.empty()) {
    write(out);
    return;
  }
  std::ofstream file(c.output.path, std::ios::binary);
  if (!file) throw UsageError("cannot open output file " + c.output.path);
  write(file);
}

void dump_value(const ordered_json& j, int digits, std::string& out) {
  switch (j.type()) {
    case ordered_json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_number(x, digits) : "null";
      break;
    }
    case ordered_json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += ordered_json(key).dump();
        out += ':';
        dump_value(value, digits, out);
      }
      out += '}';
      break;
    }
    case ordered_json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_value(j[i], digits, out);
      }
      out += ']';
      break;
    }
    default:
      out += j.dump();
  }
}

int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::kOutOfScope ? kExitUsage : kExitDomain;
}

ordered_json job_header(const JobConfig& c, const BuiltJob& job) {
  ordered_json h;
  h["family"] = c.family;
  h["n"] = c.n;
  h["m"] = job.params.m();
  h["lambda"] = job.params.lambda();
  h["alpha"] = std::vector<double>(job.params.alpha().data(),
                                   job.params.alpha().data() + job.params.alpha().size());
  if (is_quadrature(c.family)) h["coefficients"] = to_string(c.coefficients);
  return h;
}

// Portable uniform draw in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

double random_sign(std::mt19937_64& rng) { return (rng() >> 63) ? -1.0 : 1.0; }

void draw_constants(JobConfig& c, std::mt19937_64& rng) {
  auto& k = c.constants;
  if (c.family == "thm11") {
    k["C1"] = uniform(rng, -1.0, 1.0);
    k["C2"] = uniform(rng, 0.2, 2.0);
    k["C3"] = uniform(rng, 0.2, 2.0);
    k["C4"] = uniform(rng, 0.2, 2.0);
    k["branch"] = random_sign(rng);
  } else if (c.family == "homothetic") {
    k["gamma"] = random_sign(rng) * uniform(rng, 0.5, 2.0);
    k["a"] = random_sign(rng) * uniform(rng, 0.2, 2.0);
    k["b"] = uniform(rng, -1.0, 1.0);
  } else if (c.family == "example14") {
    k["C"] = uniform(rng, 0.5, 2.0);
    k["C2"] = random_sign(rng) * uniform(rng, 0.5, 2.0);
    k["C3"] = uniform(rng, -1.0, 1.0);
  } else if (c.family == "quad_m1") {
    k["C"] = uniform(rng, 0.5, 2.0);
    k["C1"] = uniform(rng, -1.0, 1.0);
    k["C2"] = uniform(rng, 0.5, 2.0);
  } else if (c.family == "quad_mgt1") {
    k["C"] = uniform(rng, 0.5, 2.0);
    k["C1"] = uniform(rng, 0.5, 2.0);
    k["C2"] = uniform(rng, 0.5, 2.0);
  }
}

std::map<std::string, double> parse_key_values(const std::vector<std::string>& items,
                                               const std::string& flag) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError(flag + " expects KEY=VAL, got '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) {
      // branch accepts the symbols + and -.
      if (key == "branch" && (text == "+" || text == "-")) {
        value = text == "+" ? 1.0 : -1.0;
      } else {
        throw UsageError(flag + " value for " + key + " is not a number: '" + text + "'");
      }
    }
    out[key] = value;
  }
  return out;
}

CoefficientConvention parse_convention(const std::string& s) {
  if (s == "published") return CoefficientConvention::kPublished;
  if (s == "corrected") return CoefficientConvention::kCorrected;
  throw UsageError("coefficients must be 'published' or 'corrected'");
}

void validate(const JobConfig& c) {
  if (std::find(kFamilies.begin(), kFamilies.end(), c.family) == kFamilies.end()) {
    throw UsageError("unknown or missing family '" + c.family + "'");
  }
  if (c.output.format != "csv" && c.output.format != "json") {
    throw UsageError("format must be csv or json");
  }
  if (c.xi_grid.count < 2) throw UsageError("xi-count must be >= 2");
  if (!(c.xi_grid.margin >= 0.0)) throw UsageError("margin must be >= 0");
  for (const auto& [key, value] : c.tolerances) {
    if (std::find(kToleranceKeys.begin(), kToleranceKeys.end(), key) == kToleranceKeys.end()) {
      throw UsageError("unknown tolerance '" + key + "'");
    }
    if (!(value >= 0.0)) throw UsageError("tolerance " + key + " must be >= 0");
  }
}

}  // namespace

JobConfig config_from_json(const nlohmann::json& j) {
  JobConfig c;
  try {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    c.family = j.value("family", std::string());
    c.n = j.value("n", 3);
    if (j.contains("m") && !j.at("m").is_null()) c.m = j.at("m").get<double>();
    if (j.contains("constants")) {
      for (const auto& [key, value] : j.at("constants").items()) {
        if (key == "branch" && value.is_string()) {
          c.constants[key] = value.get<std::string>() == "-" ? -1.0 : 1.0;
        } else {
          c.constants[key] = value.get<double>();
        }
      }
    }
    if (j.contains("xi_grid")) {
      const auto& g = j.at("xi_grid");
      if (g.contains("min") && !g.at("min").is_null()) c.xi_grid.min = g.at("min").get<double>();
      if (g.contains("max") && !g.at("max").is_null()) c.xi_grid.max = g.at("max").get<double>();
      c.xi_grid.count = g.value("count", c.xi_grid.count);
      c.xi_grid.margin = g.value("margin", c.xi_grid.margin);
    }
    if (j.contains("alpha") && !j.at("alpha").is_null()) {
      c.alpha = j.at("alpha").get<std::vector<double>>();
    }
    if (j.contains("tolerances")) {
      c.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    }
    if (j.contains("output")) {
      c.output.format = j.at("output").value("format", c.output.format);
      c.output.path = j.at("output").value("path", c.output.path);
    }
    if (j.contains("coefficients")) {
      c.coefficients = parse_convention(j.at("coefficients").get<std::string>());
    }
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      if (s.contains("n")) c.sweep.n_values = s.at("n").get<std::vector<int>>();
      if (s.contains("m")) c.sweep.m_values = s.at("m").get<std::vector<double>>();
      c.sweep.draws = s.value("draws", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  return c;
}

BuiltJob build_job(const JobConfig& c) {
  validate(c);
  if (c.family == "thm11") return build_thm11(c);
  if (c.family == "homothetic") return build_homothetic(c);
  if (c.family == "example14") return build_example14(c);
  if (c.family == "quad_m1") return build_quadrature(c, true);
  return build_quadrature(c, false);
}

std::map<std::string, double> effective_tolerances(const JobConfig& c) {
  std::map<std::string, double> tol;
  if (is_quadrature(c.family)) {
    tol = {{"fundamental", 1e-6}, {"ode", 1e-6}, {"pde", 1e-6},
           {"hessian_identity", 1e-9}, {"mu_relative_variance", 1e-10},
           {"scalar_identity", 1e-6}};
  } else {
    tol = {{"fundamental", 1e-9}, {"ode", 1e-9}, {"pde", 1e-9},
           {"hessian_identity", 1e-12}, {"mu_relative_variance", 1e-10},
           {"scalar_identity", 1e-9}};
  }
  for (const auto& [key, value] : c.tolerances) tol[key] = value;
  return tol;
}

std::vector<std::string> failed_checks(const ResidualReport& r,
                                       const std::map<std::string, double>& tol) {
  std::vector<std::string> failed;
  auto check = [&](const std::string& key, double value) {
    // NaN never passes.
    if (!(value <= tol.at(key))) failed.push_back(key);
  };
  check("fundamental", r.fundamental_max);
  check("ode", std::max(r.ode_max.first, r.ode_max.second));
  check("pde", std::max(r.pde_max.first, r.pde_max.second));
  check("hessian_identity", r.hessian_identity_max);
  check("mu_relative_variance", r.mu_relative_variance());
  check("scalar_identity", r.scalar_identity_max);
  return failed;
}

nlohmann::ordered_json report_to_json(const ResidualReport& r) {
  ordered_json j;
  j["samples"] = r.samples;
  j["fundamental_max"] = r.fundamental_max;
  j["ode_max"] = {r.ode_max.first, r.ode_max.second};
  j["pde_max"] = {r.pde_max.first, r.pde_max.second};
  j["hessian_identity_max"] = r.hessian_identity_max;
  j["mu_mean"] = r.mu_mean;
  j["mu_var"] = r.mu_var;
  j["mu_relative_variance"] = r.mu_relative_variance();
  j["scalar_identity_max"] = r.scalar_identity_max;
  return j;
}

std::string dump_json(const nlohmann::ordered_json& j, int digits) {
  std::string out;
  dump_value(j, digits, out);
  return out;
}

int cmd_solve(const JobConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const BuiltJob job = build_job(config);
    const std::vector<std::string> columns = {"xi", "phi", "dphi", "d2phi", "u",
                                              "du", "d2u", "f",   "mu"};
    std::vector<std::vector<double>> rows;
    rows.reserve(job.grid.size());
    for (double xi : job.grid) {
      const ProfilePoint p = job.profile.at(xi);
      rows.push_back({xi, p.phi.value, p.phi.d1, p.phi.d2, p.u.value, p.u.d1, p.u.d2,
                      potential_of(job.params, p).value, mu_at(job.params, p)});
    }
    emit(config, out, [&](std::ostream& os) {
      if (config.output.format == "csv") {
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& row : rows) {
          for (std::size_t i = 0; i < row.size(); ++i) {
            os << (i ? "," : "") << format_number(row[i], 17);
          }
          os << '\n';
        }
      } else {
        ordered_json j = job_header(config, job);
        j["columns"] = columns;
        j["rows"] = rows;
        os << dump_json(j) << '\n';
      }
    });
    return kExitPass;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_verify(const JobConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const BuiltJob job = build_job(config);
    const ResidualReport report = verify_profile(job.params, job.profile, job.grid);
    const auto tol = effective_tolerances(config);
    const auto failed = failed_checks(report, tol);

    ordered_json j = job_header(config, job);
    const ordered_json body = report_to_json(report);
    for (const auto& [key, value] : body.items()) j[key] = value;
    j["tolerances"] = tol;
    j["failed"] = failed;
    j["pass"] = failed.empty();
    emit(config, out, [&](std::ostream& os) { os << dump_json(j) << '\n'; });
    return failed.empty() ? kExitPass : kExitResidualFailure;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_constants(int n, double m, CoefficientConvention convention, std::ostream& out,
                  std::ostream& err) {
  try {
    const QuadratureConstants k = constants(n, m, convention);
    ordered_json j;
    j["n"] = n;
    j["m"] = m;
    j["coefficients"] = to_string(convention);
    j["P"] = k.P;
    j["Q"] = k.Q;
    j["R"] = k.R;
    j["a"] = k.a ? ordered_json(*k.a) : ordered_json(nullptr);
    j["b"] = k.b;
    j["a1"] = k.a1 ? ordered_json(*k.a1) : ordered_json(nullptr);
    j["a2"] = k.a2 ? ordered_json(*k.a2) : ordered_json(nullptr);
    out << dump_json(j, 15) << '\n';
    return kExitPass;
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << '\n';
    return kExitUsage;
  }
}

int cmd_sweep(const JobConfig& config, std::ostream& out, std::ostream& err) {
  try {
    validate(config);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Each point is an independent job with its own generator, so results do
  // not depend on evaluation order.
  struct Point {
    int n;
    std::optional<double> m;
    int draw;
  };
  std::vector<Point> points;
  const std::vector<int> ns = config.sweep.n_values;
  std::vector<std::optional<double>> ms;
  if (config.sweep.m_values.empty()) {
    ms.push_back(config.m);
  } else {
    for (double m : config.sweep.m_values) ms.emplace_back(m);
  }
  const int draws = std::max(1, config.sweep.draws);
  for (int n : ns) {
    for (const auto& m : ms) {
      for (int d = 0; d < draws; ++d) points.push_back({n, m, d});
    }
  }

  ordered_json results = ordered_json::array();
  int passed = 0;
  int failed = 0;
  int errors = 0;
  ResidualReport worst;
  for (std::size_t index = 0; index < points.size(); ++index) {
    const Point& pt = points[index];
    JobConfig job_config = config;
    job_config.n = pt.n;
    job_config.m = pt.m;
    if (config.sweep.draws > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                        static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(index)};
      std::mt19937_64 rng(seq);
      draw_constants(job_config, rng);
    }

    ordered_json entry;
    entry["index"] = index;
    entry["n"] = pt.n;
    entry["m"] = pt.m ? ordered_json(*pt.m) : ordered_json(nullptr);
    entry["constants"] = job_config.constants;
    try {
      const BuiltJob job = build_job(job_config);
      const ResidualReport report = verify_profile(job.params, job.profile, job.grid);
      const auto fails = failed_checks(report, effective_tolerances(job_config));
      entry["m"] = job.params.m();
      entry["status"] = fails.empty() ? "pass" : "fail";
      entry["failed"] = fails;
      entry["report"] = report_to_json(report);
      (fails.empty() ? passed : failed) += 1;
      worst.fundamental_max = std::max(worst.fundamental_max, report.fundamental_max);
      worst.ode_max.first = std::max(worst.ode_max.first, report.ode_max.first);
      worst.ode_max.second = std::max(worst.ode_max.second, report.ode_max.second);
      worst.pde_max.first = std::max(worst.pde_max.first, report.pde_max.first);
      worst.pde_max.second = std::max(worst.pde_max.second, report.pde_max.second);
      worst.hessian_identity_max =
          std::max(worst.hessian_identity_max, report.hessian_identity_max);
      worst.scalar_identity_max = std::max(worst.scalar_identity_max, report.scalar_identity_max);
    } catch (const UsageError& e) {
      entry["status"] = "error";
      entry["error"] = std::string("usage: ") + e.what();
      ++errors;
    } catch (const Error& e) {
      entry["status"] = "error";
      entry["error"] = std::string(to_string(e.kind())) + ": " + e.what();
      ++errors;
    }
    results.push_back(std::move(entry));
  }

  ordered_json j;
  j["family"] = config.family;
  j["seed"] = config.seed;
  j["draws"] = config.sweep.draws;
  j["points"] = points.size();
  j["passed"] = passed;
  j["failed"] = failed;
  j["errors"] = errors;
  ordered_json w;
  w["fundamental_max"] = worst.fundamental_max;
  w["ode_max"] = {worst.ode_max.first, worst.ode_max.second};
  w["pde_max"] = {worst.pde_max.first, worst.pde_max.second};
  w["hessian_identity_max"] = worst.hessian_identity_max;
  w["scalar_identity_max"] = worst.scalar_identity_max;
  j["worst"] = w;
  j["results"] = results;
  try {
    emit(config, out, [&](std::ostream& os) { os << dump_json(j) << '\n'; });
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  return failed == 0 ? kExitPass : kExitResidualFailure;
}

namespace {

struct RawOptions {
  std::string config_path;
  std::string family;
  std::optional<int> n;
  std::optional<double> m;
  std::vector<std::string> constants;
  std::optional<double> xi_min;
  std::optional<double> xi_max;
  std::optional<int> xi_count;
  std::optional<double> margin;
  std::vector<double> alpha;
  std::vector<std::string> tolerances;
  std::string format;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::string coefficients;
  std::vector<int> n_list;
  std::vector<double> m_list;
  bool n_list_given = false;
  std::optional<int> draws;
};

void add_job_options(CLI::App* cmd, RawOptions& o) {
  cmd->add_option("--config", o.config_path, "JobConfig JSON file");
  cmd->add_option("--family", o.family, "thm11|homothetic|example14|quad_m1|quad_mgt1");
  cmd->add_option("--n", o.n, "dimension (>= 3)");
  cmd->add_option("--m", o.m, "quasi-Einstein parameter");
  cmd->add_option("--const", o.constants, "KEY=VAL, repeatable");
  cmd->add_option("--xi-min", o.xi_min);
  cmd->add_option("--xi-max", o.xi_max);
  cmd->add_option("--xi-count", o.xi_count);
  cmd->add_option("--margin", o.margin, "exclusion margin around singular loci");
  cmd->add_option("--alpha", o.alpha, "unit direction v1,...,vn")->delimiter(',');
  cmd->add_option("--tol", o.tolerances, "KEY=VAL, repeatable");
  cmd->add_option("--format", o.format, "csv|json");
  cmd->add_option("--out", o.out_path, "output path (default: stdout)");
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--coefficients", o.coefficients, "published|corrected");
}

JobConfig assemble_config(const RawOptions& o) {
  JobConfig c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw UsageError("cannot read config file " + o.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    c = config_from_json(j);
  }
  if (!o.family.empty()) c.family = o.family;
  if (o.n) c.n = *o.n;
  if (o.m) c.m = *o.m;
  for (const auto& [k, v] : parse_key_values(o.constants, "--const")) c.constants[k] = v;
  if (o.xi_min) c.xi_grid.min = *o.xi_min;
  if (o.xi_max) c.xi_grid.max = *o.xi_max;
  if (o.xi_count) c.xi_grid.count = *o.xi_count;
  if (o.margin) c.xi_grid.margin = *o.margin;
  if (!o.alpha.empty()) c.alpha = o.alpha;
  for (const auto& [k, v] : parse_key_values(o.tolerances, "--tol")) c.tolerances[k] = v;
  if (!o.format.empty()) c.output.format = o.format;
  if (!o.out_path.empty()) c.output.path = o.out_path;
  if (o.seed) c.seed = *o.seed;
  if (!o.coefficients.empty()) c.coefficients = parse_convention(o.coefficients);
  if (o.n_list_given) c.sweep.n_values = o.n_list;
  if (!o.m_list.empty()) c.sweep.m_values = o.m_list;
  if (o.draws) c.sweep.draws = *o.draws;
  return c;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Translation-invariant quasi-Einstein metrics conformal to Euclidean space"};
  app.require_subcommand(1);

  RawOptions opts;
  auto* solve = app.add_subcommand("solve", "tabulate a profile on its xi grid");
  auto* verify = app.add_subcommand("verify", "residual report; exit 1 on tolerance failure");
  auto* sweep = app.add_subcommand("sweep", "verify over a parameter grid");
  auto* consts = app.add_subcommand("constants", "dump P, Q, R, a, b, a1, a2");
  for (auto* cmd : {solve, verify, sweep}) add_job_options(cmd, opts);

  std::string n_list_text;
  sweep->add_option("--n-list", n_list_text, "comma separated dimensions (may be empty)");
  sweep->add_option("--m-list", opts.m_list, "comma separated m values")->delimiter(',');
  sweep->add_option("--draws", opts.draws, "random constant draws per grid point");

  int const_n = 3;
  double const_m = 1.0;
  std::string const_coefficients = "published";
  consts->add_option("--n", const_n)->required();
  consts->add_option("--m", const_m)->required();
  consts->add_option("--coefficients", const_coefficients, "published|corrected");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("qeconf");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (consts->parsed()) {
      return cmd_constants(const_n, const_m, parse_convention(const_coefficients), out, err);
    }
    if (sweep->parsed() && sweep->count("--n-list") > 0) {
      opts.n_list_given = true;
      std::stringstream ss(n_list_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
          opts.n_list.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw UsageError("--n-list entries must be integers");
        }
      }
    }
    const JobConfig config = assemble_config(opts);
    if (solve->parsed()) return cmd_solve(config, out, err);
    if (verify->parsed()) return cmd_verify(config, out, err);
    JobConfig sweep_config = config;
    if (sweep_config.sweep.n_values.empty() && !opts.n_list_given) {
      sweep_config.sweep.n_values = {config.n};
    }
    return cmd_sweep(sweep_config, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace qeconf::cli
