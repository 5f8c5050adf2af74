#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "qeconf/cli.hpp"

using namespace qeconf::cli;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden(const std::string& name) {
  return read_file(std::string(QECONF_GOLDEN_DIR) + "/" + name);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

bool close(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

// Same keys in the same order, same array shapes, numbers within 1e-12.
void check_same_shape(const json& got, const json& want, const std::string& where = "$") {
  INFO("at " << where);
  if (want.is_number() && got.is_number()) {
    CHECK(close(got.get<double>(), want.get<double>()));
    return;
  }
  REQUIRE(got.type() == want.type());
  if (want.is_object()) {
    std::vector<std::string> gk, wk;
    for (const auto& [k, v] : got.items()) gk.push_back(k);
    for (const auto& [k, v] : want.items()) wk.push_back(k);
    REQUIRE(gk == wk);
    for (const auto& k : wk) check_same_shape(got[k], want[k], where + "." + k);
  } else if (want.is_array()) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      check_same_shape(got[i], want[i], where + "[" + std::to_string(i) + "]");
    }
  } else {
    CHECK(got == want);
  }
}

// Residual fields are round-off noise; only their size matters.
bool is_residual(const std::string& key) {
  return key.find("_max") != std::string::npos || key == "mu_var" ||
         key == "mu_relative_variance";
}

json strip_residuals(json j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto& [k, v] : j.items()) {
      out[k] = is_residual(k) ? json(0) : strip_residuals(v);
    }
    return out;
  }
  return j;
}

}  // namespace

TEST_CASE("solve writes the documented CSV") {
  const auto r = run_cli({"solve", "--family", "thm11", "--n", "3"});
  REQUIRE(r.code == 0);
  const auto lines = split(r.out, '\n');
  REQUIRE(lines.size() == 51);
  CHECK(lines[0] == "xi,phi,dphi,d2phi,u,du,d2u,f,mu");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    REQUIRE(cells.size() == 9);
    const double u = std::stod(cells[4]);
    const double f = std::stod(cells[7]);
    // m = 2 - n = -1, so f = -m ln u = ln u
    CHECK(close(f, std::log(u)));
    CHECK(close(std::stod(cells[8]), -2.0));
  }
}

TEST_CASE("solve output matches the golden CSV") {
  const auto r = run_cli({"solve", "--family", "thm11", "--n", "3", "--xi-count", "8"});
  REQUIRE(r.code == 0);
  const auto got = split(r.out, '\n');
  const auto want = split(golden("thm11_n3.csv"), '\n');
  REQUIRE(got.size() == want.size());
  CHECK(got[0] == want[0]);
  for (std::size_t i = 1; i < want.size(); ++i) {
    const auto g = split(got[i], ',');
    const auto w = split(want[i], ',');
    REQUIRE(g.size() == w.size());
    for (std::size_t c = 0; c < w.size(); ++c) CHECK(close(std::stod(g[c]), std::stod(w[c])));
  }
  // Byte-stable from run to run.
  CHECK(run_cli({"solve", "--family", "thm11", "--n", "3", "--xi-count", "8"}).out == r.out);
}

TEST_CASE("JSON outputs match their golden files") {
  SUBCASE("solve, JSON table") {
    const auto r = run_cli({"solve", "--family", "example14", "--n", "4", "--const", "C=1",
                            "--const", "C2=1", "--const", "C3=0", "--xi-count", "5", "--format",
                            "json"});
    REQUIRE(r.code == 0);
    check_same_shape(json::parse(r.out), json::parse(golden("example14_n4.json")));
  }
  SUBCASE("verify") {
    const auto r = run_cli({"verify", "--family", "homothetic", "--m", "3", "--format", "json"});
    REQUIRE(r.code == 0);
    const json got = json::parse(r.out);
    check_same_shape(strip_residuals(got), strip_residuals(json::parse(golden("homothetic_m3_verify.json"))));
    CHECK(std::abs(got["mu_mean"].get<double>() - 2.0) < 1e-10);
  }
  SUBCASE("constants") {
    const auto r = run_cli({"constants", "--n", "4", "--m", "5"});
    REQUIRE(r.code == 0);
    CHECK(r.out == golden("constants_n4_m5.json"));
  }
}

TEST_CASE("verify exit codes") {
  SUBCASE("closed-form family passes") {
    const auto r = run_cli({"verify", "--family", "thm11", "--n", "3"});
    CHECK(r.code == kExitPass);
    const json j = json::parse(r.out);
    CHECK(j["fundamental_max"].get<double>() < 1e-9);
    CHECK(j["pass"] == true);
  }
  SUBCASE("perturbed u constant fails") {
    const auto r = run_cli({"verify", "--family", "thm11", "--n", "3", "--const", "u_C3=1.1"});
    CHECK(r.code == kExitResidualFailure);
    const json j = json::parse(r.out);
    CHECK(j["fundamental_max"].get<double>() > 1e-3);
    CHECK(j["pass"] == false);
    CHECK_FALSE(j["failed"].empty());
  }
  SUBCASE("tolerance override decides the exit code") {
    CHECK(run_cli({"verify", "--family", "thm11", "--n", "3", "--tol", "fundamental=1e-30"}).code ==
          kExitResidualFailure);
    CHECK(run_cli({"verify", "--family", "thm11", "--n", "3", "--const", "u_C3=1.1", "--tol",
                   "fundamental=10", "--tol", "ode=10", "--tol", "pde=10", "--tol",
                   "hessian_identity=10", "--tol", "scalar_identity=10", "--tol",
                   "mu_relative_variance=10"})
              .code == kExitPass);
  }
  SUBCASE("homothetic mu") {
    for (const char* m : {"-2", "0.5", "3"}) {
      const auto r = run_cli({"verify", "--family", "homothetic", "--m", m});
      CHECK(r.code == kExitPass);
      CHECK(std::abs(json::parse(r.out)["mu_mean"].get<double>() - (std::stod(m) - 1.0)) < 1e-10);
    }
  }
  SUBCASE("m = 1 quadrature family") {
    for (const char* n : {"3", "4", "5", "6"}) {
      for (const char* c1 : {"0", "1", "-1"}) {
        const auto r = run_cli({"verify", "--family", "quad_m1", "--n", n, "--const",
                                std::string("C1=") + c1});
        CHECK(r.code == kExitPass);
      }
    }
  }
}

TEST_CASE("usage and domain errors") {
  CHECK(run_cli({"solve", "--family", "quad_mgt1", "--m", "2"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "nope"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "thm11", "--xi-count", "1"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "thm11", "--margin", "-1"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "thm11", "--format", "xml"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "thm11", "--const", "C1"}).code == kExitUsage);
  CHECK(run_cli({"solve", "--family", "thm11", "--m", "4"}).code == kExitUsage);
  CHECK(run_cli({"frobnicate"}).code == kExitUsage);
  CHECK(run_cli({"constants", "--n", "3", "--m", "0.5"}).code == kExitUsage);

  const auto r = run_cli({"solve", "--family", "homothetic", "--m", "2", "--const", "a=1",
                          "--const", "b=0", "--xi-min", "-2", "--xi-max", "2"});
  CHECK(r.code == kExitDomain);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("constants") {
  const json m1 = json::parse(run_cli({"constants", "--n", "3", "--m", "1"}).out);
  CHECK(m1["P"] == 5);
  CHECK(m1["Q"] == 6);
  CHECK(m1["R"] == 2);
  CHECK(m1["a1"].is_null());
  CHECK(json::parse(run_cli({"constants", "--n", "3", "--m", "2"}).out)["b"] == 24);
  const json c = json::parse(run_cli({"constants", "--n", "4", "--m", "5"}).out);
  CHECK(c["b"] == 100);
  const json corr = json::parse(
      run_cli({"constants", "--n", "3", "--m", "2", "--coefficients", "corrected"}).out);
  CHECK(corr["coefficients"] == "corrected");
  CHECK(corr["P"] == 3);
}

TEST_CASE("sweep") {
  SUBCASE("family draws all pass") {
    const auto r = run_cli({"sweep", "--family", "thm11", "--n-list", "3,4,5", "--draws", "10",
                            "--seed", "11"});
    CHECK(r.code == kExitPass);
    const json j = json::parse(r.out);
    CHECK(j["seed"] == 11);
    CHECK(j["points"] == 30);
    CHECK(j["passed"] == 30);
    CHECK(j["results"].size() == 30);
    // Same seed, same bytes.
    CHECK(run_cli({"sweep", "--family", "thm11", "--n-list", "3,4,5", "--draws", "10", "--seed",
                   "11"})
              .out == r.out);
  }
  SUBCASE("points do not depend on their neighbours") {
    const json a = json::parse(
        run_cli({"sweep", "--family", "thm11", "--n-list", "3,4", "--draws", "3", "--seed", "5"})
            .out);
    const json b = json::parse(
        run_cli({"sweep", "--family", "thm11", "--n-list", "3", "--draws", "3", "--seed", "5"})
            .out);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a["results"][i]["constants"] == b["results"][i]["constants"]);
    }
  }
  SUBCASE("empty grid") {
    const auto r = run_cli({"sweep", "--family", "thm11", "--n-list", "", "--draws", "4"});
    CHECK(r.code == kExitPass);
    const json j = json::parse(r.out);
    CHECK(j["points"] == 0);
    CHECK(j["results"].empty());
  }
  SUBCASE("out-of-scope point is recorded, others pass") {
    const auto r = run_cli({"sweep", "--family", "quad_mgt1", "--n-list", "3", "--m-list",
                            "0.5,2", "--draws", "1", "--coefficients", "corrected"});
    const json j = json::parse(r.out);
    REQUIRE(j["results"].size() == 2);
    int errors = 0, passes = 0;
    for (const auto& p : j["results"]) {
      if (p["status"] == "error") {
        ++errors;
        CHECK(p["m"] == 0.5);
      }
      if (p["status"] == "pass") ++passes;
    }
    CHECK(errors == 1);
    CHECK(passes == 1);
    CHECK(r.code == kExitPass);
  }
}

TEST_CASE("JSON config file") {
  const std::string path = "qeconf_test_config.json";
  {
    std::ofstream f(path);
    f << R"({"family":"thm11","n":4,"constants":{"C1":0.3,"C2":1.5,"C3":0.7,"C4":0.9,"branch":1},
            "xi_grid":{"min":null,"max":null,"count":12,"margin":0.1},"alpha":[0,0.6,0,0.8],
            "tolerances":{"fundamental":1e-8},"output":{"format":"json"}})";
  }
  const auto r = run_cli({"verify", "--config", path});
  CHECK(r.code == kExitPass);
  const json j = json::parse(r.out);
  CHECK(j["n"] == 4);
  CHECK(j["samples"] == 12);
  CHECK(j["alpha"][1] == 0.6);
  CHECK(j["tolerances"]["fundamental"] == 1e-8);
  CHECK(std::abs(j["mu_mean"].get<double>() + 3.0 * 1.5 * 1.5 * 0.9 * 0.9) < 1e-9);

  CHECK_THROWS_AS(config_from_json(json::parse(R"({"family":"thm11","n":"three"})")), UsageError);
  CHECK_THROWS_AS(config_from_json(json::parse("[1, 2]")), UsageError);
  {
    std::ofstream f(path);
    f << R"({"family":"thm11","xi_grid":{"count":1}})";
  }
  CHECK(run_cli({"verify", "--config", path}).code == kExitUsage);
  // Flags override the file.
  CHECK(run_cli({"verify", "--config", path, "--xi-count", "5"}).code == kExitPass);
  std::remove(path.c_str());
  CHECK(run_cli({"verify", "--config", "/nonexistent/qeconf.json"}).code == kExitUsage);
  const auto cfg = config_from_json(json::parse(R"({"family":"quad_mgt1","m":2,"constants":{"C1":1}})"));
  CHECK(cfg.family == "quad_mgt1");
  REQUIRE(cfg.m.has_value());
  CHECK(*cfg.m == 2.0);
  CHECK(cfg.constants.at("C1") == 1.0);
}

TEST_CASE("JSON numbers round-trip") {
  nlohmann::ordered_json j;
  j["x"] = 0.1;
  j["y"] = 1.0 / 3.0;
  j["z"] = std::nan("");
  const std::string s = dump_json(j);
  const json back = json::parse(s);
  CHECK(back["x"].get<double>() == 0.1);
  CHECK(back["y"].get<double>() == 1.0 / 3.0);
  CHECK(back["z"].is_null());
}

TEST_CASE("quadrature family for m > 1 writes the certified range") {
  const auto r = run_cli({"solve", "--family", "quad_mgt1", "--m", "2", "--const", "C1=1",
                          "--coefficients", "corrected", "--format", "json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["rows"].size() == 50);
  const auto v = run_cli({"verify", "--family", "quad_mgt1", "--m", "2", "--const", "C1=1",
                          "--coefficients", "corrected"});
  CHECK(v.code == kExitPass);
}
