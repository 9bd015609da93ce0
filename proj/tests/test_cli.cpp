#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "csck/run.hpp"

using namespace csck;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("csck_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Run lab(const std::string& mode, const std::string& config_text, const fs::path& dir, const std::string& extra = "") {
  fs::path cfg = dir / "run.ini";
  std::ofstream(cfg) << config_text;
  const std::string cmd = std::string(CSCK_LAB_PATH) + " " + mode + " --config " + cfg.string() + " --out " +
                          (dir / "out").string() + " " + extra + " 2> " + (dir / "stderr.txt").string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return {WEXITSTATUS(status), slurp(dir / "stderr.txt")};
}

const char* flat_zero = "[lattice]\nn = 2\nN = 8\n[checks]\nphi = zero\n";

TEST(Config, ParsesSectionsAndDefaults) {
  std::istringstream is(
      "# comment\n[lattice]\nn = 1\nN = 32\nseed = 9\n[background]\nmode = 1 0 0.02 0.01 ; trailing\namplitude = 0.01\n"
      "[solver]\ntol_residual = 1e-9\ncontinuation_steps = 2\n[checks]\nphi = random\ntwist_correction = false\n"
      "identities = gradF, bochner\nw2p_p = 1, 3\n");
  RunConfig c = parse_config(is);
  EXPECT_EQ(c.n, 1);
  EXPECT_EQ(c.N, 32);
  EXPECT_EQ(c.seed, 9u);
  ASSERT_EQ(c.modes.size(), 1u);
  EXPECT_EQ(c.modes[0].m, (std::vector<int>{1, 0}));
  EXPECT_DOUBLE_EQ(c.modes[0].a_cos, 0.02);
  EXPECT_DOUBLE_EQ(c.modes[0].a_sin, 0.01);
  EXPECT_DOUBLE_EQ(c.solver.tol_residual, 1e-9);
  EXPECT_EQ(c.solver.continuation_steps, 2);
  EXPECT_EQ(c.phi, PhiSource::random);
  EXPECT_FALSE(c.estimates.twist_correction);
  EXPECT_EQ(c.identities, (std::vector<std::string>{"gradF", "bochner"}));
  EXPECT_EQ(c.w2p_p, (std::vector<double>{1.0, 3.0}));
  EXPECT_EQ(c.solver.max_iters, SolverConfig{}.max_iters);
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    std::istringstream is(text);
    try {
      parse_config(is);
    } catch (const ConfigError& e) {
      return e.line;
    }
    return -1;
  };
  EXPECT_EQ(line_of("[lattice]\nn = 2\nbogus = 1\n"), 3);
  EXPECT_EQ(line_of("[lattice]\n\nN = 12\n"), 3);
  EXPECT_EQ(line_of("[nowhere]\n"), 1);
  EXPECT_EQ(line_of("[lattice]\nn 2\n"), 2);
  EXPECT_EQ(line_of("n = 2\n"), 1);
  EXPECT_EQ(line_of("[solver]\ndamping = 2\n"), 2);
  EXPECT_EQ(line_of("[checks]\nphi = file:/does/not/exist.csv\n"), 2);
  EXPECT_EQ(line_of("[checks]\nidentities = gradF,nope\n"), 2);
  EXPECT_EQ(line_of("[checks]\nslack_c = abc\n"), 2);
  EXPECT_EQ(line_of("[lattice]\nn = 2\n[background]\nmode = 1 0 0.1 0.1\n"), 0);
}

TEST(Json, FixedPrecisionAndNull) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2.0");
  EXPECT_EQ(format_double(1e-7), "9.9999999999999995e-08");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "null");
  std::ostringstream os;
  write_json(os, Json{{"a", num(std::nan(""))}, {"b", Json::array({1, 2})}, {"c", "x\"y"}});
  EXPECT_EQ(os.str(), "{\n  \"a\": null,\n  \"b\": [1, 2],\n  \"c\": \"x\\\"y\"\n}\n");
  auto back = Json::parse(os.str());
  EXPECT_TRUE(back["a"].is_null());
}

TEST(Cli, VerifyFlatZeroPasses) {
  auto d = scratch("flat");
  auto r = lab("verify", flat_zero, d);
  EXPECT_EQ(r.code, 0) << r.err;
  auto rep = Json::parse(slurp(d / "out" / "report.json"));
  EXPECT_EQ(rep["schema"], 1);
  EXPECT_EQ(rep["mode"], "verify");
  EXPECT_TRUE(rep["pass"].get<bool>());
  ASSERT_GE(rep["checks"].size(), 10u);
  for (const auto& c : rep["checks"]) {
    EXPECT_TRUE(c["pass"].get<bool>()) << c["name"];
    EXPECT_EQ(c["anchor"], anchor_for(c["name"])) << c["name"];
    EXPECT_FALSE(c["anchor"].get<std::string>().empty());
  }
  EXPECT_EQ(rep["summary"]["entropy"], 0.0);
  std::istringstream fields(slurp(d / "out" / "fields.csv"));
  std::string l1, l2, l3;
  std::getline(fields, l1);
  std::getline(fields, l2);
  std::getline(fields, l3);
  EXPECT_EQ(l1, "n,N,domain");
  EXPECT_EQ(l2, "2,8,torus");
  EXPECT_EQ(l3, "phi,F,twist,rho0");
  EXPECT_EQ(slurp(d / "out" / "residual_history.csv"), "iteration,residual_ma,residual_scal\n");
}

TEST(Cli, SolveCurvedReportsResidualsAndRecovery) {
  auto d = scratch("solve");
  auto r = lab("solve", "[lattice]\nn = 2\nN = 32\nseed = 4\n[background]\namplitude = 0.04\ncurvature_bounds = false\n", d);
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = Json::parse(slurp(d / "out" / "report.json"));
  const auto& s = rep["solver"];
  EXPECT_TRUE(s["converged"].get<bool>());
  EXPECT_LE(s["residual_ma"].get<double>(), 1e-10);
  EXPECT_LE(s["residual_scal"].get<double>(), 1e-10);
  EXPECT_LE(s["flat_recovery_error"].get<double>(), 1e-6);
  bool saw = false;
  for (const auto& c : rep["checks"])
    if (c["name"] == "flat_recovery") saw = true;
  EXPECT_TRUE(saw);
  std::istringstream hist(slurp(d / "out" / "residual_history.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(hist, line)) ++rows;
  EXPECT_EQ(rows, s["iterations"].get<int>() + 1);
}

TEST(Cli, MalformedKeyExitsTwoWithLine) {
  auto d = scratch("malformed");
  auto r = lab("verify", "[lattice]\nn = 2\nN = 8\n[checks]\nphi_amplitud = 0.1\n", d);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 5"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("phi_amplitud"), std::string::npos) << r.err;
  EXPECT_EQ(lab("nosuchmode", flat_zero, d).code, 2);
  EXPECT_EQ(lab("verify", flat_zero, d, "--seed -3").code, 2);
  // a background that fails the positivity pre-check
  EXPECT_EQ(lab("verify", "[lattice]\nn = 1\nN = 16\n[background]\nmode = 1 0 1.0 0.0\n", d).code, 2);
  // a non-solution with twist correction off
  auto ns = lab("verify", "[lattice]\nn = 1\nN = 16\n[checks]\nphi = random\ntwist_correction = false\n", d);
  EXPECT_EQ(ns.code, 2);
}

TEST(Cli, FailedCheckExitsOneAndNamesSite) {
  auto d = scratch("fail");
  auto r = lab("verify", "[lattice]\nn = 2\nN = 8\n[checks]\nphi = random\nl1_tol = 1e-300\n", d);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FAIL l1_gradF [Sec4.L1] at"), std::string::npos) << r.err;
  auto rep = Json::parse(slurp(d / "out" / "report.json"));
  EXPECT_FALSE(rep["pass"].get<bool>());
}

TEST(Cli, PhiFileRoundTrip) {
  auto d = scratch("file");
  const std::string base = "[lattice]\nn = 2\nN = 8\nseed = 3\n[background]\namplitude = 0.02\n";
  ASSERT_EQ(lab("verify", base + "[checks]\nphi = random\n", d).code, 0);
  fs::copy_file(d / "out" / "fields.csv", d / "phi.csv");
  auto first = Json::parse(slurp(d / "out" / "report.json"));
  ASSERT_EQ(lab("verify", base + "[checks]\nphi = file:phi.csv\n", d).code, 0);
  auto second = Json::parse(slurp(d / "out" / "report.json"));
  EXPECT_EQ(first["summary"], second["summary"]);
}

TEST(Cli, IdentitiesAndLocalModes) {
  auto d = scratch("modes");
  auto r = lab("identities",
               "[lattice]\nn = 1\nN = 16\n[background]\namplitude = 0.03\n[checks]\nphi = random\n", d);
  EXPECT_EQ(r.code, 0) << r.err;
  auto rep = Json::parse(slurp(d / "out" / "report.json"));
  EXPECT_EQ(rep["checks"].size(), identity_names().size());
  auto l = lab("local", "[checks]\nlocal_h = 0.03125\nlocal_seeds = 2\n", d);
  EXPECT_EQ(l.code, 0) << l.err;
  auto lrep = Json::parse(slurp(d / "out" / "report.json"));
  EXPECT_EQ(lrep["checks"].size(), 3u);
  for (const auto& c : lrep["checks"]) EXPECT_EQ(c["anchor"], "Lemma.abp");
}

TEST(Cli, DeterministicReports) {
  auto a = scratch("det_a"), b = scratch("det_b");
  const std::string cfg = "[lattice]\nn = 2\nN = 16\n[background]\namplitude = 0.03\n[checks]\nphi = random\n";
  ASSERT_EQ(lab("report", cfg, a, "--seed 12").code, 0);
  ASSERT_EQ(lab("report", cfg, b, "--seed 12").code, 0);
  EXPECT_EQ(slurp(a / "out" / "report.json"), slurp(b / "out" / "report.json"));
  EXPECT_EQ(slurp(a / "out" / "fields.csv"), slurp(b / "out" / "fields.csv"));
  ASSERT_EQ(lab("report", cfg, b, "--seed 13").code, 0);
  EXPECT_NE(slurp(a / "out" / "report.json"), slurp(b / "out" / "report.json"));
}

}  // namespace
