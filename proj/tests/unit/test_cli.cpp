#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpscat/cli.hpp"

using namespace lpscat;
using nlohmann::json;

namespace {

std::string tmpdir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("lpscat_cli_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const json& raw) {
  try {
    cli::validate_config(raw);
  } catch (const ParameterError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Cli, Sha256KnownVector) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, MissingLambdaIsNamed) {
  const auto m = error_of({{"command", "norm"}, {"space", "y_star"}});
  EXPECT_NE(m.find("lambda: missing"), std::string::npos) << m;
  EXPECT_NE(m.find("field: missing"), std::string::npos) << m;
  EXPECT_NE(m.find("2 errors"), std::string::npos) << m;
}

TEST(Cli, ErrorsAreAggregated) {
  const auto m = error_of({{"command", "direct-solve"},
                           {"grid", {{"N", 31}}},
                           {"threads", 0},
                           {"basis", "haar"},
                           {"bogus", 1}});
  EXPECT_NE(m.find("grid: make_grid: N must be even"), std::string::npos) << m;
  EXPECT_NE(m.find("threads"), std::string::npos);
  EXPECT_NE(m.find("basis"), std::string::npos);
  EXPECT_NE(m.find("bogus: unknown key"), std::string::npos);
  EXPECT_NE(m.find("lambda: missing"), std::string::npos);
}

TEST(Cli, MarginViolation) {
  const auto m = error_of({{"command", "direct-solve"}, {"lambda", 4.0}, {"R0", 1.5}, {"grid", {{"L", 4.0}}}});
  EXPECT_NE(m.find("R0: margin violation"), std::string::npos) << m;
}

TEST(Cli, DefaultsAreEchoed) {
  const auto rc = cli::validate_config({{"command", "grid-info"}, {"grid", {{"N", 16}}}});
  EXPECT_EQ(rc.config["grid"]["L"].get<double>(), 4.0);
  EXPECT_NE(std::find(rc.defaulted.begin(), rc.defaulted.end(), "grid.L"), rc.defaulted.end());
  EXPECT_EQ(std::find(rc.defaulted.begin(), rc.defaulted.end(), "grid.N"), rc.defaulted.end());
}

TEST(Cli, ZeroPotentialDirectSolveAndManifest) {
  const std::string out = tmpdir("zero");
  auto rc = cli::validate_config(
      {{"command", "direct-solve"}, {"lambda", 9.0}, {"grid", {{"N", 24}}}, {"sources", 2}, {"output", out}});
  std::ostringstream log;
  ASSERT_EQ(cli::run(rc, log), 0) << log.str();
  const std::string csv = slurp(out + "/data.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_TRUE(line.size() > 4 && line.substr(line.size() - 4) == ",0,0") << line;
  }
  EXPECT_EQ(rows, 8 * 8);
  const json m = json::parse(slurp(out + "/manifest.json"));
  EXPECT_EQ(m["exit_code"], 0);
  bool found = false;
  for (const auto& a : m["artifacts"]) {
    EXPECT_EQ(a["sha256"], cli::sha256_hex(slurp(out + "/" + a["path"].get<std::string>())));
    found |= a["path"] == "data.csv";
  }
  EXPECT_TRUE(found);
  // Reconstructible from the manifest alone.
  json again = m["config"];
  const std::string out2 = tmpdir("zero2");
  again["output"] = out2;
  ASSERT_EQ(cli::run(cli::validate_config(again), log), 0);
  EXPECT_EQ(slurp(out2 + "/data.csv"), csv);
}

TEST(Cli, RegimeErrorExitCode) {
  const std::string out = tmpdir("regime");
  auto rc = cli::validate_config({{"command", "direct-solve"},
                                  {"lambda", 9.0},
                                  {"grid", {{"N", 24}}},
                                  {"potential", {{"volume", {{"type", "bump"}, {"amplitude", 80.0}, {"radius", 0.9}}}}},
                                  {"output", out}});
  std::ostringstream log;
  EXPECT_EQ(cli::run(rc, log), 3);
  EXPECT_NE(log.str().find("below lambda_0"), std::string::npos);
  EXPECT_EQ(json::parse(slurp(out + "/manifest.json"))["exit_code"], 3);
}

TEST(Cli, BenchSingleGridPointRefusesSlope) {
  const std::string out = tmpdir("bench1");
  auto rc = cli::validate_config(
      {{"command", "bench"}, {"ineq", "krs"}, {"params", {4.0}}, {"grid", {{"N", 16}}}, {"output", out}});
  std::ostringstream log;
  ASSERT_EQ(cli::run(rc, log), 0);
  const json s = json::parse(slurp(out + "/bench_summary.json"))["summary"];
  EXPECT_TRUE(s["slope"].is_null());
  EXPECT_NE(s["reason"].get<std::string>().find("2 grid points"), std::string::npos);
  EXPECT_GT(s["max_constant"].get<double>(), 0.0);
  const std::string a = slurp(out + "/bench.csv");
  ASSERT_EQ(cli::run(rc, log), 0);
  EXPECT_EQ(slurp(out + "/bench.csv"), a);
}

TEST(Cli, ConfigFileWithOverridesAndRelativePaths) {
  const std::string dir = tmpdir("cfg");
  std::ofstream(dir + "/pot.json") << R"({"volume": {"type": "bump", "amplitude": 0.05, "radius": 0.8}})";
  std::ofstream(dir + "/run.json") << R"({"command": "direct-solve", "lambda": 4, "potential": "pot.json",
                                          "grid": {"N": 16}, "sources": 1})";
  const auto rc = cli::validate_config_file(dir + "/run.json", {{"lambda", 9.0}, {"output", dir + "/out"}});
  EXPECT_EQ(rc.config["lambda"].get<double>(), 9.0);
  EXPECT_EQ(rc.config["potential"].get<std::string>(), dir + "/pot.json");
  std::ofstream(dir + "/bad.json") << R"({"command": "norm", "space": "y", "field": "nope"})";
  try {
    cli::validate_config_file(dir + "/bad.json");
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find(dir + "/nope.json"), std::string::npos);
  }
}

TEST(Cli, NormFromFieldFile) {
  const std::string dir = tmpdir("norm");
  const Grid g = make_grid(3, 4.0, 16);
  const ComplexField f = sample(g, [](const Vec3& x) { return cplx(std::exp(-norm2(x, 3))); });
  write_field(dir + "/f", f);
  auto rc = cli::validate_config(
      {{"command", "norm"}, {"space", "x_star"}, {"lambda", 16.0}, {"field", dir + "/f"}, {"output", dir + "/o"}});
  std::ostringstream log;
  ASSERT_EQ(cli::run(rc, log), 0);
  const json r = json::parse(slurp(dir + "/o/norm_x_star.json"));
  EXPECT_DOUBLE_EQ(r["value"].get<double>(), x_star_norm(f, 16.0).value);
}
