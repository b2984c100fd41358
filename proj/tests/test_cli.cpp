// Drives the built qpc binary (path in QPC_BIN) end to end.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <string>

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const char* bin = std::getenv("QPC_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int rc = pclose(pipe);
  r.status = WEXITSTATUS(rc);
  return r;
}

}  // namespace

TEST_CASE("cf: Fibonacci convergents") {
  const RunResult r = run("cf 0.6180339887498948482045868343656 --terms 12");
  CHECK(r.status == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  REQUIRE(j.at("convergents").size() == 12);
  CHECK(j.at("convergents")[9][1].get<std::string>() == "55");
  CHECK(j.at("beta_estimate").get<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("reduce: schrodinger family with an inline potential config") {
  const char* path = "qpc_cli_test_cfg.json";
  {
    nlohmann::json cfg;
    cfg["potential"] = {{"parity", "periodic"},
                        {"half_width", 0.1},
                        {"N", 1},
                        {"coeffs", {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}}};
    std::ofstream out(path);
    out << cfg.dump();
  }
  const RunResult r = run(
      "reduce --family schrodinger --freq 3/7 --energy 0.3 --eps0 0.05 "
      "--config " + std::string(path));
  std::remove(path);
  CHECK(r.status == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("case").get<std::string>() == "elliptic");
  CHECK(j.at("residual").get<double>() < 1e-8);
}

TEST_CASE("reduce: supercritical growth exits 2 with CondFailed") {
  const RunResult r = run(
      "reduce --family amo --lambda 3 --energy 0 --freq 34/55 --eps0 0.05");
  CHECK(r.status == 2);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("error").at("kind").get<std::string>() == "CondFailed");
}

TEST_CASE("byte-identical output for identical JobSpec") {
  const std::string args =
      "lyap --family amo --lambda 0.5 --energy 0.2 --freq golden "
      "--eps0 0.04 --terms 400 --grid 16";
  const RunResult r1 = run(args);
  const RunResult r2 = run(args);
  CHECK(r1.status == 0);
  CHECK(r1.out == r2.out);
}

TEST_CASE("sweep: CSV rows in input order, residual matches single run") {
  const RunResult csv = run(
      "sweep --family amo --lambda 0.5 --freq 13/21 --eps0 0.05 "
      "--energy -0.5:0.5:3 --terms 400 --grid 16 --format csv --workers 2");
  CHECK(csv.status == 0);
  // header + 3 rows
  int lines = 0;
  for (char ch : csv.out)
    if (ch == '\n') ++lines;
  CHECK(lines == 4);
  CHECK(csv.out.rfind("energy,L0,classification,case,residual,delta_target,"
                      "error\n", 0) == 0);

  const RunResult js = run(
      "sweep --family amo --lambda 0.5 --freq 13/21 --eps0 0.05 "
      "--energy 0:0:1 --terms 400 --grid 16");
  CHECK(js.status == 0);
  const nlohmann::json rows = nlohmann::json::parse(js.out);
  REQUIRE(rows.size() == 1);
  if (rows[0].contains("residual")) {
    const RunResult single = run(
        "reduce --family amo --lambda 0.5 --energy 0 --freq 13/21 "
        "--eps0 0.05");
    CHECK(single.status == 0);
    const nlohmann::json sj = nlohmann::json::parse(single.out);
    // to the last digit
    CHECK(nlohmann::json(rows[0].at("residual")).dump() ==
          nlohmann::json(sj.at("residual")).dump());
  }
}

TEST_CASE("classify: subcritical almost Mathieu") {
  const RunResult r = run(
      "classify --family amo --lambda 0.5 --energy 0 --freq golden "
      "--eps0 0.04 --terms 800 --grid 24");
  CHECK(r.status == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("classification").get<std::string>() == "subcritical");
  CHECK(j.at("profile").size() == 4);
}
