#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "kronsketch/skvb.hpp"

using nlohmann::json;

namespace {

const std::filesystem::path kScratch = std::filesystem::temp_directory_path() / "sketchbench_cli_test";

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  std::filesystem::create_directories(kScratch);
  const auto out = kScratch / "stdout.txt";
  const std::string cmd = std::string(SKETCHBENCH_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (kScratch / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string without_config(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, kept;
  while (std::getline(in, line))
    if (line.rfind("# config:", 0) != 0) kept += line + "\n";
  return kept;
}

const std::string kSmallLogistic = "--n 2048 --oracle-param examples=48 --oracle-param blocks=4";

}  // namespace

TEST_CASE("quality: identity row, JSON layout, thread invariance") {
  const auto r = run("quality " + kSmallLogistic + " --algo affd,qk --d 128,512 --jl-vectors 100 --format json");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["config"]["subcommand"] == "quality");
  CHECK(doc["config"]["n"] == 2048);
  CHECK(doc["config"]["pairs"] == 48 * 47 / 2);
  const auto& rows = doc["tables"]["quality"];
  REQUIRE(rows.size() == 5);
  CHECK(rows[0]["algorithm"] == "identity");
  CHECK(rows[0]["r"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[0]["jl_failure_rate"] == 0.0);
  for (const auto& row : rows) {
    CHECK(row["r"].get<double>() > 0.5);
    CHECK(row["jl_failure_rate"].get<double>() <= 0.2);
  }

  const std::string args = "quality " + kSmallLogistic + " --algo afjl --d 256 --seeds 3 --jl-vectors 50";
  const auto one = run(args + " --threads 1");
  const auto four = run(args + " --threads 4");
  REQUIRE(one.code == 0);
  REQUIRE(four.code == 0);
  CHECK(without_config(one.out) == without_config(four.out));
}

TEST_CASE("tda: tables and score dump") {
  const auto dump = (kScratch / "scores.csv").string();
  const auto r = run("tda " + kSmallLogistic + " --d 64,1024 --seeds 2 --scores " + dump);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# config: ", 0) == 0);
  CHECK(r.out.find("# table: tda\nalgorithm,n,d,seed,r\n") != std::string::npos);
  CHECK(r.out.find("# table: minimal_d\n") != std::string::npos);
  CHECK(r.out.find("# table: layer_masked\nblock,begin,end,r\n0,0,512,") != std::string::npos);
  std::ifstream f(dump);
  std::string header;
  std::getline(f, header);
  CHECK(header == "x_id,z_id,true,sketched,block_0,block_1,block_2,block_3");
}

TEST_CASE("eigen and intdim rows") {
  const auto e = run("eigen --n 1024 --oracle-param basis_block=256 --d 1024 --algo qk --m 32 --format json");
  REQUIRE(e.code == 0);
  const auto doc = json::parse(e.out);
  CHECK(doc["tables"]["eigen"][0]["relative_mae"].get<double>() <= 1e-6);
  CHECK(doc["tables"]["eigen_summary"].size() == 1);

  const auto i = run("intdim --n 1024 --oracle-param planted=32 --d-max 256 --format json");
  REQUIRE(i.code == 0);
  const auto idoc = json::parse(i.out);
  CHECK(idoc["tables"]["intdim"][0]["d_star"] == 32);
  CHECK(idoc["tables"]["intdim"][0]["verify_passed"] == true);
  CHECK(idoc["tables"]["trace"][0]["step"] == 0);
}

TEST_CASE("perf carries the host fingerprint") {
  const auto r = run("perf --n 4096 --d 64,256 --repeats 1 --warmup 0 --format json --precision f32");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["host"].contains("cpu"));
  CHECK(doc["host"].contains("simd"));
  CHECK(doc["tables"]["perf"].size() == 6);
  CHECK(doc["tables"]["perf"][0]["precision"] == "f32");
}

TEST_CASE("SKVB input vectors") {
  const auto path = kScratch / "in.skvb";
  std::filesystem::create_directories(kScratch);
  std::vector<std::vector<double>> vs(12, std::vector<double>(256));
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = 0; j < 256; ++j) vs[i][j] = std::sin(0.37 * static_cast<double>(i * 256 + j)) + 0.1 * i;
  kronsketch::write_skvb_file(path.string(), vs, kronsketch::SkvbDtype::f32);
  const auto r = run("tda --vectors " + path.string() + " --d 32 --algo affd --format json");
  REQUIRE(r.code == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["config"]["n"] == 256);
  CHECK(doc["tables"]["tda"].size() == 1);
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 2);
  CHECK(run("quality --bogus").code == 2);
  CHECK(run("quality --format xml").code == 2);
  CHECK(run("eigen --precision f32").code == 2);
  CHECK(run("quality --algo nope --n 1024").code == 2);
  CHECK(run("tda --n 1000 --oracle-param blocks=3").code == 2);
  CHECK(run("quality --oracle-param colour=red").code == 2);
  CHECK(run("intdim --n 1024 --d-min 16 --d-max 32 --c 5 --oracle-param planted=512").code == 4);
  CHECK(run("--help").code == 0);
}
