#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blipcdf/dgp.hpp"
#include "blipcdf/io.hpp"
#include "cli.hpp"

using namespace blipcdf;
namespace fs = std::filesystem;

namespace {

struct Captured {
  int code = 0;
  std::string out;
};

Captured run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "blipcdf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream buf;
  std::streambuf* old = std::cout.rdbuf(buf.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(nullptr);
  const int code = blipcdf::cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  std::cerr.rdbuf(old_err);
  return {code, buf.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blipcdf_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p.string())); }

}  // namespace

TEST_CASE("kernel subcommand") {
  const Captured k0 = run_cli({"kernel", "--K", "0"});
  CHECK(k0.code == 0);
  CHECK(k0.out.find("order J=2") != std::string::npos);
  CHECK(run_cli({"kernel", "--K", "3"}).code == 2);
  CHECK(run_cli({"kernel", "--K", "4"}).out.find("order J=10") != std::string::npos);

  const fs::path dir = scratch("kernel");
  CHECK(run_cli({"kernel", "--K", "0", "--out", (dir / "k.json").string()}).code == 0);
  const auto j = read_json(dir / "k.json");
  const auto c = j.at("coefficients").get<std::vector<double>>();
  REQUIRE(c.size() == 3);
  CHECK(c[0] == doctest::Approx(15.0 / 16.0));
  CHECK(c[1] == doctest::Approx(-30.0 / 16.0));
  CHECK(c[2] == doctest::Approx(15.0 / 16.0));
}

TEST_CASE("argument and data errors map to exit codes") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"estimate", "--data", "/nonexistent/file.csv"}).code == 3);
  const fs::path dir = scratch("errors");
  write_file((dir / "bad.csv").string(), "W,A,Y\n1,0,1\n2,3,0\n");
  CHECK(run_cli({"estimate", "--data", (dir / "bad.csv").string(), "--out", dir.string()}).code == 3);
  write_file((dir / "ok.csv").string(), "W,A,Y\n1,0,1\n2,1,0\n");
  CHECK(run_cli({"estimate", "--data", (dir / "ok.csv").string(), "--delta", "-1", "--out", dir.string()}).code == 2);
}

TEST_CASE("estimate end to end") {
  const fs::path dir = scratch("estimate");
  const Dataset d = draw({DgpName::kWellSpecified, 300, 2});
  write_file((dir / "d.csv").string(), dataset_to_csv(d));
  const Captured c = run_cli({"estimate", "--data", (dir / "d.csv").string(), "--t", "-0.1,0.1", "--folds", "5",
                              "--mc-draws", "10000", "--seed", "3", "--out", dir.string()});
  REQUIRE(c.code == 0);
  const auto j = read_json(dir / "result.json");
  const auto psi = j.at("result").at("psi").get<std::vector<double>>();
  REQUIRE(psi.size() == 2);
  CHECK(psi[0] <= psi[1]);
  CHECK(j.at("provenance").at("seed") == 3);
  CHECK(fs::exists(dir / "estimates.csv"));

  // Same seed, same bytes.
  const std::string first = read_file((dir / "estimates.csv").string());
  run_cli({"estimate", "--data", (dir / "d.csv").string(), "--t", "-0.1,0.1", "--folds", "5", "--mc-draws", "10000",
           "--seed", "3", "--out", dir.string()});
  CHECK(read_file((dir / "estimates.csv").string()) == first);
}

TEST_CASE("known propensity from a column") {
  const fs::path dir = scratch("gknown");
  const Dataset d = draw({DgpName::kMisspecified, 300, 9});
  const std::vector<double> g = true_propensity(DgpName::kMisspecified, d);
  write_file((dir / "d.csv").string(), dataset_to_csv(d, &g));
  const Captured c = run_cli({"estimate", "--data", (dir / "d.csv").string(), "--g-known", "col:g", "--t", "0",
                              "--folds", "5", "--mc-draws", "10000", "--out", dir.string()});
  REQUIRE(c.code == 0);
  const auto j = read_json(dir / "result.json");
  CHECK(j.at("diagnostics").at("g").is_null());
  CHECK(j.at("data").at("covariates") == nlohmann::json::array({"W1"}));
}

TEST_CASE("bandwidth subcommand") {
  const fs::path dir = scratch("bandwidth");
  const Dataset d = draw({DgpName::kWellSpecified, 300, 4});
  write_file((dir / "d.csv").string(), dataset_to_csv(d));
  REQUIRE(run_cli({"bandwidth", "--data", (dir / "d.csv").string(), "--t", "0,0.2", "--folds", "5", "--out",
                   dir.string()})
              .code == 0);
  const auto sel = read_json(dir / "selected.json");
  const double hmax = sel.at("h_max").get<double>();
  CHECK(hmax == doctest::Approx(std::pow(300.0, -0.2)));
  std::istringstream csv(read_file((dir / "bandwidth_path.csv").string()));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "h,t,psi,var,var_monotone,in_run");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(std::stod(line.substr(0, line.find(','))) <= hmax * (1 + 1e-12));
  }
  CHECK(rows == 40);
  for (const auto& s : sel.at("selected")) CHECK(s.at("chosen_h").get<double>() <= hmax * (1 + 1e-12));
}

TEST_CASE("simulate and draw subcommands") {
  const fs::path dir = scratch("simulate");
  write_file((dir / "cfg.json").string(),
             R"({"dgp": "well_specified", "n": 200, "reps": 2, "t": [0.0], "delta": 0.3, "V": 5, "mc_draws": 10000})");
  REQUIRE(run_cli({"simulate", (dir / "cfg.json").string(), "--out", dir.string()}).code == 0);
  const auto j = read_json(dir / "report.json");
  CHECK(j.at("provenance").at("command") == "simulate");
  write_file((dir / "bad.json").string(), R"({"n": 200, "t": [0.0], "typo": 1})");
  CHECK(run_cli({"simulate", (dir / "bad.json").string(), "--out", dir.string()}).code == 2);

  const Captured c = run_cli({"draw", "--dgp", "misspecified", "--n", "20", "--seed", "5"});
  CHECK(c.code == 0);
  CHECK(c.out.rfind("W1,A,Y\n", 0) == 0);
  CHECK(c.out == run_cli({"draw", "--dgp", "misspecified", "--n", "20", "--seed", "5"}).out);
}

TEST_CASE("20-row toy data runs end to end") {
  const fs::path dir = scratch("toy");
  const Dataset d = draw({DgpName::kWellSpecified, 20, 11});
  write_file((dir / "d.csv").string(), dataset_to_csv(d));
  REQUIRE(run_cli({"estimate", "--data", (dir / "d.csv").string(), "--t", "0.1", "--folds", "2", "--mc-draws",
                   "10000", "--out", dir.string()})
              .code == 0);
  const double psi = read_json(dir / "result.json").at("result").at("psi").at(0).get<double>();
  CHECK(psi >= 0.0);
  CHECK(psi <= 1.0);
}

TEST_CASE("estimate on n = 2500 with the order-10 kernel covers the smoothed truth") {
  const fs::path dir = scratch("k4");
  const Dataset d = draw({DgpName::kWellSpecified, 2500, 2500});
  write_file((dir / "d.csv").string(), dataset_to_csv(d));
  const std::vector<double> t{-0.145, 0.035, 0.215};
  const double delta = std::pow(2500.0, -1.0 / 21.0);
  std::ostringstream delta_s;
  delta_s.precision(17);
  delta_s << delta;
  REQUIRE(run_cli({"estimate", "--data", (dir / "d.csv").string(), "--kernel-K", "4", "--delta", delta_s.str(),
                   "--t", "-0.145,0.035,0.215", "--mc-draws", "10000", "--seed", "1", "--out", dir.string()})
              .code == 0);
  const auto res = read_json(dir / "result.json").at("result");
  const TrueTargets truth = true_targets(DgpName::kWellSpecified, build_kernel(4, 1.0), delta, t);
  for (std::size_t j = 0; j < t.size(); ++j) {
    CAPTURE(t[j]);
    const double psi = res.at("psi").at(j).get<double>();
    const double se = res.at("se").at(j).get<double>();
    CHECK(std::fabs(psi - truth.smoothed[j]) <= 3.0 * se);
  }
}
