#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mrt/cli.hpp"
#include "mrt/lfd.hpp"
#include "mrt/moment_functions.hpp"
#include "mrt/problem_io.hpp"

using namespace mrt;
namespace fs = std::filesystem;

namespace {

const std::string kData = MRT_TEST_DATA;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch() {
  fs::path dir = fs::temp_directory_path() / "mrt_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kContinuous = R"({
  "problem": {
    "space": {"kind": "continuous", "dim": 1, "lower": [0], "upper": [1]},
    "functions": [{"id": "mean", "axis": 0}],
    "training": {"h0": [[0.1], [0.2], [0.3]], "h1": [[0.7], [0.8], [0.9]]},
    "eta": 0.05
  },
  "solve": {"epsilon": 0.05}
})";

}  // namespace

TEST_CASE("info reports eta_max of the two-point fixture") {
  auto r = run({"info", "--config", kData + "/two_point.json"});
  REQUIRE(r.code == kExitOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("eta_max").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("eta").get<double>() == 0.25);
  CHECK(j.at("support").at("points") == 2);
  CHECK(j.at("matrix_mode") == false);
}

TEST_CASE("info errors") {
  auto cfg = write("no_eta.json", R"({"problem": {"space": {"kind": "finite", "atoms": [[0], [1]]},
    "functions": [{"id": "mean", "axis": 0}], "moments": {"h0": [0], "h1": [1]}}})");
  auto r = run({"info", "--config", cfg});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("eta") != std::string::npos);
  CHECK(r.out.empty());

  auto unknown = write("unknown.json", R"({"problem": {}, "extra": 1})");
  CHECK(run({"info", "--config", unknown}).code == kExitUsage);
  CHECK(run({"info", "--config", (scratch() / "absent.json").string()}).code == kExitUsage);
  CHECK(run({"info"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
}

TEST_CASE("info in matrix mode reports the spectral eta_max") {
  auto cfg = write("matrix.json", R"({"problem": {
      "space": {"kind": "continuous", "dim": 2, "lower": [0, 0], "upper": [1, 1]},
      "functions": [{"id": "outer_product", "center": [0, 0]}],
      "training": {"h0": [[0, 0]], "h1": [[1, 1]]},
      "eta": 0.1},
    "solve": {"mode": "matrix", "epsilon": 0.2}})");
  auto r = run({"info", "--config", cfg});
  REQUIRE(r.code == kExitOk);
  auto j = nlohmann::json::parse(r.out);
  // Gap [[1,1],[1,1]]: eigenvalues 0 and 2.
  CHECK(j.at("eta_max").get<double>() == doctest::Approx(1.0));
  CHECK(j.at("matrix_mode") == true);
}

TEST_CASE("solve writes a reusable model") {
  const std::string model = (scratch() / "two_point_model.json").string();
  auto r = run({"solve", "--config", kData + "/two_point.json", "--out", model});
  REQUIRE(r.code == kExitOk);
  auto summary = nlohmann::json::parse(r.out);
  CHECK(summary.at("gamma").get<double>() == doctest::Approx(0.25));
  auto j = nlohmann::json::parse(read(model));
  CHECK(j.at("gamma").get<double>() == doctest::Approx(0.25));
  CHECK(j.at("tv").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("format") == "mrt-model");

  // Rerun: identical bytes.
  const std::string again = (scratch() / "two_point_model2.json").string();
  REQUIRE(run({"solve", "--config", kData + "/two_point.json", "--out", again}).code == kExitOk);
  CHECK(read(model) == read(again));

  // Model on stdout, summary on stderr.
  auto s = run({"solve", "--config", kData + "/two_point.json"});
  REQUIRE(s.code == kExitOk);
  CHECK(s.out == read(model));
  CHECK(nlohmann::json::parse(s.err).at("gamma").get<double>() == doctest::Approx(0.25));

  // Classify the single point x = 1: log ratio log 3 under equal priors.
  auto c = run({"classify", "--model", model, "--data", kData + "/point_one.csv"});
  REQUIRE(c.code == kExitOk);
  auto v = nlohmann::json::parse(c.out).at("verdicts").at(0);
  CHECK(v.at("decision") == "H1");
  CHECK(v.at("statistic").get<double>() == doctest::Approx(std::log(3.0)));
  auto test = robust_test(solve_finite(problem_from_json(
      nlohmann::json::parse(read(kData + "/two_point.json")).at("problem"), kData)));
  CHECK(v.at("statistic").get<double>() ==
        doctest::Approx(test.classify(std::vector<double>{1.0}).statistic));

  auto np = run({"classify", "--model", model, "--data", kData + "/point_one.csv", "--mode", "np",
                 "--alpha", "0.1"});
  REQUIRE(np.code == kExitOk);
  auto nj = nlohmann::json::parse(np.out);
  // m0 = 0, eta = 0.25, c = 1, n = 1.
  CHECK(nj.at("verdict").at("threshold").get<double>() ==
        doctest::Approx(0.25 + std::sqrt(-std::log(0.1) / 2.0)));
  CHECK(nj.at("alpha").get<double>() == 0.1);

  auto empty = write("empty.csv", "");
  CHECK(run({"classify", "--model", model, "--data", empty}).code == kExitUsage);
  auto wide = write("wide.csv", "1,2\n");
  CHECK(run({"classify", "--model", model, "--data", wide}).code == kExitUsage);
  CHECK(run({"classify", "--model", model, "--data", wide, "--mode", "vote"}).code == kExitUsage);
}

TEST_CASE("continuous solve, batch modes and model round trip") {
  auto cfg = write("continuous.json", kContinuous);
  const std::string model = (scratch() / "continuous_model.json").string();
  auto r = run({"solve", "--config", cfg, "--out", model, "--threads", "3"});
  REQUIRE(r.code == kExitOk);
  auto j = nlohmann::json::parse(read(model));
  CHECK(j.at("grid").at("per_axis") == 10);

  // The parsed model reproduces the in-memory solution.
  auto m = model_from_json(j);
  REQUIRE(m.test.has_value());
  auto direct = solve_relaxed(problem_from_json(nlohmann::json::parse(kContinuous).at("problem"), ""), 0.05);
  CHECK(m.gamma == doctest::Approx(direct.gamma));
  auto t = smooth(direct);
  for (double x : {0.05, 0.5, 0.95})
    CHECK(m.test->classify(std::vector<double>{x}).statistic ==
          t.classify(std::vector<double>{x}).statistic);

  auto data = write("batch.csv", "x\n0.85\n0.75\n0.9\n");
  auto b = run({"classify", "--model", model, "--data", data, "--mode", "batch"});
  REQUIRE(b.code == kExitOk);
  CHECK(nlohmann::json::parse(b.out).at("verdict").at("decision") == "H1");

  auto d = run({"batch-test", "--config", cfg, "--data", data});
  REQUIRE(d.code == kExitOk);
  auto dj = nlohmann::json::parse(d.out);
  CHECK(dj.at("verdict").at("decision") == "H1");
  CHECK(dj.at("mcdiarmid_bound").get<double>() > 0.0);
  CHECK(dj.at("mcdiarmid_sup_bound").get<double>() >= dj.at("mcdiarmid_bound").get<double>());
  CHECK(run({"batch-test", "--model", model, "--data", data}).code == kExitOk);
  CHECK(run({"batch-test", "--model", model, "--config", cfg, "--data", data}).code == kExitUsage);

  auto n = run({"np-test", "--config", cfg, "--data", data, "--alpha", "0.05"});
  REQUIRE(n.code == kExitOk);
  CHECK(nlohmann::json::parse(n.out).at("verdict").contains("threshold"));
  CHECK(run({"np-test", "--config", cfg, "--data", data, "--alpha", "0"}).code == kExitUsage);
}

TEST_CASE("solve block selects the centered pair") {
  auto cfg_json = nlohmann::json::parse(kContinuous);
  cfg_json["solve"]["lfd"] = "center";
  auto cfg = write("centered.json", cfg_json.dump());
  auto r = run({"solve", "--config", cfg});
  REQUIRE(r.code == kExitOk);
  auto model = nlohmann::json::parse(r.out);
  CHECK(model.at("lfd") == "center");
  CHECK(nlohmann::json::parse(r.err).at("lfd") == "center");
  for (double p : model.at("p0").get<std::vector<double>>()) CHECK(p > 0.0);
  CHECK(model_from_json(model).gamma == doctest::Approx(model.at("gamma").get<double>()));

  cfg_json["solve"]["lfd"] = "middle";
  CHECK(run({"solve", "--config", write("bad_lfd.json", cfg_json.dump())}).code != kExitOk);
}

TEST_CASE("grid cap overflow exits with the solver code") {
  auto cfg = write("cap.json", R"({"problem": {
      "space": {"kind": "continuous", "dim": 2, "lower": [0, 0], "upper": [1, 1]},
      "functions": [{"id": "mean", "axis": 0}],
      "training": {"h0": [[0.1, 0.1]], "h1": [[0.9, 0.9]]},
      "eta": 0.05},
    "solve": {"epsilon": 0.01, "grid_cap": 100}})");
  auto r = run({"solve", "--config", cfg});
  CHECK(r.code == kExitSolver);
  CHECK(r.out.empty());
  CHECK(r.err.find("cap") != std::string::npos);
}

TEST_CASE("solve can dump its LP") {
  const std::string dump = (scratch() / "lp.txt").string();
  auto r = run({"solve", "--config", kData + "/two_point.json", "--out",
                (scratch() / "m.json").string(), "--dump-lp", dump});
  REQUIRE(r.code == kExitOk);
  CHECK(read(dump).rfind("lp variables", 0) == 0);
}

TEST_CASE("evaluate writes a deterministic curve") {
  auto cfg = write("scenario.json", R"({
    "scenario": {
      "sampler0": {"type": "gaussian", "mean": [0, 0], "var": [1, 1]},
      "sampler1": {"type": "gaussian", "mean": [0.8, 0.8], "var": [0.5, 0.5]},
      "batch_sizes": [5, 10],
      "trials": 16,
      "seed": 12,
      "detector": {"epsilon": 0.03}
    }
  })");
  auto a = run({"evaluate", "--config", cfg});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.rfind("test,s,error,ci95,trials\n", 0) == 0);
  auto b = run({"evaluate", "--config", cfg, "--threads", "4"});
  CHECK(a.out == b.out);
  auto c = run({"evaluate", "--config", cfg, "--seed", "13"});
  CHECK(c.code == kExitOk);
  auto t = run({"evaluate", "--config", cfg, "--trials", "4"});
  CHECK(t.out.find(",4\n") != std::string::npos);

  const std::string out = (scratch() / "curve.csv").string();
  REQUIRE(run({"evaluate", "--config", cfg, "--out", out}).code == kExitOk);
  CHECK(read(out) == a.out);

  auto bad = write("bad_scenario.json", R"({"scenario": {"sampler0": {"type": "gaussian"}}})");
  CHECK(run({"evaluate", "--config", bad}).code == kExitUsage);
  CHECK(run({"evaluate", "--config", kData + "/two_point.json"}).code == kExitUsage);
}

TEST_CASE("identical samplers evaluate near chance") {
  auto cfg = write("same.json", R"({
    "scenario": {
      "sampler0": {"type": "uniform", "lower": [0], "upper": [1]},
      "sampler1": {"type": "uniform", "lower": [0], "upper": [1]},
      "batch_sizes": [20],
      "trials": 200,
      "seed": 4,
      "detector": {"epsilon": 0.002, "eta_factor": 0.25}
    }
  })");
  auto r = run({"evaluate", "--config", cfg, "--threads", "4"});
  REQUIRE(r.code == kExitOk);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string test, s, err, ci, trials;
    std::getline(ss, test, ',');
    std::getline(ss, s, ',');
    std::getline(ss, err, ',');
    std::getline(ss, ci, ',');
    CHECK(std::abs(std::stod(err) - 0.5) <= 3.0 * std::stod(ci));
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("training from CSV") {
  auto cfg = write("csv_problem.json", std::string(R"({"problem": {
      "space": {"kind": "continuous", "dim": 2},
      "functions": "mean_and_second_moment",
      "training": {"csv": ")") + kData + R"(/activity.csv", "label_column": "activity",
                   "labels": ["walk", "jog"]},
      "eta": 0.05}})");
  auto r = run({"info", "--config", cfg});
  REQUIRE(r.code == kExitOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("functions").size() == 4);
  CHECK(j.at("moments").at("counts") == nlohmann::json::array({2, 2}));
}
