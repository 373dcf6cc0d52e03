#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mrt/eval.hpp"

using namespace mrt;

namespace {

const std::string kData = MRT_TEST_DATA;

Scenario small_scenario() {
  Scenario s;
  s.sampler0 = Sampler::gaussian({0.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}});
  s.sampler1 = Sampler::gaussian({0.8, 0.8}, {{0.5, 0.0}, {0.0, 0.5}});
  s.batch_sizes = {5, 20};
  s.trials = 24;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(1, 0), b(1, 0), c(1, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    differs |= x != c.uniform();
  }
  CHECK(differs);
  Rng n1(9), n2(9);
  for (int i = 0; i < 11; ++i) CHECK(n1.normal() == n2.normal());
}

TEST_CASE("gaussian sampling") {
  Rng rng(2024);
  auto xs = sample_gaussian(std::vector<double>{0.3, -1.0}, {{1.0, 0.0}, {0.0, 1.0}}, 100000, rng);
  double m0 = 0.0, m1 = 0.0, v0 = 0.0;
  for (const auto& x : xs) {
    m0 += x[0];
    m1 += x[1];
  }
  m0 /= xs.size();
  m1 /= xs.size();
  for (const auto& x : xs) v0 += (x[0] - m0) * (x[0] - m0);
  v0 /= xs.size();
  CHECK(std::abs(m0 - 0.3) <= 0.02);
  CHECK(std::abs(m1 + 1.0) <= 0.02);
  CHECK(std::abs(v0 - 1.0) <= 0.02);

  // Correlated case: the sample covariance follows the requested one.
  Rng r2(5);
  auto ys = sample_gaussian(std::vector<double>{0.0, 0.0}, {{1.0, 0.6}, {0.6, 2.0}}, 100000, r2);
  double c01 = 0.0, c11 = 0.0;
  for (const auto& y : ys) {
    c01 += y[0] * y[1];
    c11 += y[1] * y[1];
  }
  CHECK(c01 / ys.size() == doctest::Approx(0.6).epsilon(0.05));
  CHECK(c11 / ys.size() == doctest::Approx(2.0).epsilon(0.05));

  Rng r3(1);
  CHECK_THROWS_AS(sample_gaussian(std::vector<double>{0.0}, {{0.0}}, 10, r3), InputError);
  CHECK_THROWS_AS(cholesky({{1.0, 2.0}, {2.0, 1.0}}), InputError);
  CHECK_THROWS_AS(cholesky({{1.0, 0.5}, {0.4, 1.0}}), InputError);
  Rng s1(44), s2(44);
  CHECK(sample_gaussian(std::vector<double>{0.0}, {{2.0}}, 5, s1) ==
        sample_gaussian(std::vector<double>{0.0}, {{2.0}}, 5, s2));
}

TEST_CASE("cholesky factor reproduces the matrix") {
  const std::vector<std::vector<double>> a{{4.0, 2.0, 0.4}, {2.0, 3.0, 0.3}, {0.4, 0.3, 1.0}};
  auto l = cholesky(a);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += l[i][k] * l[j][k];
      CHECK(s == doctest::Approx(a[i][j]));
      if (j > i) CHECK(l[i][j] == 0.0);
    }
}

TEST_CASE("samplers from json") {
  auto g = Sampler::from_json({{"type", "gaussian"}, {"mean", {0.0, 1.0}}, {"var", 0.5}});
  CHECK(g.dim() == 2);
  auto c = Sampler::from_json(
      {{"type", "categorical"}, {"atoms", {{0.0}, {1.0}}}, {"probabilities", {0.0, 1.0}}});
  Rng rng(3);
  CHECK(c.draw(rng) == Point{1.0});
  auto u = Sampler::from_json({{"type", "uniform"}, {"lower", {2.0}}, {"upper", {3.0}}});
  for (const auto& x : u.draw(50, rng)) {
    CHECK(x[0] >= 2.0);
    CHECK(x[0] < 3.0);
  }
  CHECK_THROWS_AS(Sampler::from_json({{"type", "cauchy"}}), InputError);
  CHECK_THROWS_AS(Sampler::from_json({{"type", "gaussian"}, {"mean", {0.0}}}), InputError);
  CHECK_THROWS_AS(Sampler::from_json({{"type", "categorical"},
                                      {"atoms", {{0.0}, {1.0}}},
                                      {"probabilities", {0.5, 0.6}}}),
                  InputError);
  CHECK_THROWS_AS(
      Sampler::from_json({{"type", "uniform"}, {"lower", {0.0}}, {"upper", {1.0}}, {"x", 1}}),
      InputError);
}

TEST_CASE("csv ingestion") {
  auto d = ingest_csv(kData + "/activity.csv", "activity");
  CHECK(d.labels[0] == "jog");
  CHECK(d.labels[1] == "walk");
  CHECK(d.points[0].size() == 2);
  CHECK(d.points[1].size() == 2);
  // Duplicate rows are kept.
  CHECK(d.points[1][0] == d.points[1][1]);
  CHECK(d.feature_names == std::vector<std::string>{"x", "y"});

  auto swapped = ingest_csv(kData + "/activity.csv", "activity",
                            std::make_pair(std::string("walk"), std::string("jog")));
  CHECK(swapped.labels[0] == "walk");
  CHECK(swapped.points[0][0] == Point{1.5, 2.0});

  CHECK_THROWS_AS(ingest_csv(kData + "/activity.csv", "label"), InputError);
  CHECK_THROWS_AS(ingest_csv(kData + "/missing.csv", "activity"), InputError);

  std::istringstream bad("a,b,label\n1,2,x\n1,oops,y\n");
  try {
    ingest_csv(bad, "label");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream one_label("a,label\n1,x\n2,x\n");
  CHECK_THROWS_AS(ingest_csv(one_label, "label"), InputError);
  std::istringstream three("a,label\n1,x\n2,y\n3,z\n");
  CHECK_THROWS_AS(ingest_csv(three, "label"), InputError);
  std::istringstream ragged("a,b,label\n1,2,x\n1,y\n");
  CHECK_THROWS_AS(ingest_csv(ragged, "label"), InputError);
}

TEST_CASE("point csv") {
  std::istringstream with_header("x,y\n0.1,0.2\n0.3,0.4\n");
  auto a = read_points_csv(with_header);
  CHECK(a.size() == 2);
  CHECK(a[1] == Point{0.3, 0.4});
  std::istringstream bare("0.1\n0.2\n\n0.3\n");
  CHECK(read_points_csv(bare).size() == 3);
  std::istringstream empty("x\n");
  CHECK_THROWS_AS(read_points_csv(empty), InputError);
  std::istringstream bad("0.1\nfoo\n");
  CHECK_THROWS_AS(read_points_csv(bad), InputError);
}

TEST_CASE("wilson interval") {
  CHECK(wilson_half_width(0, 100) > 0.0);
  CHECK(wilson_half_width(50, 100) == doctest::Approx(0.0960).epsilon(0.01));
  CHECK(wilson_half_width(5, 1000) < wilson_half_width(5, 100));
}

TEST_CASE("harness calibration with a constant detector") {
  Scenario s = small_scenario();
  DetectorFactory always_h1 = [](const TrialData&) {
    return std::vector<FittedDetector>{
        {"always_h1", [](std::span<const Point>) { return Hypothesis::h1; }, {}}};
  };
  auto curve = run_trials(s, always_h1);
  REQUIRE(curve.rows.size() == 2);
  for (const auto& r : curve.rows) {
    CHECK(r.error == 0.5);
    CHECK(r.false_alarm_rate() == 1.0);
    CHECK(r.miss_rate() == 0.0);
    CHECK(r.h0_trials == 12);
    CHECK(r.h1_trials == 12);
    CHECK(std::isnan(r.mean_bound));
  }
  CHECK(curve.find("always_h1", 20) != nullptr);
  CHECK(curve.find("always_h1", 21) == nullptr);
  std::ostringstream csv;
  curve.write_csv(csv);
  CHECK(csv.str().rfind("test,s,error,ci95,trials\n", 0) == 0);
  CHECK(csv.str().find("always_h1,5,0.5,") != std::string::npos);
}

TEST_CASE("error tally weights the two conditional rates equally") {
  Scenario s = small_scenario();
  s.trials = 30;
  // Wrong on H1 trials only when the trial index is a multiple of 3.
  DetectorFactory f = [](const TrialData& d) {
    const bool flip = d.trial % 3 == 0;
    return std::vector<FittedDetector>{
        {"rule", [truth = d.trial % 2 == 0 ? Hypothesis::h0 : Hypothesis::h1,
                  flip](std::span<const Point>) {
           if (truth == Hypothesis::h1 && flip) return Hypothesis::h0;
           return truth;
         },
         [](std::size_t) { return 0.25; }}};
  };
  auto curve = run_trials(s, f);
  const auto& r = curve.rows.front();
  // Odd trials 0..29 that are multiples of 3: 3, 9, 15, 21, 27.
  CHECK(r.misses == 5);
  CHECK(r.false_alarms == 0);
  CHECK(r.error == doctest::Approx(0.5 * 5.0 / 15.0));
  CHECK(r.mean_bound == 0.25);
  CHECK(r.ci95 == doctest::Approx(wilson_half_width(5, 30)));
}

TEST_CASE("standard detectors on an easy scenario") {
  Scenario s = small_scenario();
  s.batch_sizes = {10, 40};
  s.trials = 40;
  ProblemTemplate tpl;
  tpl.epsilon = 0.05;
  auto curve = run_scenario(s, tpl);
  auto names = curve.tests();
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "moment_robust");
  CHECK(names[1] == "direct_robust");
  for (const auto& r : curve.rows) {
    CHECK(r.error >= 0.0);
    CHECK(r.error <= 1.0);
    CHECK(r.trials == 40);
  }
  CHECK(curve.find("direct_robust", 40)->error <= 0.3);
  CHECK(curve.find("moment_robust", 40)->error <= 0.3);
  CHECK(std::isfinite(curve.find("direct_robust", 10)->mean_bound));
}

TEST_CASE("runs are identical across thread counts") {
  Scenario s = small_scenario();
  ProblemTemplate tpl;
  tpl.epsilon = 0.03;
  RunOptions one, four;
  four.threads = 4;
  auto a = run_scenario(s, tpl, one);
  auto b = run_scenario(s, tpl, four);
  std::ostringstream ca, cb;
  a.write_csv(ca);
  b.write_csv(cb);
  CHECK(ca.str() == cb.str());
}

TEST_CASE("indistinguishable samplers give chance-level error") {
  Scenario s;
  s.sampler0 = Sampler::uniform_box({0.0}, {1.0});
  s.sampler1 = Sampler::uniform_box({0.0}, {1.0});
  s.train0 = s.train1 = 20;
  s.batch_sizes = {20, 80};
  s.trials = 400;
  ProblemTemplate tpl;
  tpl.epsilon = 0.002;
  tpl.eta_factor = 0.25;
  auto curve = run_scenario(s, tpl, {4, 10});
  for (const auto& r : curve.rows) {
    CAPTURE(r.test);
    CAPTURE(r.s);
    CHECK(std::abs(r.error - 0.5) <= 3.0 * r.ci95);
  }
}

TEST_CASE("rejected trials are resampled then reported") {
  Scenario s = small_scenario();
  s.trials = 2;
  int calls = 0;
  DetectorFactory flaky = [&calls](const TrialData&) -> std::vector<FittedDetector> {
    if (++calls < 3) throw TrialRejected("try again");
    return {{"h0", [](std::span<const Point>) { return Hypothesis::h0; }, {}}};
  };
  auto curve = run_trials(s, flaky);
  CHECK(curve.rows.front().error == 0.5);

  DetectorFactory never = [](const TrialData&) -> std::vector<FittedDetector> {
    throw TrialRejected("never");
  };
  CHECK_THROWS_AS(run_trials(s, never), SolverError);
}

TEST_CASE("marginal approximation takes over above the grid cap") {
  Scenario s;
  s.sampler0 = Sampler::gaussian({0.0, 0.0, 0.0, 0.0}, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  s.sampler1 = Sampler::from_json({{"type", "gaussian"}, {"mean", {0.8, 0.8, 0.8, 0.8}}, {"var", 0.5}});
  s.batch_sizes = {20};
  s.trials = 20;
  ProblemTemplate tpl;
  tpl.epsilon = 0.02;
  auto curve = run_scenario(s, tpl, {2, 10});
  auto names = curve.tests();
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "moment_robust_marginal");
  REQUIRE(curve.notes.size() == 1);
  CHECK(curve.notes[0].find("per-axis") != std::string::npos);
}

TEST_CASE("scenario and template documents") {
  auto s = scenario_from_json({{"sampler0", {{"type", "uniform"}, {"lower", {0}}, {"upper", {1}}}},
                               {"sampler1", {{"type", "uniform"}, {"lower", {0}}, {"upper", {2}}}},
                               {"batch_sizes", {3, 4}},
                               {"trials", 10},
                               {"seed", 5},
                               {"normalization", {{"lower", {0}}, {"upper", {2}}}}});
  CHECK(s.batch_sizes == std::vector<std::size_t>{3, 4});
  CHECK(s.seed == 5);
  REQUIRE(s.normalization.has_value());
  CHECK_THROWS_AS(scenario_from_json({{"sampler0", {{"type", "uniform"}, {"lower", {0}}, {"upper", {1}}}}}),
                  InputError);
  CHECK_THROWS_AS(scenario_from_json({{"bogus", 1}}), InputError);

  auto t = problem_template_from_json({{"eta", 0.05}, {"epsilon", 0.1}});
  CHECK(t.eta == std::optional<double>(0.05));
  CHECK_THROWS_AS(problem_template_from_json({{"eta_factor", 1.5}}), InputError);
  CHECK_THROWS_AS(problem_template_from_json({{"epsilon", 0.0}}), InputError);
  CHECK_THROWS_AS(problem_template_from_json({{"radius", 0.1}}), InputError);
}

TEST_CASE("parallel_for reports the lowest failing index") {
  std::vector<int> seen(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { seen[i] = 1; });
  for (int v : seen) CHECK(v == 1);
  try {
    parallel_for(50, 4, [](std::size_t i) {
      if (i == 7 || i == 31) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "7");
  }
}
