#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mrt/lfd.hpp"
#include "mrt/moment_functions.hpp"
#include "oracles.hpp"

using namespace mrt;

namespace {

MomentProblem two_point(double m0, double m1, double eta, double prior0 = 0.5) {
  auto space = SampleSpace::finite({{0.0}, {1.0}});
  const double a[] = {m0}, b[] = {m1};
  return MomentProblem(space, {coordinate_mean(0)}, EmpiricalMoments::from_scalars(a, b), eta,
                       prior0);
}

MomentProblem line_problem(double m0, double m1, double eta) {
  const double a[] = {m0}, b[] = {m1};
  return MomentProblem(SampleSpace::continuous(1), {coordinate_mean(0)},
                       EmpiricalMoments::from_scalars(a, b), eta);
}

oracle::FiniteInstance two_point_instance(double z0, double z1, double m0, double m1, double eta) {
  oracle::FiniteInstance inst;
  inst.psi = {{z0, z1}};
  inst.m0 = {m0};
  inst.m1 = {m1};
  inst.eta = eta;
  return inst;
}

}  // namespace

TEST_CASE("grid geometry") {
  auto g1 = build_grid(1, 0.25);
  CHECK(g1.size() == 2);
  CHECK(g1.center(0)[0] == doctest::Approx(0.25));
  CHECK(g1.center(1)[0] == doctest::Approx(0.75));
  CHECK(g1.cell_of(std::vector<double>{0.4999}) == 0);
  CHECK(g1.cell_of(std::vector<double>{0.5}) == 1);
  CHECK(g1.cell_of(std::vector<double>{1.0}) == 1);
  CHECK(g1.cell_of(std::vector<double>{-3.0}) == 0);

  auto g2 = build_grid(2, 0.25);
  CHECK(g2.per_axis() == 3);
  CHECK(g2.size() == 9);

  auto g3 = build_grid(1, 0.5);
  CHECK(g3.size() == 1);
  CHECK(g3.center(0)[0] == doctest::Approx(0.5));

  CHECK_THROWS_AS(build_grid(2, 0.001, 1000), SolverError);
  CHECK_THROWS_AS(build_grid(1, 0.0), InputError);
}

TEST_CASE("grid covers the cube within epsilon") {
  oracle::Lcg g(8);
  for (std::size_t dim : {1u, 2u, 3u}) {
    for (double eps : {0.3, 0.11, 0.07}) {
      auto grid = build_grid(dim, eps);
      CHECK(grid.spacing() * std::sqrt(double(dim)) / 2.0 <= eps * (1 + 1e-12));
      // One fewer cell per axis would break the covering.
      CHECK(std::sqrt(double(dim)) / (2.0 * double(grid.per_axis() - 1)) > eps);
      for (int t = 0; t < 200; ++t) {
        Point x(dim);
        for (auto& v : x) v = g.uniform();
        const Point c = grid.center(grid.cell_of(x));
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d += (x[i] - c[i]) * (x[i] - c[i]);
        CHECK(std::sqrt(d) <= eps + 1e-12);
        auto [lo, hi] = grid.cell_box(grid.cell_of(x));
        for (std::size_t i = 0; i < dim; ++i) {
          CHECK(x[i] >= lo[i] - 1e-12);
          CHECK(x[i] <= hi[i] + 1e-12);
        }
      }
      CHECK(grid.cell_volume() * double(grid.size()) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("finite two-point anchors") {
  auto s = solve_finite(two_point(0.0, 1.0, 0.25));
  CHECK(s.gamma == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(s.p0.mass()[0] == doctest::Approx(0.75));
  CHECK(s.p0.mass()[1] == doctest::Approx(0.25));
  CHECK(s.p1.mass()[0] == doctest::Approx(0.25));
  CHECK(s.p1.mass()[1] == doctest::Approx(0.75));
  CHECK(std::abs(s.gamma - oracle::two_point_gamma(two_point_instance(0, 1, 0, 1, 0.25))) < 1e-9);

  auto t = solve_finite(two_point(0.2, 0.8, 0.1));
  CHECK(std::abs(t.gamma - 0.3) <= 1e-8);
  CHECK(std::abs(t.gamma - oracle::two_point_gamma(two_point_instance(0, 1, 0.2, 0.8, 0.1))) < 1e-9);

  CHECK_THROWS_AS(two_point(0.5, 0.5, 0.1), InputError);
}

TEST_CASE("finite solutions are feasible and satisfy the TV identity") {
  oracle::Lcg g(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + g.integer(0, 3);
    std::vector<Point> atoms;
    for (std::size_t j = 0; j < n; ++j) atoms.push_back({double(j) / double(n - 1)});
    auto space = SampleSpace::finite(atoms);
    std::vector<double> v1(n), v2(n);
    for (std::size_t j = 0; j < n; ++j) {
      v1[j] = g.uniform();
      v2[j] = g.uniform();
    }
    std::vector<MomentFunction> fs{tabulated(space, v1), tabulated(space, v2)};
    std::vector<Point> t0, t1;
    for (int i = 0; i < 5; ++i) t0.push_back(atoms[g.integer(0, int(n) - 1)]);
    for (int i = 0; i < 5; ++i) t1.push_back(atoms[g.integer(0, int(n) - 1)]);
    const auto m = empirical_moments(t0, t1, fs, space);
    double em = 0.0;
    try {
      em = eta_max(m, fs);
    } catch (const InputError&) {
      continue;
    }
    auto p = MomentProblem::from_training(space, fs, t0, t1, 0.8 * em * g.uniform() + 1e-3);
    auto s = solve_finite(p);
    CAPTURE(trial);
    CHECK(contains(p, s.p0, Hypothesis::h0, 0.0, 1e-8));
    CHECK(contains(p, s.p1, Hypothesis::h1, 0.0, 1e-8));
    CHECK(std::abs(s.gamma - 0.5 * (1.0 - s.tv)) <= 1e-9);
    CHECK(std::abs(s.tv - total_variation(s.p0.mass(), s.p1.mass())) <= 1e-12);
    // Empirical distributions are feasible, so the optimum dominates their overlap.
    std::vector<double> q0(n, 0.0), q1(n, 0.0);
    for (const auto& x : t0) q0[*space.atom_index(x)] += 0.2;
    for (const auto& x : t1) q1[*space.atom_index(x)] += 0.2;
    CHECK(s.gamma >= 0.5 * (1.0 - total_variation(q0, q1)) - 1e-9);
  }
}

TEST_CASE("unequal priors weight the overlap") {
  for (double pi0 : {0.3, 0.7}) {
    auto s = solve_finite(two_point(0.2, 0.8, 0.1, pi0));
    // Grid oracle over (p0(1), p1(1)) with p0(1) in [0.1, 0.3], p1(1) in [0.7, 0.9].
    double best = 0.0;
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; j <= 1000; ++j) {
        const double a = i / 1000.0, b = j / 1000.0;
        if (std::abs(a - 0.2) > 0.1 + 1e-12 || std::abs(b - 0.8) > 0.1 + 1e-12) continue;
        best = std::max(best, std::min(pi0 * (1 - a), (1 - pi0) * (1 - b)) +
                                  std::min(pi0 * a, (1 - pi0) * b));
      }
    CHECK(s.gamma == doctest::Approx(best).epsilon(1e-9));
    CHECK(s.prior0 == pi0);
  }
}

TEST_CASE("relaxed two-cell instance") {
  // Grid {0.25, 0.75}, radius eta + epsilon = 0.35.
  auto p = line_problem(0.1, 0.9, 0.1);
  auto s = solve_relaxed(p, 0.25);
  REQUIRE(s.grid.has_value());
  CHECK(s.grid->size() == 2);
  const double expected = oracle::two_point_gamma(two_point_instance(0.25, 0.75, 0.1, 0.9, 0.35));
  CHECK(s.gamma == doctest::Approx(expected).epsilon(1e-9));
  CHECK(s.gamma == doctest::Approx(0.4));
  CHECK(contains(p, s.p0, Hypothesis::h0, 0.25, 1e-8));
  CHECK(contains(p, s.p1, Hypothesis::h1, 0.25, 1e-8));
  CHECK(s.epsilon == 0.25);

  CHECK_THROWS_AS(solve_relaxed(p, 0.3), InputError);
  CHECK_THROWS_AS(solve_relaxed(p, 0.0), InputError);
  CHECK_THROWS_AS(solve_finite(p), InputError);
  CHECK_THROWS_AS(solve_relaxed(two_point(0.2, 0.8, 0.1), 0.1), InputError);
}

TEST_CASE("relaxed solutions dominate the unrelaxed program on a finer lattice") {
  // Reference: the radius-eta program restricted to a fine lattice. Every such
  // distribution maps to a feasible relaxed one on a coarser grid by moving
  // each atom to its cell center.
  auto p = line_problem(0.2, 0.8, 0.05);
  std::vector<Point> fine;
  for (int j = 0; j < 200; ++j) fine.push_back({(j + 0.5) / 200.0});
  const double m0[] = {0.2}, m1[] = {0.8};
  MomentProblem ref(SampleSpace::finite(fine), {coordinate_mean(0)},
                    EmpiricalMoments::from_scalars(m0, m1), 0.05);
  const double g_ref = solve_finite(ref).gamma;
  for (double eps : {1.0 / 6.0, 1.0 / 18.0, 1.0 / 54.0}) {
    auto s = solve_relaxed(p, eps);
    CHECK(s.gamma >= g_ref - 1e-9);
  }
}

TEST_CASE("smoothing spreads masses over cells") {
  LfdSolution sol;
  sol.grid = build_grid(1, 0.25);
  sol.p0 = DiscreteDistribution(sol.grid->centers(), {0.5, 0.5});
  sol.p1 = DiscreteDistribution(sol.grid->centers(), {1.0, 0.0});
  auto t = smooth(sol);
  CHECK(t.density(Hypothesis::h0)[0] == doctest::Approx(1.0));
  CHECK(t.density(Hypothesis::h0)[1] == doctest::Approx(1.0));
  CHECK(t.density(Hypothesis::h1)[0] == doctest::Approx(2.0));
  CHECK(t.density(Hypothesis::h1)[1] == 0.0);
  CHECK(t.total_mass(Hypothesis::h0) == doctest::Approx(1.0));
  CHECK(t.total_mass(Hypothesis::h1) == doctest::Approx(1.0));
  CHECK(t.total_variation() == doctest::Approx(0.5));
  CHECK(total_variation(sol.p0.mass(), sol.p1.mass()) == doctest::Approx(0.5));

  LfdSolution finite;
  CHECK_THROWS_AS(smooth(finite), InputError);
}

TEST_CASE("smoothed relaxed solutions integrate to one and keep the TV") {
  auto p = MomentProblem::from_training(SampleSpace::continuous(2), mean_and_second_moments(2),
                                        {{0.1, 0.2}, {0.3, 0.2}, {0.2, 0.4}},
                                        {{0.8, 0.7}, {0.6, 0.9}, {0.9, 0.8}}, 0.03);
  auto s = solve_relaxed(p, 0.1);
  auto t = smooth(s);
  CHECK(std::abs(t.total_mass(Hypothesis::h0) - 1.0) <= 1e-9);
  CHECK(std::abs(t.total_mass(Hypothesis::h1) - 1.0) <= 1e-9);
  CHECK(std::abs(t.total_variation() - s.tv) <= 1e-12);
  CHECK(std::abs(s.gamma - 0.5 * (1.0 - s.tv)) <= 1e-9);
  CHECK(contains(p, s.p0, Hypothesis::h0, 0.1, 1e-8));
  CHECK(contains(p, s.p1, Hypothesis::h1, 0.1, 1e-8));
  // The empirical pair projected onto the grid is feasible; gamma dominates it.
  std::vector<double> q0(s.grid->size(), 0.0), q1(s.grid->size(), 0.0);
  for (const auto& x : p.training(Hypothesis::h0)) q0[s.grid->cell_of(x)] += 1.0 / 3.0;
  for (const auto& x : p.training(Hypothesis::h1)) q1[s.grid->cell_of(x)] += 1.0 / 3.0;
  CHECK(s.gamma >= 0.5 * (1.0 - total_variation(q0, q1)) - 1e-9);
}

TEST_CASE("likelihood ratio test conventions") {
  auto grid = build_grid(1, 0.25);
  auto t = RobustTest::on_grid(grid, {0.5, 1.5}, {1.5, 0.5}, 0.5);
  auto v = t.classify(std::vector<double>{0.1});
  CHECK(v.decision == Hypothesis::h1);
  CHECK(v.statistic == doctest::Approx(std::log(3.0)));
  CHECK(t.classify(std::vector<double>{0.9}).decision == Hypothesis::h0);

  std::vector<Point> cancel{{0.1}, {0.9}};
  auto b = t.classify_batch(cancel);
  CHECK(b.statistic == doctest::Approx(0.0));
  CHECK(b.decision == Hypothesis::h1);

  auto flat = RobustTest::on_grid(grid, {1.0, 1.0}, {1.0, 1.0}, 0.5);
  CHECK(flat.classify(std::vector<double>{0.3}).statistic == 0.0);
  CHECK(flat.classify(std::vector<double>{0.3}).decision == Hypothesis::h1);

  auto zeros = RobustTest::on_grid(grid, {2.0, 0.0}, {0.0, 2.0}, 0.5);
  CHECK(zeros.classify(std::vector<double>{0.2}).statistic == -kInfinity);
  CHECK(zeros.classify(std::vector<double>{0.2}).decision == Hypothesis::h0);
  CHECK(zeros.classify(std::vector<double>{0.7}).statistic == kInfinity);
  CHECK(zeros.classify(std::vector<double>{0.7}).decision == Hypothesis::h1);
  std::vector<Point> both{{0.2}, {0.7}};
  CHECK(zeros.classify_batch(both).statistic == 0.0);
  CHECK(zeros.classify_batch(both).decision == Hypothesis::h1);

  auto empty = RobustTest::on_grid(grid, {0.0, 2.0}, {0.0, 2.0}, 0.5);
  CHECK(empty.classify(std::vector<double>{0.2}).statistic == 0.0);
  CHECK(empty.classify(std::vector<double>{0.2}).decision == Hypothesis::h1);

  CHECK_THROWS_AS(t.classify_batch(std::vector<Point>{}), InputError);
  CHECK_THROWS_AS(RobustTest::on_grid(grid, {1.0}, {1.0, 1.0}, 0.5), InputError);
}

TEST_CASE("prior term enters once per decision") {
  auto grid = build_grid(1, 0.25);
  auto t = RobustTest::on_grid(grid, {0.5, 1.5}, {1.5, 0.5}, 0.8);
  oracle::Lcg g(4);
  for (int i = 0; i < 20; ++i) {
    const Point x{g.uniform()};
    const auto one = t.classify(x);
    const auto batch = t.classify_batch(std::vector<Point>{x});
    CHECK(one.statistic == batch.statistic);
    CHECK(one.decision == batch.decision);
  }
  std::vector<Point> xs{{0.1}, {0.2}, {0.9}};
  const double expected = std::log(3.0) + std::log(3.0) - std::log(3.0) + std::log(0.2 / 0.8);
  CHECK(t.classify_batch(xs).statistic == doctest::Approx(expected));
}

TEST_CASE("finite tests use atom masses") {
  auto s = solve_finite(two_point(0.0, 1.0, 0.25));
  auto t = robust_test(s);
  CHECK_FALSE(t.has_grid());
  CHECK(t.classify(std::vector<double>{1.0}).statistic == doctest::Approx(std::log(3.0)));
  CHECK(t.classify(std::vector<double>{0.1}).decision == Hypothesis::h0);
  CHECK(t.total_mass(Hypothesis::h0) == doctest::Approx(1.0));
}

TEST_CASE("g curve is nondecreasing") {
  auto p = two_point(0.2, 0.8, 0.1);
  std::vector<double> etas{0.02, 0.06, 0.1, 0.14, 0.18, 0.22, 0.26};
  auto curve = g_curve(p, etas, 0.0);
  REQUIRE(curve.size() == etas.size());
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second >= curve[i - 1].second - 1e-9);
  // Closed form on two atoms: 2 gamma = 1 - (0.6 - 2 eta).
  for (const auto& [eta, g] : curve) CHECK(g == doctest::Approx(0.4 + 2.0 * eta));

  auto q = line_problem(0.2, 0.8, 0.1);
  std::vector<double> e2{0.05, 0.1, 0.15};
  auto c2 = g_curve(q, e2, 0.05);
  for (std::size_t i = 1; i < c2.size(); ++i) CHECK(c2[i].second >= c2[i - 1].second - 1e-9);
}

TEST_CASE("lp dump is written on request") {
  std::ostringstream out;
  SolveOptions opts;
  opts.lp_dump = &out;
  solve_finite(two_point(0.0, 1.0, 0.25), opts);
  CHECK(out.str().find("lp variables 6") != std::string::npos);
}

TEST_CASE("matrix functions are refused by the scalar solvers") {
  auto space = SampleSpace::finite({{0.0}, {1.0}});
  std::vector<MomentFunction> fs{diagonal({coordinate_mean(0), coordinate_mean(0)})};
  auto p = MomentProblem::from_training(space, fs, {{0.0}}, {{1.0}}, 0.1);
  CHECK_THROWS_AS(solve_finite(p), InputError);
}

TEST_CASE("LogRatio arithmetic") {
  LogRatio a{1, 2.0}, b{-1, -5.0};
  a += b;
  CHECK(a.infinite == 0);
  CHECK(a.value() == doctest::Approx(-3.0));
  CHECK(LogRatio{2, -100.0}.value() == kInfinity);
  CHECK(LogRatio{-1, 100.0}.value() == -kInfinity);
}

TEST_CASE("centered least favorable pairs") {
  std::vector<Point> t0{{0.1}, {0.2}, {0.35}}, t1{{0.7}, {0.8}, {0.95}};
  auto p = MomentProblem::from_training(SampleSpace::continuous(1), mean_and_second_moments(1),
                                        t0, t1, 0.02);
  SolveOptions opts;
  opts.selection = LfdSelection::center;
  const double eps = 0.02;
  auto vertex = solve_relaxed(p, eps);
  auto center = solve_relaxed(p, eps, opts);
  CHECK_FALSE(vertex.centered);
  REQUIRE(center.centered);
  CHECK(center.lp_value == doctest::Approx(vertex.lp_value).epsilon(1e-12));
  CHECK(center.gamma <= vertex.gamma + 1e-12);
  CHECK(center.gamma >= vertex.gamma - opts.center_gap);
  CHECK(std::abs(center.gamma - 0.5 * (1.0 - center.tv)) <= 1e-12);
  // Every cell gets mass and the pair stays in the relaxed sets.
  std::size_t vertex_support = 0;
  for (std::size_t j = 0; j < center.p0.size(); ++j) {
    CHECK(center.p0.mass()[j] > 0.0);
    CHECK(center.p1.mass()[j] > 0.0);
    vertex_support += vertex.p0.mass()[j] > 0.0 || vertex.p1.mass()[j] > 0.0;
  }
  CHECK(vertex_support < center.p0.size());
  CHECK(contains(p, center.p0, Hypothesis::h0, eps, 1e-9));
  CHECK(contains(p, center.p1, Hypothesis::h1, eps, 1e-9));

  // Finite alphabets take the same path with the empirical masses as reference.
  auto space = SampleSpace::finite({{0.0}, {0.5}, {1.0}});
  auto finite = MomentProblem::from_training(space, {coordinate_mean(0)}, {{0.0}, {0.5}},
                                             {{1.0}, {1.0}, {0.5}}, 0.1);
  auto fv = solve_finite(finite);
  auto fc = solve_finite(finite, opts);
  CHECK(fc.centered);
  CHECK(fc.gamma >= fv.gamma - opts.center_gap);
  CHECK(contains(finite, fc.p0, Hypothesis::h0, 0.0, 1e-9));
  // Without training data there is no interior reference: the vertex is kept.
  CHECK_FALSE(solve_finite(two_point(0.2, 0.8, 0.1), opts).centered);

  CHECK(lfd_selection_from_string("center") == LfdSelection::center);
  CHECK_THROWS_AS(lfd_selection_from_string("middle"), InputError);
}
