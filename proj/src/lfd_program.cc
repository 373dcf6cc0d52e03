#include "lfd_program.hpp"

#include <cmath>
#include <sstream>

#include "mrt/eval.hpp"

namespace mrt::detail {

LinearProgram build_epigraph(const EpigraphProgram& program) {
  const std::size_t n = program.support;
  const double prior[2] = {program.prior0, 1.0 - program.prior0};
  LinearProgram lp;
  lp.objective.assign(3 * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) lp.objective[j] = 1.0;

  // Column of the exclusive part of hypothesis h at point j.
  auto own = [n](std::size_t h, std::size_t j) { return (1 + h) * n + j; };

  for (std::size_t h = 0; h < 2; ++h) {
    LpRow total;
    total.coefficients.assign(3 * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      total.coefficients[j] = 1.0;
      total.coefficients[own(h, j)] = 1.0;
    }
    total.relation = Relation::equal;
    total.rhs = prior[h];
    lp.rows.push_back(std::move(total));
  }
  for (std::size_t h = 0; h < 2; ++h) {
    for (const auto& row : program.rows[h]) {
      if (row.weights.size() != n) throw InputError("moment row does not match the support");
      std::vector<double> coefficients(3 * n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        coefficients[j] = row.weights[j] / prior[h];
        coefficients[own(h, j)] = row.weights[j] / prior[h];
      }
      if (std::isfinite(row.upper))
        lp.rows.push_back({coefficients, Relation::less_equal, row.upper});
      if (std::isfinite(row.lower))
        lp.rows.push_back({std::move(coefficients), Relation::greater_equal, row.lower});
    }
  }
  return lp;
}

Recovered recover(const EpigraphProgram& program, const LpSolution& solution) {
  const std::size_t n = program.support;
  const double prior[2] = {program.prior0, 1.0 - program.prior0};
  Recovered out;
  for (std::size_t h = 0; h < 2; ++h) {
    out.p[h].resize(n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = (solution.x[j] + solution.x[(1 + h) * n + j]) / prior[h];
      out.p[h][j] = v > 0.0 ? v : 0.0;
      total += out.p[h][j];
    }
    if (!(total > 0.0)) throw SolverError("LP returned an empty distribution");
    for (double& v : out.p[h]) v /= total;
  }
  double overlap = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    overlap += std::min(prior[0] * out.p[0][j], prior[1] * out.p[1][j]);
  out.gamma = overlap;
  out.tv = total_variation(out.p[0], out.p[1]);
  return out;
}

namespace {

// Columns (t, a, b) of a point with masses p0, p1, splitting off half the
// common part so that every column is positive when the masses are.
std::vector<double> interior_columns(const EpigraphProgram& program,
                                     const std::vector<double>& p0,
                                     const std::vector<double>& p1) {
  const std::size_t n = program.support;
  const double prior[2] = {program.prior0, 1.0 - program.prior0};
  std::vector<double> x(3 * n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = prior[0] * p0[j], v = prior[1] * p1[j];
    x[j] = 0.5 * std::min(u, v);
    x[n + j] = u - x[j];
    x[2 * n + j] = v - x[j];
  }
  return x;
}

bool strictly_inside(const LinearProgram& lp, const std::vector<double>& x) {
  for (double v : x)
    if (!(v > 0.0)) return false;
  for (const auto& row : lp.rows) {
    if (row.relation == Relation::equal) continue;
    double a = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) a += row.coefficients[j] * x[j];
    const double s = row.relation == Relation::less_equal ? row.rhs - a : a - row.rhs;
    if (!(s > 0.0)) return false;
  }
  return true;
}

// Strictly feasible start: the vertex pulled slightly towards the reference
// pair mixed with uniform mass. nullopt when the reference is not interior.
std::optional<std::vector<double>> center_start(const EpigraphProgram& program,
                                                const LinearProgram& lp,
                                                const LpSolution& vertex,
                                                const CenterRequest& request) {
  const std::size_t n = program.support;
  std::vector<double> x_in;
  for (double rho = 0.5; rho > 1e-9; rho *= 0.5) {
    std::vector<double> p[2];
    for (std::size_t h = 0; h < 2; ++h) {
      p[h].resize(n);
      for (std::size_t j = 0; j < n; ++j)
        p[h][j] = (1.0 - rho) * request.reference[h][j] + rho / static_cast<double>(n);
    }
    auto x = interior_columns(program, p[0], p[1]);
    if (strictly_inside(lp, x)) {
      x_in = std::move(x);
      break;
    }
  }
  if (x_in.empty()) return std::nullopt;
  double overlap = 0.0;
  for (std::size_t j = 0; j < n; ++j) overlap += x_in[j];
  const double theta =
      std::min(0.5, 0.5 * request.gap / std::max(vertex.value - overlap, request.gap));
  std::vector<double> x(3 * n);
  for (std::size_t j = 0; j < 3 * n; ++j)
    x[j] = (1.0 - theta) * std::max(vertex.x[j], 0.0) + theta * x_in[j];
  return x;
}

}  // namespace

LfdSolution solve_epigraph(const EpigraphProgram& program, const std::vector<Point>& support,
                           std::optional<DiscreteGrid> grid, double epsilon,
                           std::ostream* lp_dump, const CenterRequest* center) {
  const LinearProgram lp = build_epigraph(program);
  if (lp_dump) dump_lp(lp, *lp_dump);
  const LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::infeasible)
    throw SolverError("least favorable program is infeasible; the radius is too small");
  if (sol.status == LpStatus::unbounded)
    throw SolverError("least favorable program is unbounded (internal error)");

  Recovered r = recover(program, sol);
  bool centered = false;
  if (center) {
    if (!(center->gap > 0.0)) throw InputError("center gap must be positive");
    for (const auto& ref : center->reference)
      if (ref.size() != program.support)
        throw InputError("center reference does not match the support");
    LinearProgram face = lp;
    face.rows.push_back({lp.objective, Relation::greater_equal, sol.value - center->gap});
    if (auto start = center_start(program, lp, sol, *center);
        start && strictly_inside(face, *start)) {
      LpSolution c;
      c.x = analytic_center(face, std::move(*start)).x;
      r = recover(program, c);
      centered = true;
    }
  }
  LfdSolution out;
  out.grid = std::move(grid);
  out.p0 = DiscreteDistribution(support, std::move(r.p[0]));
  out.p1 = DiscreteDistribution(support, std::move(r.p[1]));
  out.gamma = r.gamma;
  out.tv = r.tv;
  out.prior0 = program.prior0;
  out.epsilon = epsilon;
  out.lp_iterations = sol.iterations;
  out.lp_value = sol.value;
  out.centered = centered;
  return out;
}

std::vector<std::vector<SymMatrix>> evaluate_on_support(std::span<const MomentFunction> functions,
                                                        const std::vector<Point>& support,
                                                        std::size_t threads) {
  std::vector<std::vector<SymMatrix>> values(support.size());
  parallel_for(support.size(), threads, [&](std::size_t j) {
    values[j].reserve(functions.size());
    for (const auto& fn : functions) values[j].push_back(fn.evaluate(support[j]));
  });
  return values;
}

std::vector<Point> support_points(const MomentProblem& problem, double epsilon,
                                  const SolveOptions& options, std::optional<DiscreteGrid>& grid) {
  if (problem.space().is_finite()) {
    grid.reset();
    return problem.space().atoms();
  }
  grid = build_grid(problem.space().dim(), epsilon, options.grid_cap);
  return grid->centers();
}

}  // namespace mrt::detail
