#include "mrt/matrix_lfd.hpp"

#include <cmath>
#include <sstream>

#include "lfd_program.hpp"

namespace mrt {

namespace {

double cut_weight(const SymMatrix& m, const std::vector<double>& v) { return m.quadratic_form(v); }

}  // namespace

MatrixLfdSolution solve_matrix_lfd(const MomentProblem& problem, double epsilon,
                                   const MatrixSolveOptions& options) {
  const bool finite = problem.space().is_finite();
  const double eps = finite ? 0.0 : epsilon;
  if (!finite) {
    if (!(eps > 0.0)) throw InputError("epsilon must be positive for a continuous space");
    if (!(problem.eta() + eps < problem.eta_max())) {
      std::ostringstream msg;
      msg << "eta + epsilon = " << problem.eta() + eps << " must stay below eta_max = "
          << problem.eta_max();
      throw InputError(msg.str());
    }
  }
  std::optional<DiscreteGrid> grid;
  const auto support = detail::support_points(problem, eps, options.solve, grid);
  const auto functions = problem.functions();
  const auto values = detail::evaluate_on_support(functions, support, options.solve.threads);
  const std::size_t n = support.size();

  MatrixLfdSolution out;
  for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
    for (std::size_t k = 0; k < functions.size(); ++k) {
      for (SpectralSide side : {SpectralSide::lower, SpectralSide::upper}) {
        SpectralConstraint c{h, k, side, {}};
        for (std::size_t i = 0; i < functions[k].order(); ++i) {
          std::vector<double> e(functions[k].order(), 0.0);
          e[i] = 1.0;
          c.cuts.push_back(std::move(e));
        }
        out.constraints.push_back(std::move(c));
      }
    }
  }

  auto row_for = [&](const SpectralConstraint& c, const std::vector<double>& v) {
    detail::MomentRow row;
    row.weights.resize(n);
    for (std::size_t j = 0; j < n; ++j) row.weights[j] = cut_weight(values[j][c.function], v);
    const double center = cut_weight(problem.empirical().matrix(c.hypothesis, c.function), v);
    const double r = problem.radius(c.function, eps);
    if (c.side == SpectralSide::lower) row.lower = center - r;
    else row.upper = center + r;
    return row;
  };

  for (std::size_t round = 0; round < options.max_rounds; ++round) {
    detail::EpigraphProgram program;
    program.support = n;
    program.prior0 = problem.prior0();
    for (const auto& c : out.constraints)
      for (const auto& v : c.cuts) program.rows[index(c.hypothesis)].push_back(row_for(c, v));

    LfdSolution sol = detail::solve_epigraph(program, support, grid, eps,
                                             round == 0 ? options.solve.lp_dump : nullptr);
    out.solution.round_values.push_back(sol.lp_value);
    out.rounds = round + 1;

    double worst = -kInfinity;
    bool added = false;
    for (auto& c : out.constraints) {
      const auto& p = c.hypothesis == Hypothesis::h0 ? sol.p0 : sol.p1;
      SymMatrix gap(functions[c.function].order());
      for (std::size_t j = 0; j < n; ++j) {
        if (p.mass()[j] == 0.0) continue;
        SymMatrix term = values[j][c.function];
        term *= p.mass()[j];
        gap += term;
      }
      gap -= problem.empirical().matrix(c.hypothesis, c.function);
      const auto eig = eigen_sym(gap);
      const double r = problem.radius(c.function, eps);
      const double violation = c.side == SpectralSide::lower ? -eig.values.front() - r
                                                             : eig.values.back() - r;
      worst = std::max(worst, violation);
      if (violation > options.violation_tol) {
        c.cuts.push_back(c.side == SpectralSide::lower ? eig.vectors.front() : eig.vectors.back());
        ++out.solution.cuts_added;
        added = true;
      }
    }
    out.max_violation = worst;
    if (!added) {
      if (worst > options.final_tol) {
        std::ostringstream msg;
        msg << "spectral constraints violated by " << worst << " after " << out.rounds
            << " rounds";
        throw SolverError(msg.str());
      }
      auto round_values = std::move(out.solution.round_values);
      const auto cuts = out.solution.cuts_added;
      out.solution = std::move(sol);
      out.solution.round_values = std::move(round_values);
      out.solution.cuts_added = cuts;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "cutting-plane loop hit the cap of " << options.max_rounds
      << " rounds with max spectral violation " << out.max_violation;
  throw SolverError(msg.str());
}

}  // namespace mrt
