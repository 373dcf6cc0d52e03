#pragma once

// Shared epigraph program behind the scalar and matrix LFD solvers.

#include <iosfwd>
#include <optional>
#include <vector>

#include "mrt/lfd.hpp"
#include "mrt/lp.hpp"

namespace mrt::detail {

/// lower <= sum_j p_j weights[j] <= upper; either side may be infinite.
struct MomentRow {
  std::vector<double> weights;
  double lower = -kInfinity;
  double upper = kInfinity;
};

struct EpigraphProgram {
  std::size_t support = 0;
  double prior0 = 0.5;
  std::vector<MomentRow> rows[2];
};

/// Columns [t_0..t_{N-1}, a_0.., b_0..] with pi0 p0 = t + a and pi1 p1 = t + b.
LinearProgram build_epigraph(const EpigraphProgram& program);

struct Recovered {
  std::vector<double> p[2];
  double gamma = 0.0;
  double tv = 0.0;
};

/// Masses from an optimal solution: small negatives clamped, renormalized, and
/// gamma / tv recomputed from the masses themselves.
Recovered recover(const EpigraphProgram& program, const LpSolution& solution);

/// Asks solve_epigraph for the analytic center of the near-optimal face.
/// `reference` holds one distribution per hypothesis that satisfies the
/// moment rows strictly, e.g. the empirical one moved to the support.
struct CenterRequest {
  double gap = 1e-4;
  std::vector<double> reference[2];
};

/// Solves the program and assembles an LfdSolution on `support`. With a center
/// request the masses are replaced by the analytic center of the optimal face
/// relaxed by `gap`, or left at the vertex when no interior start is found.
LfdSolution solve_epigraph(const EpigraphProgram& program, const std::vector<Point>& support,
                           std::optional<DiscreteGrid> grid, double epsilon,
                           std::ostream* lp_dump, const CenterRequest* center = nullptr);

/// psi_k evaluated on every support point, row-major [point][function];
/// matrix functions yield their full matrices.
std::vector<std::vector<SymMatrix>> evaluate_on_support(std::span<const MomentFunction> functions,
                                                        const std::vector<Point>& support,
                                                        std::size_t threads);

/// Support points of a problem: atoms, or the centers of the epsilon-net.
std::vector<Point> support_points(const MomentProblem& problem, double epsilon,
                                  const SolveOptions& options, std::optional<DiscreteGrid>& grid);

}  // namespace mrt::detail
