#pragma once

// Dense bounded-variable revised simplex.
//
//   maximize    c . x
//   subject to  a_i . x  {<=, =, >=}  b_i
//               lower_j <= x_j <= upper_j
//
// Two-phase method with one artificial variable per row that the initial slack
// basis cannot absorb. Dantzig pricing; Bland's rule takes over once the number
// of consecutive degenerate pivots exceeds three times the number of columns.

#include <iosfwd>
#include <span>
#include <vector>

#include "mrt/common.hpp"

namespace mrt {

enum class Relation { less_equal, equal, greater_equal };

struct LpRow {
  std::vector<double> coefficients;
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

struct VariableBounds {
  double lower = 0.0;
  double upper = kInfinity;
};

struct LinearProgram {
  std::vector<double> objective;
  std::vector<LpRow> rows;
  /// Empty means [0, inf) for every variable.
  std::vector<VariableBounds> bounds;

  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_rows() const { return rows.size(); }
  VariableBounds bounds_of(std::size_t j) const {
    return bounds.empty() ? VariableBounds{} : bounds[j];
  }

  /// Throws InputError on ragged rows, NaN/inf coefficients or inverted bounds.
  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded };

const char* to_string(LpStatus status);

/// Dual multipliers and reduced costs, re-derived from the original program data.
struct DualCertificate {
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
  /// b . y + sum_j max(d_j lower_j, d_j upper_j): an upper bound on the optimum.
  double bound = kInfinity;
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool bland_engaged = false;
  bool rescaled = false;
  DualCertificate dual;
  /// Largest row violation divided by (1 + |b_i| + sum_j |a_ij x_j|).
  double max_scaled_residual = 0.0;
  /// (dual bound - value) / (1 + |value|).
  double duality_gap = 0.0;
};

struct SimplexOptions {
  std::size_t max_iterations = 0;  // 0: 50 (rows + columns) + 10000 per phase
  std::size_t refactor_interval = 64;
};

/// Returns infeasible/unbounded as statuses. Numeric breakdown (basis pivot
/// below 1e-11, failed re-verification) triggers one retry on an equilibrated
/// copy of the program; a second failure throws SolverError.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

struct CenterOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-10;  // half the squared Newton decrement
};

struct CenterResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Analytic center of the feasible region: minimizes minus the sum of the logs
/// of every inequality slack and finite bound gap, keeping equality rows. The
/// objective is ignored. `start` must satisfy the inequalities and bounds
/// strictly; every variable needs a finite bound. Damped Newton with the
/// Hessian split as diagonal plus one rank-one term per inequality row, so the
/// cost per step is linear in the number of variables. The last iterate is
/// strictly feasible even when the iteration cap is hit.
CenterResult analytic_center(const LinearProgram& lp, std::vector<double> start,
                             const CenterOptions& options = {});

/// Row feasibility measured directly on the program data.
double max_scaled_residual(const LinearProgram& lp, std::span<const double> x);

/// Plain-text dump, one row per line, for cross-checking with external solvers.
void dump_lp(const LinearProgram& lp, std::ostream& out);

}  // namespace mrt
