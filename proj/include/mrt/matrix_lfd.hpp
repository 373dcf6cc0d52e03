#pragma once

// Least favorable distributions under matrix-valued moment constraints
//   -r I <= sum_j p_j Psi_k(z_j) - M_{i,k} <= r I
// enforced by spectral cutting planes over the LP core.

#include <vector>

#include "mrt/lfd.hpp"
#include "mrt/model.hpp"

namespace mrt {

enum class SpectralSide { lower, upper };

/// Accumulated cuts for one (hypothesis, function, side). A lower cut v gives
/// v^T M(p) v >= -r, an upper cut v^T M(p) v <= r.
struct SpectralConstraint {
  Hypothesis hypothesis = Hypothesis::h0;
  std::size_t function = 0;
  SpectralSide side = SpectralSide::lower;
  std::vector<std::vector<double>> cuts;  // unit vectors
};

struct MatrixSolveOptions {
  std::size_t max_rounds = 200;
  double violation_tol = 1e-7;
  double final_tol = 1e-6;
  SolveOptions solve;
};

struct MatrixLfdSolution {
  LfdSolution solution;
  std::vector<SpectralConstraint> constraints;
  std::size_t rounds = 0;
  double max_violation = 0.0;
};

/// Cutting-plane solve. Scalar functions are handled as 1x1 matrices. For
/// continuous spaces the program lives on the epsilon-net with radius
/// eta + epsilon (scaled by each function's Lipschitz factor); epsilon is
/// ignored for finite alphabets.
MatrixLfdSolution solve_matrix_lfd(const MomentProblem& problem, double epsilon = 0.0,
                                   const MatrixSolveOptions& options = {});

}  // namespace mrt
