#pragma once

// Batch tests built directly on empirical moments: the squared-distance batch
// test with its McDiarmid error bound, and the asymptotic Neyman-Pearson test.

#include <span>
#include <vector>

#include "mrt/model.hpp"

namespace mrt {

struct BatchTestSpec {
  std::vector<MomentFunction> functions;  // scalar only
  std::vector<double> nominal0;
  std::vector<double> nominal1;
  double eta = 0.0;
  /// max_k sup |psi_k|
  double value_bound = 1.0;

  /// Takes moments, radius and M = max_k value_bound_k from a scalar problem.
  /// Throws InputError if M is below an observed |psi_k| on the training data.
  static BatchTestSpec from_problem(const MomentProblem& problem);
};

/// Batch means of every moment function.
std::vector<double> batch_moments(const BatchTestSpec& spec, std::span<const Point> xs);

/// T = sum_k |mean_k - m0_k|^2 - sum_k |mean_k - m1_k|^2.
double batch_statistic(const BatchTestSpec& spec, std::span<const Point> xs);
double batch_statistic_from_moments(const BatchTestSpec& spec, std::span<const double> means);

/// H1 iff T >= 0.
Verdict batch_classify(const BatchTestSpec& spec, std::span<const Point> xs);

/// Closed-form worst-case bound over the H0 set on the error of batch_classify:
///   exp(-s (sum_k (|D_k| + 2 eta) |D_k|)^2 / (8 M^2 (sum_k |D_k|)^2)),  D = m1 - m0.
/// The expression is symmetric in the hypotheses, so it also covers the miss rate.
/// Note the + 2 eta: this is larger in the exponent than the supremum of the
/// per-distribution bound over the H0 set, see mcdiarmid_sup_bound.
double mcdiarmid_bound(const BatchTestSpec& spec, std::size_t s);

/// Supremum of the per-distribution bound over the H0 set, which puts the
/// moments eta away from m0 towards m1:
///   exp(-s (sum_k (|D_k| - 2 eta) |D_k|)^2 / (8 M^2 (sum_k |D_k|)^2)).
/// Returns 1 when the exponent's numerator is not positive.
double mcdiarmid_sup_bound(const BatchTestSpec& spec, std::size_t s);

/// Bound for one distribution with moments `true_moments` (under H0):
///   exp(-s G^2 / (8 M^2 (sum_k |D_k|)^2)),
///   G = sum_k (m1_k - E psi_k)^2 - (m0_k - E psi_k)^2.
/// Throws InputError when G <= 0.
double mcdiarmid_bound(const BatchTestSpec& spec, std::size_t s,
                       std::span<const double> true_moments);

struct NpTestSpec {
  MomentFunction function;
  double nominal0 = 0.0;  // E_{Q0}[psi0]
  double eta = 0.0;
  double alpha = 0.05;
  /// c = sup |psi0(x) - psi0(x')|
  double range = 1.0;

  /// First scalar function of the problem; c from its declared range bound.
  static NpTestSpec from_problem(const MomentProblem& problem, double alpha);
  void validate() const;
};

/// m0 + eta + sqrt(-c^2 ln(alpha) / (2n)).
double np_threshold(const NpTestSpec& spec, std::size_t n);

/// H1 iff the sample mean of psi0 is >= np_threshold.
Verdict np_classify(const NpTestSpec& spec, std::span<const Point> xs);

}  // namespace mrt
