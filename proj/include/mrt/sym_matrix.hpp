#pragma once

#include <span>
#include <vector>

#include "mrt/common.hpp"

namespace mrt {

/// Small dense symmetric matrix stored in full row-major form.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t order, double fill = 0.0)
      : order_(order), data_(order * order, fill) {}

  static SymMatrix identity(std::size_t order);
  static SymMatrix scalar(double value);
  static SymMatrix diagonal(std::span<const double> entries);
  /// Throws InputError unless rows form a square matrix symmetric to `tol`.
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows,
                             double tol = kSymmetryTol);

  std::size_t order() const { return order_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * order_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * order_ + j]; }

  double quadratic_form(std::span<const double> v) const;
  double max_abs() const;
  double frobenius_norm() const;
  /// Largest componentwise asymmetry |a_ij - a_ji|.
  double asymmetry() const;

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double factor);

  std::vector<std::vector<double>> to_rows() const;
  std::span<const double> data() const { return data_; }

 private:
  std::size_t order_ = 0;
  std::vector<double> data_;
};

SymMatrix operator-(SymMatrix lhs, const SymMatrix& rhs);

struct EigenDecomposition {
  std::vector<double> values;                // ascending
  std::vector<std::vector<double>> vectors;  // vectors[i] pairs with values[i]
};

/// Cyclic Jacobi eigensolver for small symmetric matrices (order <= 8).
/// Runs until the off-diagonal Frobenius norm is <= 1e-12 relative to max(1, ||A||_F).
EigenDecomposition eigen_sym(const SymMatrix& a);

/// max |lambda_i(a)|.
double spectral_norm(const SymMatrix& a);

inline constexpr std::size_t kMaxEigenOrder = 8;

}  // namespace mrt
