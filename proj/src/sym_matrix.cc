#include "mrt/sym_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mrt {

SymMatrix SymMatrix::identity(std::size_t order) {
  SymMatrix m(order);
  for (std::size_t i = 0; i < order; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::scalar(double value) { return SymMatrix(1, value); }

SymMatrix SymMatrix::diagonal(std::span<const double> entries) {
  SymMatrix m(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
  return m;
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows, double tol) {
  const std::size_t n = rows.size();
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw InputError("matrix is not square");
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  if (m.asymmetry() > tol) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (asymmetry " << m.asymmetry() << ")";
    throw InputError(msg.str());
  }
  return m;
}

double SymMatrix::quadratic_form(std::span<const double> v) const {
  double total = 0.0;
  for (std::size_t i = 0; i < order_; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < order_; ++j) row += (*this)(i, j) * v[j];
    total += v[i] * row;
  }
  return total;
}

double SymMatrix::max_abs() const {
  double best = 0.0;
  for (double v : data_) best = std::max(best, std::abs(v));
  return best;
}

double SymMatrix::frobenius_norm() const {
  return std::sqrt(std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0));
}

double SymMatrix::asymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < order_; ++i)
    for (std::size_t j = i + 1; j < order_; ++j)
      worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
  return worst;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.order_ != order_) throw InputError("matrix order mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  if (other.order_ != order_) throw InputError("matrix order mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double factor) {
  for (double& v : data_) v *= factor;
  return *this;
}

std::vector<std::vector<double>> SymMatrix::to_rows() const {
  std::vector<std::vector<double>> rows(order_, std::vector<double>(order_));
  for (std::size_t i = 0; i < order_; ++i)
    for (std::size_t j = 0; j < order_; ++j) rows[i][j] = (*this)(i, j);
  return rows;
}

SymMatrix operator-(SymMatrix lhs, const SymMatrix& rhs) {
  lhs -= rhs;
  return lhs;
}

namespace {

double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) total += a[i * n + j] * a[i * n + j];
  return std::sqrt(total);
}

}  // namespace

EigenDecomposition eigen_sym(const SymMatrix& input) {
  const std::size_t n = input.order();
  if (n == 0) return {};
  if (n > kMaxEigenOrder) throw InputError("eigen_sym supports order <= 8");
  if (input.asymmetry() > 1e-10) throw InputError("eigen_sym: matrix is not symmetric");

  // Work on the symmetrized copy.
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5 * (input(i, j) + input(j, i));
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  const double target = 1e-12 * std::max(1.0, input.frobenius_norm());
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a, n) > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double s = t * c;
        // A <- A J, then A <- J^T A, with J the (p, q) rotation; V <- V J.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });

  EigenDecomposition out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (std::size_t idx : order) {
    out.values.push_back(a[idx * n + idx]);
    std::vector<double> column(n);
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      column[k] = v[k * n + idx];
      norm += column[k] * column[k];
    }
    norm = std::sqrt(norm);
    for (double& c : column) c /= norm;
    out.vectors.push_back(std::move(column));
  }
  return out;
}

double spectral_norm(const SymMatrix& a) {
  if (a.order() == 1) return std::abs(a(0, 0));
  const auto eig = eigen_sym(a);
  return std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
}

}  // namespace mrt
