#include "mrt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace mrt {

namespace {

constexpr double kPivotTol = 1e-9;          // ratio-test candidate threshold
constexpr double kSingularTol = 1e-11;      // refactorization pivot
constexpr double kDualTol = 1e-9;           // pricing
constexpr double kPrimalTol = 1e-9;         // bound feasibility
constexpr double kDegenerateStep = 1e-12;   // step length counted as degenerate
constexpr double kRatioTie = 1e-12;
constexpr double kMaxGap = 1e-7;

class NumericBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PhaseResult { optimal, unbounded };

struct CoreResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;  // structural values
  std::vector<double> y;  // row duals of the phase-2 basis
  std::size_t iterations = 0;
  bool bland = false;
};

// Bounded revised simplex on  A x + s = b  with one slack per row and optional
// artificials; B^-1 is kept explicitly and refreshed by Gauss-Jordan.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& options)
      : m_(lp.num_rows()), n_(lp.num_variables()), options_(options) {
    columns_.assign(n_, std::vector<double>(m_, 0.0));
    rhs_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& row = lp.rows[i];
      for (std::size_t j = 0; j < n_; ++j) columns_[j][i] = row.coefficients[j];
      rhs_[i] = row.rhs;
    }
    lo_.resize(n_ + m_);
    hi_.resize(n_ + m_);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp.bounds_of(j).lower;
      hi_[j] = lp.bounds_of(j).upper;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      switch (lp.rows[i].relation) {
        case Relation::less_equal: lo_[n_ + i] = 0.0; hi_[n_ + i] = kInfinity; break;
        case Relation::greater_equal: lo_[n_ + i] = -kInfinity; hi_[n_ + i] = 0.0; break;
        case Relation::equal: lo_[n_ + i] = 0.0; hi_[n_ + i] = 0.0; break;
      }
    }
    objective_ = lp.objective;
    limit_ = options.max_iterations ? options.max_iterations : 50 * (m_ + n_) + 10000;
  }

  CoreResult run() {
    initial_basis();
    CoreResult out;
    if (!art_row_.empty()) {
      std::vector<double> cost(total(), 0.0);
      for (std::size_t k = 0; k < art_row_.size(); ++k) cost[n_ + m_ + k] = -1.0;
      iterate(cost);
      double infeasibility = 0.0;
      for (std::size_t k = 0; k < art_row_.size(); ++k) infeasibility += x_[n_ + m_ + k];
      double scale = 1.0;
      for (double b : rhs_) scale = std::max(scale, std::abs(b));
      if (infeasibility > 1e-9 * scale) {
        out.status = LpStatus::infeasible;
        out.iterations = iterations_;
        out.bland = bland_used_;
        return out;
      }
      drive_out_artificials();
      for (std::size_t k = 0; k < art_row_.size(); ++k) {
        lo_[n_ + m_ + k] = 0.0;
        hi_[n_ + m_ + k] = 0.0;
        if (position_[n_ + m_ + k] < 0) x_[n_ + m_ + k] = 0.0;
      }
    }
    std::vector<double> cost(total(), 0.0);
    std::copy(objective_.begin(), objective_.end(), cost.begin());
    const PhaseResult r = iterate(cost);
    out.iterations = iterations_;
    out.bland = bland_used_;
    if (r == PhaseResult::unbounded) {
      out.status = LpStatus::unbounded;
      return out;
    }
    refactor();
    out.status = LpStatus::optimal;
    out.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    out.y = duals(cost);
    return out;
  }

 private:
  std::size_t total() const { return n_ + m_ + art_row_.size(); }

  bool is_artificial(std::size_t j) const { return j >= n_ + m_; }

  // Dense column of the working matrix.
  std::vector<double> column(std::size_t j) const {
    if (j < n_) return columns_[j];
    std::vector<double> c(m_, 0.0);
    if (j < n_ + m_) c[j - n_] = 1.0;
    else c[art_row_[j - n_ - m_]] = art_sign_[j - n_ - m_];
    return c;
  }

  double dot_column(std::span<const double> y, std::size_t j) const {
    if (j < n_) {
      const auto& c = columns_[j];
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += y[i] * c[i];
      return s;
    }
    if (j < n_ + m_) return y[j - n_];
    return art_sign_[j - n_ - m_] * y[art_row_[j - n_ - m_]];
  }

  // alpha = B^-1 A_j
  std::vector<double> ftran(std::size_t j) const {
    std::vector<double> alpha(m_, 0.0);
    if (j >= n_ && j < n_ + m_) {
      const std::size_t k = j - n_;
      for (std::size_t r = 0; r < m_; ++r) alpha[r] = binv_[r * m_ + k];
      return alpha;
    }
    if (j >= n_ + m_) {
      const std::size_t k = art_row_[j - n_ - m_];
      const double s = art_sign_[j - n_ - m_];
      for (std::size_t r = 0; r < m_; ++r) alpha[r] = s * binv_[r * m_ + k];
      return alpha;
    }
    const auto& c = columns_[j];
    for (std::size_t k = 0; k < m_; ++k) {
      if (c[k] == 0.0) continue;
      for (std::size_t r = 0; r < m_; ++r) alpha[r] += binv_[r * m_ + k] * c[k];
    }
    return alpha;
  }

  static double resting_value(double lo, double hi) {
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  }

  void initial_basis() {
    x_.assign(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) x_[j] = resting_value(lo_[j], hi_[j]);
    basis_.assign(m_, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      double residual = rhs_[i];
      for (std::size_t j = 0; j < n_; ++j) residual -= columns_[j][i] * x_[j];
      const std::size_t s = n_ + i;
      if (residual >= lo_[s] && residual <= hi_[s]) {
        x_[s] = residual;
        basis_[i] = s;
        continue;
      }
      x_[s] = std::clamp(residual, lo_[s], hi_[s]);
      const double left = residual - x_[s];
      art_row_.push_back(i);
      art_sign_.push_back(left >= 0.0 ? 1.0 : -1.0);
      x_.push_back(std::abs(left));
      basis_[i] = n_ + m_ + art_row_.size() - 1;
    }
    lo_.resize(total(), 0.0);
    hi_.resize(total(), kInfinity);
    position_.assign(total(), -1);
    for (std::size_t r = 0; r < m_; ++r) position_[basis_[r]] = static_cast<long>(r);
    refactor();
  }

  // Gauss-Jordan inverse of the basis with partial pivoting, then fresh x_B.
  void refactor() {
    std::vector<double> b(m_ * m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const auto col = column(basis_[r]);
      for (std::size_t i = 0; i < m_; ++i) b[i * m_ + r] = col[i];
    }
    std::vector<double> inv(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t piv = c;
      for (std::size_t i = c + 1; i < m_; ++i)
        if (std::abs(b[i * m_ + c]) > std::abs(b[piv * m_ + c])) piv = i;
      if (std::abs(b[piv * m_ + c]) < kSingularTol) throw NumericBreakdown("singular basis");
      if (piv != c) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(b[c * m_ + k], b[piv * m_ + k]);
          std::swap(inv[c * m_ + k], inv[piv * m_ + k]);
        }
      }
      const double d = b[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) {
        b[c * m_ + k] /= d;
        inv[c * m_ + k] /= d;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == c) continue;
        const double f = b[i * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          b[i * m_ + k] -= f * b[c * m_ + k];
          inv[i * m_ + k] -= f * inv[c * m_ + k];
        }
      }
    }
    // Row r of inv corresponds to basis position r after the column/row layout above.
    binv_ = std::move(inv);
    since_refactor_ = 0;

    std::vector<double> residual = rhs_;
    for (std::size_t j = 0; j < total(); ++j) {
      if (position_[j] >= 0 || x_[j] == 0.0) continue;
      const auto col = column(j);
      for (std::size_t i = 0; i < m_; ++i) residual[i] -= col[i] * x_[j];
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double v = 0.0;
      for (std::size_t k = 0; k < m_; ++k) v += binv_[r * m_ + k] * residual[k];
      x_[basis_[r]] = v;
    }
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    std::vector<double> y(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const double cb = cost[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t k = 0; k < m_; ++k) y[k] += cb * binv_[r * m_ + k];
    }
    return y;
  }

  void pivot(std::size_t row, std::size_t entering, const std::vector<double>& alpha) {
    const double p = alpha[row];
    for (std::size_t k = 0; k < m_; ++k) binv_[row * m_ + k] /= p;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == row || alpha[r] == 0.0) continue;
      const double f = alpha[r];
      for (std::size_t k = 0; k < m_; ++k) binv_[r * m_ + k] -= f * binv_[row * m_ + k];
    }
    position_[basis_[row]] = -1;
    basis_[row] = entering;
    position_[entering] = static_cast<long>(row);
    if (++since_refactor_ >= options_.refactor_interval) refactor();
  }

  // Pivots zero-level artificials out of the basis where a replacement exists.
  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (!is_artificial(basis_[r])) continue;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (position_[j] >= 0 || lo_[j] == hi_[j]) continue;
        const auto alpha = ftran(j);
        if (std::abs(alpha[r]) <= 1e-7) continue;
        const std::size_t leaving = basis_[r];
        pivot(r, j, alpha);
        x_[leaving] = 0.0;
        break;
      }
    }
    refactor();
  }

  PhaseResult iterate(const std::vector<double>& cost) {
    std::size_t phase_iterations = 0;
    std::size_t degenerate = 0;
    bool bland = false;
    const std::size_t bland_after = 3 * total();
    while (true) {
      if (phase_iterations >= limit_) throw NumericBreakdown("iteration limit reached");
      const auto y = duals(cost);

      // Pricing.
      std::size_t entering = total();
      double best = 0.0;
      int direction = 0;
      for (std::size_t j = 0; j < total(); ++j) {
        if (position_[j] >= 0 || lo_[j] == hi_[j]) continue;
        const double d = cost[j] - dot_column(y, j);
        const bool can_up = x_[j] < hi_[j] - kPrimalTol || !std::isfinite(hi_[j]);
        const bool can_down = x_[j] > lo_[j] + kPrimalTol || !std::isfinite(lo_[j]);
        int dir = 0;
        if (d > kDualTol && can_up) dir = 1;
        else if (d < -kDualTol && can_down) dir = -1;
        if (dir == 0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          direction = dir;
        }
      }
      if (entering == total()) return PhaseResult::optimal;

      const auto alpha = ftran(entering);
      // Ratio test: basic r moves at rate -direction * alpha_r.
      double theta = kInfinity;
      std::size_t leave_row = m_;
      double leave_value = 0.0;
      if (std::isfinite(lo_[entering]) && std::isfinite(hi_[entering]))
        theta = hi_[entering] - lo_[entering];
      for (std::size_t r = 0; r < m_; ++r) {
        if (std::abs(alpha[r]) <= kPivotTol) continue;
        const std::size_t b = basis_[r];
        const double rate = -direction * alpha[r];
        double step;
        double bound;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[b])) continue;
          bound = lo_[b];
          step = (x_[b] - lo_[b]) / -rate;
        } else {
          if (!std::isfinite(hi_[b])) continue;
          bound = hi_[b];
          step = (hi_[b] - x_[b]) / rate;
        }
        step = std::max(step, 0.0);
        bool take = step < theta - kRatioTie;
        if (!take && step <= theta + kRatioTie) {
          if (leave_row == m_) take = true;
          else if (bland) take = b < basis_[leave_row];
          else take = std::abs(alpha[r]) > std::abs(alpha[leave_row]);
        }
        if (take) {
          theta = std::min(theta, step);
          leave_row = r;
          leave_value = bound;
        }
      }
      if (!std::isfinite(theta)) return PhaseResult::unbounded;

      ++iterations_;
      ++phase_iterations;
      for (std::size_t r = 0; r < m_; ++r) x_[basis_[r]] -= direction * theta * alpha[r];
      x_[entering] += direction * theta;
      if (leave_row == m_) {
        // Bound flip.
        x_[entering] = direction > 0 ? hi_[entering] : lo_[entering];
      } else {
        const std::size_t leaving = basis_[leave_row];
        x_[leaving] = leave_value;
        pivot(leave_row, entering, alpha);
      }

      if (theta <= kDegenerateStep) {
        if (++degenerate > bland_after && !bland) {
          bland = true;
          bland_used_ = true;
        }
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  std::size_t m_, n_;
  SimplexOptions options_;
  std::size_t limit_ = 0;
  std::vector<std::vector<double>> columns_;
  std::vector<double> rhs_;
  std::vector<double> objective_;
  std::vector<double> lo_, hi_;
  std::vector<std::size_t> art_row_;
  std::vector<double> art_sign_;
  std::vector<double> x_;
  std::vector<std::size_t> basis_;
  std::vector<long> position_;
  std::vector<double> binv_;
  std::size_t since_refactor_ = 0;
  std::size_t iterations_ = 0;
  bool bland_used_ = false;
};

double row_activity(const LpRow& row, std::span<const double> x, double* magnitude) {
  double s = 0.0, mag = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    s += row.coefficients[j] * x[j];
    mag += std::abs(row.coefficients[j] * x[j]);
  }
  if (magnitude) *magnitude = mag;
  return s;
}

// Certificate from row duals y: valid signs are enforced (y >= 0 on <= rows,
// y <= 0 on >= rows for maximization), reduced costs recomputed from the data.
DualCertificate certificate(const LinearProgram& lp, std::vector<double> y,
                            std::span<const double> x) {
  DualCertificate cert;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    if (lp.rows[i].relation == Relation::less_equal) y[i] = std::max(y[i], 0.0);
    if (lp.rows[i].relation == Relation::greater_equal) y[i] = std::min(y[i], 0.0);
  }
  const std::size_t n = lp.num_variables();
  cert.reduced_costs.assign(lp.objective.begin(), lp.objective.end());
  double bound = 0.0;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    if (y[i] == 0.0) continue;
    bound += y[i] * lp.rows[i].rhs;
    for (std::size_t j = 0; j < n; ++j) cert.reduced_costs[j] -= y[i] * lp.rows[i].coefficients[j];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double d = cert.reduced_costs[j];
    const auto b = lp.bounds_of(j);
    const double edge = d > 0.0 ? b.upper : b.lower;
    if (std::isfinite(edge)) {
      bound += d * edge;
    } else if (std::abs(d) <= kDualTol) {
      // Round-off sized reduced cost on an unbounded side.
      bound += d * x[j];
    } else {
      bound = kInfinity;
      break;
    }
  }
  cert.row_duals = std::move(y);
  cert.bound = bound;
  return cert;
}

struct Scaling {
  std::vector<double> row;  // multiplies row i
  std::vector<double> col;  // x_j = col_j * x'_j
};

Scaling equilibrate(const LinearProgram& lp, LinearProgram& scaled) {
  const std::size_t m = lp.num_rows(), n = lp.num_variables();
  Scaling s{std::vector<double>(m, 1.0), std::vector<double>(n, 1.0)};
  for (std::size_t i = 0; i < m; ++i) {
    double big = 0.0;
    for (double a : lp.rows[i].coefficients) big = std::max(big, std::abs(a));
    if (big > 0.0) s.row[i] = 1.0 / big;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double big = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      big = std::max(big, std::abs(lp.rows[i].coefficients[j] * s.row[i]));
    if (big > 0.0) s.col[j] = 1.0 / big;
  }
  scaled = lp;
  scaled.bounds.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto b = lp.bounds_of(j);
    scaled.bounds[j] = {b.lower / s.col[j], b.upper / s.col[j]};
    scaled.objective[j] = lp.objective[j] * s.col[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    scaled.rows[i].rhs = lp.rows[i].rhs * s.row[i];
    for (std::size_t j = 0; j < n; ++j)
      scaled.rows[i].coefficients[j] = lp.rows[i].coefficients[j] * s.row[i] * s.col[j];
  }
  return s;
}

LpSolution finish(const LinearProgram& lp, CoreResult core) {
  LpSolution out;
  out.status = core.status;
  out.iterations = core.iterations;
  out.bland_engaged = core.bland;
  if (core.status != LpStatus::optimal) return out;

  const std::size_t n = lp.num_variables();
  for (std::size_t j = 0; j < n; ++j) {
    const auto b = lp.bounds_of(j);
    const double slack = kPrimalTol * (1.0 + std::abs(core.x[j]));
    if (core.x[j] < b.lower - slack || core.x[j] > b.upper + slack)
      throw NumericBreakdown("primal value outside its bounds");
    core.x[j] = std::clamp(core.x[j], b.lower, b.upper);
  }
  out.x = std::move(core.x);
  out.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) out.value += lp.objective[j] * out.x[j];
  if (!std::isfinite(out.value)) throw NumericBreakdown("non-finite objective");
  out.max_scaled_residual = max_scaled_residual(lp, out.x);
  if (out.max_scaled_residual > kFeasibilityTol) throw NumericBreakdown("row residual too large");
  out.dual = certificate(lp, std::move(core.y), out.x);
  out.duality_gap = (out.dual.bound - out.value) / (1.0 + std::abs(out.value));
  if (!(out.duality_gap <= kMaxGap)) throw NumericBreakdown("duality gap too large");
  return out;
}

}  // namespace

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

void LinearProgram::validate() const {
  const std::size_t n = objective.size();
  for (double c : objective)
    if (!std::isfinite(c)) throw InputError("LP objective has a non-finite coefficient");
  if (!bounds.empty() && bounds.size() != n)
    throw InputError("LP bounds do not match the number of variables");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].coefficients.size() != n) {
      std::ostringstream msg;
      msg << "LP row " << i << " has " << rows[i].coefficients.size() << " coefficients, expected "
          << n;
      throw InputError(msg.str());
    }
    for (double a : rows[i].coefficients)
      if (!std::isfinite(a)) throw InputError("LP row has a non-finite coefficient");
    if (!std::isfinite(rows[i].rhs)) throw InputError("LP row has a non-finite right-hand side");
  }
  for (const auto& b : bounds) {
    if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper ||
        b.lower == kInfinity || b.upper == -kInfinity)
      throw InputError("LP variable bounds are invalid");
  }
}

double max_scaled_residual(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (const auto& row : lp.rows) {
    double magnitude = 0.0;
    const double act = row_activity(row, x, &magnitude);
    double viol = 0.0;
    switch (row.relation) {
      case Relation::less_equal: viol = std::max(0.0, act - row.rhs); break;
      case Relation::greater_equal: viol = std::max(0.0, row.rhs - act); break;
      case Relation::equal: viol = std::abs(act - row.rhs); break;
    }
    worst = std::max(worst, viol / (1.0 + std::abs(row.rhs) + magnitude));
  }
  return worst;
}

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  lp.validate();
  std::string first_failure;
  try {
    Simplex simplex(lp, options);
    return finish(lp, simplex.run());
  } catch (const NumericBreakdown& e) {
    first_failure = e.what();
  }
  try {
    LinearProgram scaled;
    const Scaling s = equilibrate(lp, scaled);
    Simplex simplex(scaled, options);
    CoreResult core = simplex.run();
    if (core.status == LpStatus::optimal) {
      for (std::size_t j = 0; j < core.x.size(); ++j) core.x[j] *= s.col[j];
      for (std::size_t i = 0; i < core.y.size(); ++i) core.y[i] *= s.row[i];
    }
    LpSolution out = finish(lp, std::move(core));
    out.rescaled = true;
    return out;
  } catch (const NumericBreakdown& e) {
    throw SolverError(std::string("LP numeric breakdown (") + first_failure +
                      "); rescaled retry failed (" + e.what() + ")");
  }
}

void dump_lp(const LinearProgram& lp, std::ostream& out) {
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  out << "lp variables " << lp.num_variables() << " rows " << lp.num_rows() << "\n";
  out << "max";
  for (double c : lp.objective) out << ' ' << c;
  out << "\n";
  for (const auto& row : lp.rows) {
    out << "row";
    for (double a : row.coefficients) out << ' ' << a;
    switch (row.relation) {
      case Relation::less_equal: out << " <= "; break;
      case Relation::greater_equal: out << " >= "; break;
      case Relation::equal: out << " = "; break;
    }
    out << row.rhs << "\n";
  }
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto b = lp.bounds_of(j);
    out << "bound " << j << ' ' << b.lower << ' ' << b.upper << "\n";
  }
  out.precision(old_precision);
}

}  // namespace mrt
