#include <cmath>
#include <limits>

#include "mrt/lp.hpp"

namespace mrt {

namespace {

// Gaussian elimination with partial pivoting on a small dense system.
std::vector<double> solve_small(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (!(std::abs(a[piv * n + c]) > 0.0)) throw SolverError("singular Newton system");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double v = b[c];
    for (std::size_t k = c + 1; k < n; ++k) v -= a[c * n + k] * b[k];
    b[c] = v / a[c * n + c];
  }
  return b;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Barrier {
  const LinearProgram& lp;
  std::vector<std::size_t> inequalities, equalities;
  std::vector<double> sign;  // +1 for >=, -1 for <=

  explicit Barrier(const LinearProgram& program) : lp(program) {
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
      switch (lp.rows[r].relation) {
        case Relation::equal:
          equalities.push_back(r);
          break;
        case Relation::greater_equal:
          inequalities.push_back(r);
          sign.push_back(1.0);
          break;
        case Relation::less_equal:
          inequalities.push_back(r);
          sign.push_back(-1.0);
          break;
      }
    }
  }

  double slack(std::size_t i, const std::vector<double>& x) const {
    const auto& row = lp.rows[inequalities[i]];
    return sign[i] * (dot(row.coefficients, x) - row.rhs);
  }

  // +inf outside the open feasible region.
  double value(const std::vector<double>& x) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double phi = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const auto b = lp.bounds_of(j);
      if (std::isfinite(b.lower)) {
        if (!(x[j] > b.lower)) return inf;
        phi -= std::log(x[j] - b.lower);
      }
      if (std::isfinite(b.upper)) {
        if (!(x[j] < b.upper)) return inf;
        phi -= std::log(b.upper - x[j]);
      }
    }
    for (std::size_t i = 0; i < inequalities.size(); ++i) {
      const double s = slack(i, x);
      if (!(s > 0.0)) return inf;
      phi -= std::log(s);
    }
    return phi;
  }
};

}  // namespace

CenterResult analytic_center(const LinearProgram& lp, std::vector<double> start,
                             const CenterOptions& options) {
  lp.validate();
  const std::size_t n = lp.num_variables();
  if (start.size() != n) throw InputError("starting point does not match the program");
  for (std::size_t j = 0; j < n; ++j) {
    const auto b = lp.bounds_of(j);
    if (!std::isfinite(b.lower) && !std::isfinite(b.upper))
      throw InputError("analytic center needs a finite bound on every variable");
  }
  const Barrier barrier(lp);
  if (!std::isfinite(barrier.value(start)))
    throw InputError("starting point is not strictly feasible");

  const std::size_t m = barrier.inequalities.size();
  const std::size_t q = barrier.equalities.size();
  CenterResult out;
  out.x = std::move(start);
  std::vector<double>& x = out.x;
  double phi = barrier.value(x);

  std::vector<double> d(n), g(n), s(m);
  std::vector<std::vector<double>> dinv_u(m, std::vector<double>(n));
  for (; out.iterations < options.max_iterations; ++out.iterations) {
    // Diagonal part from the bounds.
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = lp.bounds_of(j);
      d[j] = 0.0;
      g[j] = 0.0;
      if (std::isfinite(b.lower)) {
        const double r = 1.0 / (x[j] - b.lower);
        d[j] += r * r;
        g[j] -= r;
      }
      if (std::isfinite(b.upper)) {
        const double r = 1.0 / (b.upper - x[j]);
        d[j] += r * r;
        g[j] += r;
      }
    }
    // One rank-one term u_i u_i^T per inequality, u_i = sign a_i / s_i.
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = barrier.slack(i, x);
      const auto& a = lp.rows[barrier.inequalities[i]].coefficients;
      const double f = barrier.sign[i] / s[i];
      for (std::size_t j = 0; j < n; ++j) {
        g[j] -= f * a[j];
        dinv_u[i][j] = f * a[j] / d[j];
      }
    }
    std::vector<double> small(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& ai = lp.rows[barrier.inequalities[i]].coefficients;
      const double fi = barrier.sign[i] / s[i];
      for (std::size_t k = 0; k <= i; ++k) {
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += fi * ai[j] * dinv_u[k][j];
        small[i * m + k] = small[k * m + i] = v;
      }
      small[i * m + i] += 1.0;
    }
    // Woodbury: H^-1 v = D^-1 v - D^-1 U (I + U^T D^-1 U)^-1 U^T D^-1 v.
    auto apply_inverse = [&](const std::vector<double>& v) {
      std::vector<double> w(n);
      for (std::size_t j = 0; j < n; ++j) w[j] = v[j] / d[j];
      if (m == 0) return w;
      std::vector<double> z(m);
      for (std::size_t i = 0; i < m; ++i) {
        const auto& a = lp.rows[barrier.inequalities[i]].coefficients;
        z[i] = barrier.sign[i] / s[i] * dot(a, w);
      }
      const auto y = solve_small(small, z);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) w[j] -= dinv_u[i][j] * y[i];
      return w;
    };

    std::vector<double> dx = apply_inverse(g);
    for (double& v : dx) v = -v;
    if (q > 0) {
      std::vector<std::vector<double>> he(q);
      for (std::size_t e = 0; e < q; ++e)
        he[e] = apply_inverse(lp.rows[barrier.equalities[e]].coefficients);
      std::vector<double> sys(q * q), rhs(q);
      for (std::size_t e = 0; e < q; ++e) {
        const auto& row = lp.rows[barrier.equalities[e]];
        for (std::size_t f = 0; f < q; ++f) sys[e * q + f] = dot(row.coefficients, he[f]);
        // E dx = -(E x - b) also pulls back any drift in the equalities.
        rhs[e] = dot(row.coefficients, dx) + dot(row.coefficients, x) - row.rhs;
      }
      const auto nu = solve_small(sys, rhs);
      for (std::size_t e = 0; e < q; ++e)
        for (std::size_t j = 0; j < n; ++j) dx[j] -= nu[e] * he[e][j];
    }

    const double decrement = -dot(g, dx);
    if (decrement / 2.0 <= options.tolerance) {
      out.converged = true;
      break;
    }

    // Largest step that stays inside, then Armijo backtracking.
    double step = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = lp.bounds_of(j);
      if (dx[j] < 0.0 && std::isfinite(b.lower))
        step = std::min(step, 0.99 * (x[j] - b.lower) / -dx[j]);
      if (dx[j] > 0.0 && std::isfinite(b.upper))
        step = std::min(step, 0.99 * (b.upper - x[j]) / dx[j]);
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double rate =
          barrier.sign[i] * dot(lp.rows[barrier.inequalities[i]].coefficients, dx);
      if (rate < 0.0) step = std::min(step, 0.99 * s[i] / -rate);
    }
    std::vector<double> trial(n);
    bool moved = false;
    for (int k = 0; k < 60 && step > 0.0; ++k, step *= 0.5) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = x[j] + step * dx[j];
      const double value = barrier.value(trial);
      if (value <= phi - 0.25 * step * decrement) {
        x.swap(trial);
        phi = value;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // rounding floor; x is still strictly feasible
  }
  return out;
}

}  // namespace mrt
