#include "mrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mrt {

// ---------------------------------------------------------------------------
// Normalization

Normalization::Normalization(std::vector<AxisMap> axes) : axes_(std::move(axes)) {
  for (const auto& a : axes_)
    if (!(a.scale > 0.0) || !std::isfinite(a.offset) || !std::isfinite(a.scale))
      throw InputError("normalization scale must be positive and finite");
}

Normalization Normalization::identity(std::size_t dim) {
  return Normalization(std::vector<AxisMap>(dim, AxisMap{0.0, 1.0}));
}

Normalization Normalization::from_bounds(std::span<const double> lower,
                                         std::span<const double> upper) {
  if (lower.size() != upper.size() || lower.empty())
    throw InputError("normalization bounds must be non-empty and of equal length");
  std::vector<AxisMap> axes;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(upper[i] > lower[i])) throw InputError("normalization upper bound must exceed lower");
    axes.push_back({lower[i], upper[i] - lower[i]});
  }
  return Normalization(std::move(axes));
}

Normalization Normalization::fit(std::span<const Point> pooled, double margin) {
  if (pooled.empty()) throw InputError("cannot fit a normalization to no data");
  const std::size_t d = pooled.front().size();
  std::vector<double> lo(d, kInfinity), hi(d, -kInfinity);
  for (const auto& p : pooled) {
    if (p.size() != d) throw InputError("training points have inconsistent dimension");
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  std::vector<AxisMap> axes(d);
  for (std::size_t i = 0; i < d; ++i) {
    double width = hi[i] - lo[i];
    if (!(width > 0.0)) {
      axes[i] = {lo[i] - 0.5, 1.0};
      continue;
    }
    const double pad = margin * width;
    axes[i] = {lo[i] - pad, width + 2.0 * pad};
  }
  return Normalization(std::move(axes));
}

Point Normalization::to_unit_unclamped(std::span<const double> raw) const {
  if (raw.size() != axes_.size()) throw InputError("point dimension does not match normalization");
  Point u(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) u[i] = (raw[i] - axes_[i].offset) / axes_[i].scale;
  return u;
}

Point Normalization::to_unit(std::span<const double> raw) const {
  Point u = to_unit_unclamped(raw);
  for (double& v : u) v = std::clamp(v, 0.0, 1.0);
  return u;
}

Point Normalization::to_raw(std::span<const double> unit) const {
  if (unit.size() != axes_.size()) throw InputError("point dimension does not match normalization");
  Point r(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) r[i] = unit[i] * axes_[i].scale + axes_[i].offset;
  return r;
}

// ---------------------------------------------------------------------------
// SampleSpace

SampleSpace SampleSpace::finite(std::vector<Point> atoms) {
  if (atoms.empty()) throw InputError("finite sample space needs at least one atom");
  const std::size_t d = atoms.front().size();
  if (d == 0) throw InputError("sample space dimension must be >= 1");
  SampleSpace s;
  s.kind_ = SpaceKind::finite;
  s.dim_ = d;
  s.bounds_.assign(d, Interval{kInfinity, -kInfinity});
  for (const auto& a : atoms) {
    if (a.size() != d) throw InputError("atoms have inconsistent dimension");
    for (std::size_t i = 0; i < d; ++i) {
      if (!std::isfinite(a[i])) throw InputError("atom coordinates must be finite");
      s.bounds_[i].lower = std::min(s.bounds_[i].lower, a[i]);
      s.bounds_[i].upper = std::max(s.bounds_[i].upper, a[i]);
    }
  }
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j)
      if (atoms[i] == atoms[j]) throw InputError("finite sample space has duplicate atoms");
  s.atoms_ = std::move(atoms);
  s.normalization_ = Normalization::identity(d);
  return s;
}

SampleSpace SampleSpace::continuous(std::size_t dim, Normalization normalization) {
  if (dim == 0) throw InputError("sample space dimension must be >= 1");
  if (normalization.dim() == 0) normalization = Normalization::identity(dim);
  if (normalization.dim() != dim) throw InputError("normalization dimension mismatch");
  SampleSpace s;
  s.kind_ = SpaceKind::continuous;
  s.dim_ = dim;
  s.bounds_.assign(dim, Interval{0.0, 1.0});
  s.normalization_ = std::move(normalization);
  return s;
}

std::optional<std::size_t> SampleSpace::atom_index(std::span<const double> x) const {
  if (!is_finite() || x.size() != dim_) return std::nullopt;
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    bool same = true;
    for (std::size_t i = 0; i < dim_ && same; ++i) same = std::abs(atoms_[j][i] - x[i]) <= 1e-12;
    if (same) return j;
  }
  return std::nullopt;
}

std::size_t SampleSpace::nearest_atom(std::span<const double> x) const {
  if (!is_finite()) throw InputError("nearest_atom on a continuous space");
  if (x.size() != dim_) throw InputError("point dimension does not match the sample space");
  std::size_t best = 0;
  double best_dist = kInfinity;
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    double dist = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) dist += (atoms_[j][i] - x[i]) * (atoms_[j][i] - x[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = j;
    }
  }
  return best;
}

bool SampleSpace::contains(std::span<const double> x) const {
  if (x.size() != dim_) return false;
  if (is_finite()) return atom_index(x).has_value();
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

// ---------------------------------------------------------------------------
// MomentFunction

MomentFunction MomentFunction::scalar(std::string id, ScalarFn fn, Bounds bounds,
                                      nlohmann::json spec) {
  if (!(bounds.lipschitz > 0.0) || !(bounds.value > 0.0))
    throw InputError("moment function bounds must be positive: " + id);
  MomentFunction f;
  f.id_ = std::move(id);
  f.order_ = 1;
  f.scalar_fn_ = std::move(fn);
  f.bounds_ = bounds;
  f.spec_ = std::move(spec);
  return f;
}

MomentFunction MomentFunction::matrix(std::string id, std::size_t order, MatrixFn fn,
                                      Bounds bounds, nlohmann::json spec) {
  if (order == 0 || order > kMaxEigenOrder) throw InputError("matrix order must be in [1, 8]");
  if (!(bounds.lipschitz > 0.0) || !(bounds.value > 0.0))
    throw InputError("moment function bounds must be positive: " + id);
  MomentFunction f;
  f.id_ = std::move(id);
  f.order_ = order;
  f.matrix_fn_ = std::move(fn);
  f.bounds_ = bounds;
  f.spec_ = std::move(spec);
  return f;
}

double MomentFunction::operator()(std::span<const double> x) const {
  if (!scalar_fn_) throw InputError("moment function '" + id_ + "' is matrix valued");
  return scalar_fn_(x);
}

SymMatrix MomentFunction::evaluate(std::span<const double> x) const {
  if (scalar_fn_) return SymMatrix::scalar(scalar_fn_(x));
  SymMatrix m = matrix_fn_(x);
  if (m.order() != order_) throw InputError("moment function '" + id_ + "' returned wrong order");
  if (m.asymmetry() > kSymmetryTol)
    throw InputError("moment function '" + id_ + "' returned a non-symmetric matrix");
  return m;
}

// ---------------------------------------------------------------------------
// Empirical moments

EmpiricalMoments EmpiricalMoments::from_scalars(std::span<const double> h0,
                                                std::span<const double> h1, std::size_t count0,
                                                std::size_t count1) {
  if (h0.size() != h1.size()) throw InputError("moment vectors differ in length");
  EmpiricalMoments m;
  for (std::size_t k = 0; k < h0.size(); ++k) {
    m.values[0].push_back(SymMatrix::scalar(h0[k]));
    m.values[1].push_back(SymMatrix::scalar(h1[k]));
  }
  m.counts[0] = count0;
  m.counts[1] = count1;
  return m;
}

EmpiricalMoments empirical_moments(std::span<const Point> train0, std::span<const Point> train1,
                                   std::span<const MomentFunction> functions,
                                   const SampleSpace& space) {
  if (train0.empty() || train1.empty()) throw InputError("training sequences must be non-empty");
  EmpiricalMoments out;
  const std::span<const Point> trains[2] = {train0, train1};
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t j = 0; j < trains[h].size(); ++j) {
      if (!space.contains(trains[h][j])) {
        std::ostringstream msg;
        msg << "training point " << j << " of H" << h << " lies outside the sample space";
        throw InputError(msg.str());
      }
    }
    out.counts[h] = trains[h].size();
    for (const auto& fn : functions) {
      SymMatrix sum(fn.order());
      for (const auto& x : trains[h]) sum += fn.evaluate(x);
      sum *= 1.0 / static_cast<double>(trains[h].size());
      out.values[h].push_back(std::move(sum));
    }
  }
  return out;
}

double eta_max(const EmpiricalMoments& moments, std::span<const MomentFunction> functions) {
  if (functions.empty()) throw InputError("at least one moment function is required");
  if (moments.size() != functions.size())
    throw InputError("empirical moments do not match the moment functions");
  double best = 0.0;
  for (std::size_t k = 0; k < functions.size(); ++k) {
    const SymMatrix gap = moments.values[1][k] - moments.values[0][k];
    best = std::max(best, 0.5 * spectral_norm(gap));
  }
  if (!(best > 0.0))
    throw InputError("hypotheses are indistinguishable by the chosen moments (all gaps are zero)");
  return best;
}

// ---------------------------------------------------------------------------
// MomentProblem

MomentProblem::MomentProblem(SampleSpace space, std::vector<MomentFunction> functions,
                             EmpiricalMoments empirical, double eta, double prior0)
    : eta_(eta), prior0_(prior0) {
  if (functions.empty()) throw InputError("at least one moment function is required");
  if (empirical.size() != functions.size())
    throw InputError("empirical moments do not match the moment functions");
  for (std::size_t k = 0; k < functions.size(); ++k)
    for (std::size_t h = 0; h < 2; ++h)
      if (empirical.values[h][k].order() != functions[k].order())
        throw InputError("empirical moment order mismatch for '" + functions[k].id() + "'");
  if (!(prior0 > 0.0 && prior0 < 1.0)) throw InputError("prior0 must lie in (0, 1)");
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  eta_max_ = mrt::eta_max(empirical, functions);
  if (!(eta < eta_max_)) {
    std::ostringstream msg;
    msg << "eta = " << eta << " violates the non-overlap condition eta < eta_max = " << eta_max_;
    throw InputError(msg.str());
  }
  space_ = std::make_shared<const SampleSpace>(std::move(space));
  functions_ = std::make_shared<const std::vector<MomentFunction>>(std::move(functions));
  empirical_ = std::make_shared<const EmpiricalMoments>(std::move(empirical));
}

MomentProblem MomentProblem::from_training(SampleSpace space, std::vector<MomentFunction> functions,
                                           std::vector<Point> train0, std::vector<Point> train1,
                                           double eta, double prior0) {
  EmpiricalMoments m = empirical_moments(train0, train1, functions, space);
  MomentProblem p(std::move(space), std::move(functions), std::move(m), eta, prior0);
  p.training_[0] = std::make_shared<const std::vector<Point>>(std::move(train0));
  p.training_[1] = std::make_shared<const std::vector<Point>>(std::move(train1));
  return p;
}

std::span<const Point> MomentProblem::training(Hypothesis h) const {
  const auto& store = training_[index(h)];
  if (!store) return {};
  return *store;
}

bool MomentProblem::has_matrix_functions() const {
  return std::any_of(functions_->begin(), functions_->end(),
                     [](const MomentFunction& f) { return f.is_matrix(); });
}

MomentProblem MomentProblem::with_eta(double eta) const {
  MomentProblem copy = *this;
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  if (!(eta < eta_max_)) throw InputError("eta violates the non-overlap condition");
  copy.eta_ = eta;
  return copy;
}

double MomentProblem::radius(std::size_t k, double epsilon) const {
  return eta_ + (*functions_)[k].relaxation_scale() * epsilon;
}

// ---------------------------------------------------------------------------
// DiscreteDistribution

DiscreteDistribution::DiscreteDistribution(std::vector<Point> support, std::vector<double> mass)
    : support_(std::move(support)), mass_(std::move(mass)) {
  if (support_.size() != mass_.size()) throw InputError("support and mass differ in length");
  if (mass_.empty()) throw InputError("distribution needs a non-empty support");
  double total = 0.0;
  for (double& p : mass_) {
    if (!std::isfinite(p) || p < -kNegativeMassClamp)
      throw InputError("distribution has a negative or non-finite mass");
    if (p < 0.0) p = 0.0;
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTol) {
    std::ostringstream msg;
    msg << "distribution masses sum to " << total;
    throw InputError(msg.str());
  }
}

DiscreteDistribution DiscreteDistribution::empirical(std::span<const Point> points) {
  if (points.empty()) throw InputError("empirical distribution of no points");
  std::vector<double> mass(points.size(), 1.0 / static_cast<double>(points.size()));
  return DiscreteDistribution(std::vector<Point>(points.begin(), points.end()), std::move(mass));
}

DiscreteDistribution DiscreteDistribution::mixture(const DiscreteDistribution& p,
                                                   const DiscreteDistribution& q, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("mixture weight must lie in [0, 1]");
  std::vector<Point> support = p.support_;
  support.insert(support.end(), q.support_.begin(), q.support_.end());
  std::vector<double> mass;
  mass.reserve(support.size());
  for (double m : p.mass_) mass.push_back(lambda * m);
  for (double m : q.mass_) mass.push_back((1.0 - lambda) * m);
  return DiscreteDistribution(std::move(support), std::move(mass));
}

double DiscreteDistribution::expectation(const MomentFunction& fn) const {
  double total = 0.0;
  for (std::size_t j = 0; j < mass_.size(); ++j)
    if (mass_[j] != 0.0) total += mass_[j] * fn(support_[j]);
  return total;
}

SymMatrix DiscreteDistribution::expectation_matrix(const MomentFunction& fn) const {
  SymMatrix total(fn.order());
  for (std::size_t j = 0; j < mass_.size(); ++j) {
    if (mass_[j] == 0.0) continue;
    SymMatrix v = fn.evaluate(support_[j]);
    v *= mass_[j];
    total += v;
  }
  return total;
}

double max_violation(const MomentProblem& problem, const DiscreteDistribution& p, Hypothesis h,
                     double relax) {
  double worst = -kInfinity;
  const auto functions = problem.functions();
  for (std::size_t k = 0; k < functions.size(); ++k) {
    const double r = problem.radius(k, relax);
    if (!functions[k].is_matrix()) {
      const double gap = p.expectation(functions[k]) - problem.empirical().scalar(h, k);
      worst = std::max(worst, std::abs(gap) - r);
    } else {
      const SymMatrix gap = p.expectation_matrix(functions[k]) - problem.empirical().matrix(h, k);
      const auto eig = eigen_sym(gap);
      worst = std::max(worst, std::max(-eig.values.front(), eig.values.back()) - r);
    }
  }
  return worst;
}

bool contains(const MomentProblem& problem, const DiscreteDistribution& p, Hypothesis h,
              double relax, double tol) {
  return max_violation(problem, p, h, relax) <= tol;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("total_variation: length mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) total += std::abs(p[j] - q[j]);
  return 0.5 * total;
}

// ---------------------------------------------------------------------------
// Verdict

Verdict make_verdict(double statistic, double threshold) {
  Verdict v;
  v.statistic = statistic;
  v.threshold = threshold;
  v.decision = statistic >= threshold ? Hypothesis::h1 : Hypothesis::h0;
  return v;
}

nlohmann::json to_json(const Verdict& v) {
  auto number = [](double x) -> nlohmann::json {
    if (std::isinf(x)) return x > 0 ? "+inf" : "-inf";
    return x;
  };
  return {{"decision", to_string(v.decision)},
          {"statistic", number(v.statistic)},
          {"threshold", number(v.threshold)}};
}

}  // namespace mrt
