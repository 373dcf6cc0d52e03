#include "mrt/lfd.hpp"

#include <cmath>
#include <sstream>

#include "lfd_program.hpp"

namespace mrt {

// ---------------------------------------------------------------------------
// Grid

std::size_t cells_per_axis(std::size_t dim, double epsilon) {
  if (dim == 0) throw InputError("grid dimension must be >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be positive");
  const double root = std::sqrt(static_cast<double>(dim));
  const double raw = std::ceil(root / (2.0 * epsilon));
  if (raw > 1e9) throw SolverError("epsilon is too small for a grid");
  auto m = static_cast<std::size_t>(std::max(1.0, raw));
  // Guard the ceiling against rounding in either direction.
  while (m > 1 && root / (2.0 * static_cast<double>(m - 1)) <= epsilon * (1.0 + 1e-12)) --m;
  while (root / (2.0 * static_cast<double>(m)) > epsilon * (1.0 + 1e-12)) ++m;
  return m;
}

DiscreteGrid::DiscreteGrid(std::size_t dim, double epsilon, std::size_t per_axis)
    : dim_(dim), epsilon_(epsilon), per_axis_(per_axis), size_(1) {
  if (dim == 0 || per_axis == 0) throw InputError("grid needs dim >= 1 and per_axis >= 1");
  for (std::size_t i = 0; i < dim; ++i) {
    if (size_ > std::numeric_limits<std::size_t>::max() / per_axis)
      throw SolverError("grid size overflows");
    size_ *= per_axis;
  }
}

double DiscreteGrid::cell_volume() const {
  return std::pow(spacing(), static_cast<double>(dim_));
}

Point DiscreteGrid::center(std::size_t cell) const {
  if (cell >= size_) throw InputError("grid cell index out of range");
  Point p(dim_);
  const double h = spacing();
  for (std::size_t i = 0; i < dim_; ++i) {
    p[i] = (static_cast<double>(cell % per_axis_) + 0.5) * h;
    cell /= per_axis_;
  }
  return p;
}

std::vector<Point> DiscreteGrid::centers() const {
  std::vector<Point> out;
  out.reserve(size_);
  for (std::size_t c = 0; c < size_; ++c) out.push_back(center(c));
  return out;
}

std::size_t DiscreteGrid::cell_of(std::span<const double> x) const {
  if (x.size() != dim_) throw InputError("point dimension does not match the grid");
  std::size_t cell = 0, stride = 1;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double v = std::clamp(x[i], 0.0, 1.0);
    auto idx = static_cast<std::size_t>(std::floor(v * static_cast<double>(per_axis_)));
    idx = std::min(idx, per_axis_ - 1);
    cell += idx * stride;
    stride *= per_axis_;
  }
  return cell;
}

std::pair<Point, Point> DiscreteGrid::cell_box(std::size_t cell) const {
  const Point c = center(cell);
  const double half = 0.5 * spacing();
  Point lo(dim_), hi(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    lo[i] = c[i] - half;
    hi[i] = c[i] + half;
  }
  return {lo, hi};
}

DiscreteGrid build_grid(std::size_t dim, double epsilon, std::size_t cap) {
  const std::size_t m = cells_per_axis(dim, epsilon);
  double count = std::pow(static_cast<double>(m), static_cast<double>(dim));
  if (count > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "epsilon-net with " << m << " cells per axis in dimension " << dim << " has "
        << count << " points, above the cap of " << cap << "; use a larger epsilon";
    throw SolverError(msg.str());
  }
  return DiscreteGrid(dim, epsilon, m);
}

const char* to_string(LfdSelection selection) {
  return selection == LfdSelection::center ? "center" : "vertex";
}

LfdSelection lfd_selection_from_string(const std::string& name) {
  if (name == "vertex") return LfdSelection::vertex;
  if (name == "center") return LfdSelection::center;
  throw InputError("lfd selection must be 'vertex' or 'center', got '" + name + "'");
}

// ---------------------------------------------------------------------------
// Solvers

namespace {

detail::EpigraphProgram scalar_program(const MomentProblem& problem,
                                       const std::vector<Point>& support, double epsilon,
                                       std::size_t threads) {
  const auto functions = problem.functions();
  for (const auto& f : functions)
    if (f.is_matrix())
      throw InputError("function '" + f.id() + "' is matrix valued; use the matrix solver");
  const auto values = detail::evaluate_on_support(functions, support, threads);
  detail::EpigraphProgram program;
  program.support = support.size();
  program.prior0 = problem.prior0();
  for (std::size_t k = 0; k < functions.size(); ++k) {
    std::vector<double> weights(support.size());
    for (std::size_t j = 0; j < support.size(); ++j) weights[j] = values[j][k](0, 0);
    const double r = problem.radius(k, epsilon);
    for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
      const double m = problem.empirical().scalar(h, k);
      program.rows[index(h)].push_back({weights, m - r, m + r});
    }
  }
  return program;
}

// Empirical distribution of each training set moved to the support: inside
// the radius-eta set for atoms, inside the relaxed set after snapping to cell
// centers, so it is a strictly feasible reference for the centering step.
std::optional<detail::CenterRequest> center_request(const MomentProblem& problem,
                                                    const std::optional<DiscreteGrid>& grid,
                                                    std::size_t support,
                                                    const SolveOptions& options) {
  if (options.selection != LfdSelection::center) return std::nullopt;
  detail::CenterRequest request;
  request.gap = options.center_gap;
  for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
    auto& ref = request.reference[index(h)];
    ref.assign(support, 0.0);
    const auto& training = problem.training(h);
    if (training.empty()) return std::nullopt;  // moments given without data
    for (const auto& x : training) {
      const std::size_t j = grid ? grid->cell_of(x) : problem.space().nearest_atom(x);
      ref[j] += 1.0 / static_cast<double>(training.size());
    }
  }
  return request;
}

}  // namespace

LfdSolution solve_finite(const MomentProblem& problem, const SolveOptions& options) {
  if (!problem.space().is_finite()) throw InputError("solve_finite needs a finite sample space");
  const auto& atoms = problem.space().atoms();
  const auto program = scalar_program(problem, atoms, 0.0, options.threads);
  const auto center = center_request(problem, std::nullopt, atoms.size(), options);
  return detail::solve_epigraph(program, atoms, std::nullopt, 0.0, options.lp_dump,
                                center ? &*center : nullptr);
}

LfdSolution solve_relaxed(const MomentProblem& problem, double epsilon,
                          const SolveOptions& options) {
  if (problem.space().is_finite()) throw InputError("solve_relaxed needs a continuous space");
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(problem.eta() + epsilon < problem.eta_max())) {
    std::ostringstream msg;
    msg << "eta + epsilon = " << problem.eta() + epsilon << " must stay below eta_max = "
        << problem.eta_max();
    throw InputError(msg.str());
  }
  std::optional<DiscreteGrid> grid;
  const auto support = detail::support_points(problem, epsilon, options, grid);
  const auto program = scalar_program(problem, support, epsilon, options.threads);
  const auto center = center_request(problem, grid, support.size(), options);
  return detail::solve_epigraph(program, support, std::move(grid), epsilon, options.lp_dump,
                                center ? &*center : nullptr);
}

// ---------------------------------------------------------------------------
// Likelihood-ratio test

double LogRatio::value() const {
  if (infinite > 0) return kInfinity;
  if (infinite < 0) return -kInfinity;
  return finite;
}

LogRatio& LogRatio::operator+=(const LogRatio& other) {
  infinite += other.infinite;
  finite += other.finite;
  return *this;
}

RobustTest RobustTest::on_grid(DiscreteGrid grid, std::vector<double> density0,
                               std::vector<double> density1, double prior0) {
  if (density0.size() != grid.size() || density1.size() != grid.size())
    throw InputError("densities do not match the grid");
  if (!(prior0 > 0.0 && prior0 < 1.0)) throw InputError("prior0 must lie in (0, 1)");
  RobustTest t;
  t.grid_ = std::move(grid);
  t.density_[0] = std::move(density0);
  t.density_[1] = std::move(density1);
  t.prior0_ = prior0;
  return t;
}

RobustTest RobustTest::on_atoms(std::vector<Point> atoms, std::vector<double> mass0,
                                std::vector<double> mass1, double prior0) {
  if (atoms.empty() || mass0.size() != atoms.size() || mass1.size() != atoms.size())
    throw InputError("masses do not match the atoms");
  if (!(prior0 > 0.0 && prior0 < 1.0)) throw InputError("prior0 must lie in (0, 1)");
  RobustTest t;
  t.atoms_ = std::move(atoms);
  t.density_[0] = std::move(mass0);
  t.density_[1] = std::move(mass1);
  t.prior0_ = prior0;
  return t;
}

double RobustTest::cell_volume() const { return grid_ ? grid_->cell_volume() : 1.0; }

std::size_t RobustTest::cell_of(std::span<const double> x) const {
  if (grid_) return grid_->cell_of(x);
  if (x.size() != atoms_.front().size()) throw InputError("point dimension does not match atoms");
  std::size_t best = 0;
  double best_dist = kInfinity;
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (atoms_[j][i] - x[i]) * (atoms_[j][i] - x[i]);
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  return best;
}

LogRatio RobustTest::log_ratio(std::span<const double> x) const {
  const std::size_t c = cell_of(x);
  const double d0 = density_[0][c], d1 = density_[1][c];
  LogRatio r;
  if (d0 > 0.0 && d1 > 0.0) r.finite = std::log(d1) - std::log(d0);
  else if (d1 > 0.0) r.infinite = 1;
  else if (d0 > 0.0) r.infinite = -1;
  return r;
}

Verdict RobustTest::classify(std::span<const double> x) const {
  LogRatio r = log_ratio(x);
  r.finite += std::log(1.0 - prior0_) - std::log(prior0_);
  return make_verdict(r.value(), 0.0);
}

Verdict RobustTest::classify_batch(std::span<const Point> xs) const {
  if (xs.empty()) throw InputError("classify_batch needs at least one point");
  LogRatio total;
  for (const auto& x : xs) total += log_ratio(x);
  total.finite += std::log(1.0 - prior0_) - std::log(prior0_);
  return make_verdict(total.value(), 0.0);
}

double RobustTest::total_mass(Hypothesis h) const {
  double s = 0.0;
  for (double d : density_[index(h)]) s += d;
  return s * cell_volume();
}

double RobustTest::total_variation() const {
  double s = 0.0;
  for (std::size_t j = 0; j < num_cells(); ++j) s += std::abs(density_[0][j] - density_[1][j]);
  return 0.5 * s * cell_volume();
}

RobustTest smooth(const LfdSolution& solution) {
  if (!solution.grid) throw InputError("smooth needs a grid solution");
  const double vol = solution.grid->cell_volume();
  std::vector<double> d0 = solution.p0.mass(), d1 = solution.p1.mass();
  for (double& v : d0) v /= vol;
  for (double& v : d1) v /= vol;
  return RobustTest::on_grid(*solution.grid, std::move(d0), std::move(d1), solution.prior0);
}

RobustTest robust_test(const LfdSolution& solution) {
  if (solution.grid) return smooth(solution);
  return RobustTest::on_atoms(solution.p0.support(), solution.p0.mass(), solution.p1.mass(),
                              solution.prior0);
}

std::vector<std::pair<double, double>> g_curve(const MomentProblem& problem,
                                               std::span<const double> etas, double epsilon,
                                               const SolveOptions& options) {
  std::vector<std::pair<double, double>> out;
  for (double eta : etas) {
    const MomentProblem p = problem.with_eta(eta);
    const LfdSolution s =
        p.space().is_finite() ? solve_finite(p, options) : solve_relaxed(p, epsilon, options);
    out.emplace_back(eta, 2.0 * s.gamma);
  }
  return out;
}

}  // namespace mrt
