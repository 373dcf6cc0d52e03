#pragma once

// Least favorable distributions for scalar moment constraints.
//
// The finite-alphabet program and its epsilon-net relaxation share one linear
// program. With overlap t_j = min{pi0 p0_j, pi1 p1_j} and exclusive parts a_j, b_j:
//
//   maximize    sum_j t_j
//   subject to  pi0 p0_j = t_j + a_j,  pi1 p1_j = t_j + b_j,  t, a, b >= 0
//               |sum_j p_i(z_j) psi_k(z_j) - m_{i,k}| <= r_k
//               sum_j p_i(z_j) = 1
//
// so the optimal value is the minimax Bayes risk directly.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mrt/lp.hpp"
#include "mrt/model.hpp"

namespace mrt {

/// Cell-centered lattice on [0,1]^d with m cells per axis and spacing h = 1/m,
/// where m = ceil(sqrt(d) / (2 epsilon)). Every x lies within epsilon of its
/// cell center. Cells are half-open boxes; the last cell on each axis is closed.
class DiscreteGrid {
 public:
  DiscreteGrid(std::size_t dim, double epsilon, std::size_t per_axis);

  std::size_t dim() const { return dim_; }
  double epsilon() const { return epsilon_; }
  std::size_t per_axis() const { return per_axis_; }
  double spacing() const { return 1.0 / static_cast<double>(per_axis_); }
  std::size_t size() const { return size_; }
  double cell_volume() const;

  Point center(std::size_t cell) const;
  std::vector<Point> centers() const;
  /// Cell containing x; coordinates are clamped to [0,1] first.
  std::size_t cell_of(std::span<const double> x) const;
  /// Lower/upper corner of a cell along each axis.
  std::pair<Point, Point> cell_box(std::size_t cell) const;

 private:
  std::size_t dim_;
  double epsilon_;
  std::size_t per_axis_;
  std::size_t size_;
};

/// Cells per axis for a Euclidean epsilon-covering of [0,1]^dim.
std::size_t cells_per_axis(std::size_t dim, double epsilon);

/// Throws SolverError when the grid would exceed `cap` points.
DiscreteGrid build_grid(std::size_t dim, double epsilon, std::size_t cap = kDefaultGridCap);

/// Which optimal pair to report; the program usually has a whole face of them.
enum class LfdSelection {
  vertex,  // the simplex basic solution, typically supported on few cells
  center,  // analytic center of the pairs within center_gap of the optimum
};

const char* to_string(LfdSelection selection);
/// "vertex" or "center"; anything else is an InputError.
LfdSelection lfd_selection_from_string(const std::string& name);

struct LfdSolution {
  std::optional<DiscreteGrid> grid;  // absent for finite alphabets
  DiscreteDistribution p0;
  DiscreteDistribution p1;
  /// sum_j min{pi0 p0_j, pi1 p1_j}; 1/2 sum_j min{p0_j, p1_j} under equal priors.
  double gamma = 0.0;
  double tv = 0.0;
  double prior0 = 0.5;
  double epsilon = 0.0;  // relaxation used, 0 for the finite program
  std::size_t lp_iterations = 0;
  double lp_value = 0.0;
  /// Optimal value of every cutting-plane round (matrix solver only).
  std::vector<double> round_values;
  std::size_t cuts_added = 0;
  /// The masses come from the analytic-center step (gamma then trails
  /// lp_value by at most the requested gap).
  bool centered = false;
};

struct SolveOptions {
  std::size_t grid_cap = kDefaultGridCap;
  std::size_t threads = 1;  // moment evaluation over the grid
  std::ostream* lp_dump = nullptr;
  LfdSelection selection = LfdSelection::vertex;
  double center_gap = 1e-4;  // allowed loss in gamma for LfdSelection::center
};

/// Exact least favorable pair on a finite alphabet.
LfdSolution solve_finite(const MomentProblem& problem, const SolveOptions& options = {});

/// Relaxed program on the epsilon-net of [0,1]^d with radius eta + epsilon
/// (in 1-Lipschitz units). Requires eta + epsilon < eta_max.
LfdSolution solve_relaxed(const MomentProblem& problem, double epsilon,
                          const SolveOptions& options = {});

/// Sum of log-likelihood ratios split into a count of infinite terms
/// (+1 for d0 = 0 < d1, -1 for d1 = 0 < d0) and the finite remainder. The
/// decision follows the sign of `infinite` first, then of `finite`.
struct LogRatio {
  long infinite = 0;
  double finite = 0.0;

  double value() const;
  LogRatio& operator+=(const LogRatio& other);
};

/// Likelihood-ratio test between piecewise-constant densities of the least
/// favorable pair: on the grid cells (continuous) or on the atoms (finite,
/// counting measure).
class RobustTest {
 public:
  static RobustTest on_grid(DiscreteGrid grid, std::vector<double> density0,
                            std::vector<double> density1, double prior0);
  static RobustTest on_atoms(std::vector<Point> atoms, std::vector<double> mass0,
                             std::vector<double> mass1, double prior0);

  bool has_grid() const { return grid_.has_value(); }
  const std::optional<DiscreteGrid>& grid() const { return grid_; }
  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& density(Hypothesis h) const { return density_[index(h)]; }
  double prior0() const { return prior0_; }
  std::size_t num_cells() const { return density_[0].size(); }
  double cell_volume() const;

  /// Cell (or nearest atom) of a normalized point; clamped to the domain.
  std::size_t cell_of(std::span<const double> x) const;
  /// log d1(cell) - log d0(cell), without the prior term.
  LogRatio log_ratio(std::span<const double> x) const;

  /// H1 iff log(pi1 d1) - log(pi0 d0) >= 0.
  Verdict classify(std::span<const double> x) const;
  /// H1 iff sum_i log(d1/d0)(x_i) + log(pi1/pi0) >= 0. Equals classify for one point.
  Verdict classify_batch(std::span<const Point> xs) const;

  /// Integral of each density over the domain.
  double total_mass(Hypothesis h) const;
  /// Half the L1 distance between the two densities, integrated cell by cell.
  double total_variation() const;

 private:
  RobustTest() = default;

  std::optional<DiscreteGrid> grid_;
  std::vector<Point> atoms_;
  std::vector<double> density_[2];
  double prior0_ = 0.5;
};

/// Spreads each grid atom's mass uniformly over its cell. Requires a grid.
RobustTest smooth(const LfdSolution& solution);

/// smooth() for grid solutions, the atom-wise likelihood-ratio test otherwise.
RobustTest robust_test(const LfdSolution& solution);

/// (eta, 2 gamma) at each radius: the finite program when the space is finite,
/// the relaxed program on the epsilon-net otherwise.
std::vector<std::pair<double, double>> g_curve(const MomentProblem& problem,
                                               std::span<const double> etas, double epsilon,
                                               const SolveOptions& options = {});

}  // namespace mrt
