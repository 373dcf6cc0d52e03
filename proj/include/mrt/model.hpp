#pragma once

// Domain types shared by every module: sample spaces, moment functions,
// empirical moments, problem instances, discrete distributions and verdicts.
//
// All types are immutable after construction and may be shared across threads.

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrt/common.hpp"
#include "mrt/sym_matrix.hpp"

namespace mrt {

/// Per-axis affine map between raw data coordinates and the unit cube:
/// unit = (raw - offset) / scale.
struct AxisMap {
  double offset = 0.0;
  double scale = 1.0;

  bool operator==(const AxisMap&) const = default;
};

class Normalization {
 public:
  Normalization() = default;
  explicit Normalization(std::vector<AxisMap> axes);

  static Normalization identity(std::size_t dim);
  /// Maps the box [lower, upper] onto [0,1]^d.
  static Normalization from_bounds(std::span<const double> lower, std::span<const double> upper);
  /// Pooled min/max of the data, widened by `margin` of the range on each side.
  /// Degenerate axes (zero range) get unit width centered on the value.
  static Normalization fit(std::span<const Point> pooled, double margin = 0.01);

  std::size_t dim() const { return axes_.size(); }
  std::span<const AxisMap> axes() const { return axes_; }

  /// Raw -> unit cube; coordinates outside [0,1] are clamped to the boundary.
  Point to_unit(std::span<const double> raw) const;
  /// Raw -> unit cube without clamping.
  Point to_unit_unclamped(std::span<const double> raw) const;
  Point to_raw(std::span<const double> unit) const;

  bool operator==(const Normalization&) const = default;

 private:
  std::vector<AxisMap> axes_;
};

enum class SpaceKind { finite, continuous };

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

class SampleSpace {
 public:
  /// Finite alphabet; atoms must share one dimension >= 1 and be distinct.
  static SampleSpace finite(std::vector<Point> atoms);
  /// Continuous space, stored as [0,1]^dim together with the raw-data map.
  static SampleSpace continuous(std::size_t dim, Normalization normalization = {});

  SpaceKind kind() const { return kind_; }
  bool is_finite() const { return kind_ == SpaceKind::finite; }
  std::size_t dim() const { return dim_; }
  std::span<const Interval> bounds() const { return bounds_; }
  const std::vector<Point>& atoms() const { return atoms_; }
  const Normalization& normalization() const { return normalization_; }

  /// Finite: index of the atom equal to x (within 1e-12). Continuous: nullopt.
  std::optional<std::size_t> atom_index(std::span<const double> x) const;
  /// Finite: nearest atom in Euclidean distance.
  std::size_t nearest_atom(std::span<const double> x) const;
  /// Finite: x is an atom. Continuous: x lies in [0,1]^d.
  bool contains(std::span<const double> x) const;

 private:
  SampleSpace() = default;

  SpaceKind kind_ = SpaceKind::continuous;
  std::size_t dim_ = 0;
  std::vector<Interval> bounds_;
  std::vector<Point> atoms_;
  Normalization normalization_;
};

/// A moment-defining function psi_k, scalar or symmetric-matrix valued.
class MomentFunction {
 public:
  using ScalarFn = std::function<double(std::span<const double>)>;
  using MatrixFn = std::function<SymMatrix(std::span<const double>)>;

  struct Bounds {
    double lipschitz = 1.0;  // Euclidean (spectral for matrices) Lipschitz bound
    double value = 1.0;      // sup |psi| (spectral norm for matrices)
    double range = 2.0;      // sup |psi(x) - psi(x')| (scalar only)
  };

  static MomentFunction scalar(std::string id, ScalarFn fn, Bounds bounds,
                               nlohmann::json spec = {});
  static MomentFunction matrix(std::string id, std::size_t order, MatrixFn fn, Bounds bounds,
                               nlohmann::json spec = {});

  const std::string& id() const { return id_; }
  bool is_matrix() const { return order_ > 1 || static_cast<bool>(matrix_fn_); }
  /// Matrix order d_k; 1 for scalar functions.
  std::size_t order() const { return order_; }

  /// Scalar value; throws InputError for matrix functions.
  double operator()(std::span<const double> x) const;
  /// Matrix value (1x1 for scalar functions). Symmetry is asserted to kSymmetryTol.
  SymMatrix evaluate(std::span<const double> x) const;

  double lipschitz_bound() const { return bounds_.lipschitz; }
  double value_bound() const { return bounds_.value; }
  double range_bound() const { return bounds_.range; }
  /// Factor dividing the function so that it becomes 1-Lipschitz: max(1, L).
  double relaxation_scale() const { return std::max(1.0, bounds_.lipschitz); }

  /// Configuration document used to rebuild the function (id + parameters).
  const nlohmann::json& spec() const { return spec_; }

 private:
  std::string id_;
  std::size_t order_ = 1;
  ScalarFn scalar_fn_;
  MatrixFn matrix_fn_;
  Bounds bounds_;
  nlohmann::json spec_;
};

/// Empirical moments of both training sequences, one entry per function.
struct EmpiricalMoments {
  std::vector<SymMatrix> values[2];  // [hypothesis][function]
  std::size_t counts[2] = {0, 0};

  std::size_t size() const { return values[0].size(); }
  double scalar(Hypothesis h, std::size_t k) const { return values[index(h)][k](0, 0); }
  const SymMatrix& matrix(Hypothesis h, std::size_t k) const { return values[index(h)][k]; }

  /// Direct construction from scalar moment values (no training data).
  static EmpiricalMoments from_scalars(std::span<const double> h0, std::span<const double> h1,
                                       std::size_t count0 = 0, std::size_t count1 = 0);
};

/// Arithmetic means of each function over each training sequence.
/// Throws InputError naming the first point that lies outside `space`.
EmpiricalMoments empirical_moments(std::span<const Point> train0, std::span<const Point> train1,
                                   std::span<const MomentFunction> functions,
                                   const SampleSpace& space);

/// Largest radius keeping the two uncertainty sets disjoint: max_k half the
/// moment gap (spectral norm of the gap for matrix functions).
/// Throws InputError when every gap is zero.
double eta_max(const EmpiricalMoments& moments, std::span<const MomentFunction> functions);

/// A full instance: sample space, moment functions, nominal moments, radius and prior.
class MomentProblem {
 public:
  MomentProblem(SampleSpace space, std::vector<MomentFunction> functions,
                EmpiricalMoments empirical, double eta, double prior0 = 0.5);

  /// Builds the empirical moments from training data and keeps the sequences.
  static MomentProblem from_training(SampleSpace space, std::vector<MomentFunction> functions,
                                     std::vector<Point> train0, std::vector<Point> train1,
                                     double eta, double prior0 = 0.5);

  const SampleSpace& space() const { return *space_; }
  std::span<const MomentFunction> functions() const { return *functions_; }
  const EmpiricalMoments& empirical() const { return *empirical_; }
  double eta() const { return eta_; }
  double prior0() const { return prior0_; }
  double eta_max() const { return eta_max_; }
  bool has_matrix_functions() const;
  /// Training sequences, empty when the problem was built from moments directly.
  std::span<const Point> training(Hypothesis h) const;

  /// Same instance with another radius (validated).
  MomentProblem with_eta(double eta) const;

  /// Constraint radius of function k after relaxing by epsilon in 1-Lipschitz units.
  double radius(std::size_t k, double epsilon = 0.0) const;

 private:
  std::shared_ptr<const SampleSpace> space_;
  std::shared_ptr<const std::vector<MomentFunction>> functions_;
  std::shared_ptr<const EmpiricalMoments> empirical_;
  std::shared_ptr<const std::vector<Point>> training_[2];
  double eta_ = 0.0;
  double prior0_ = 0.5;
  double eta_max_ = 0.0;
};

/// Probability vector on a finite support.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;
  /// Validates |sum - 1| <= kMassTol and masses >= -kNegativeMassClamp; clamps
  /// small negatives to zero.
  DiscreteDistribution(std::vector<Point> support, std::vector<double> mass);

  /// Uniform mass on each listed point (duplicates kept).
  static DiscreteDistribution empirical(std::span<const Point> points);
  /// lambda * p + (1 - lambda) * q on the concatenated supports.
  static DiscreteDistribution mixture(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                      double lambda);

  std::size_t size() const { return mass_.size(); }
  const std::vector<Point>& support() const { return support_; }
  const std::vector<double>& mass() const { return mass_; }

  double expectation(const MomentFunction& fn) const;
  SymMatrix expectation_matrix(const MomentFunction& fn) const;

 private:
  std::vector<Point> support_;
  std::vector<double> mass_;
};

/// Uncertainty-set membership: every moment of `p` lies within
/// problem.radius(k, relax) + tol of the nominal moments of hypothesis h
/// (all eigenvalues of the gap in that range, for matrix functions).
bool contains(const MomentProblem& problem, const DiscreteDistribution& p, Hypothesis h,
              double relax = 0.0, double tol = kFeasibilityTol);

/// Largest moment-constraint violation of `p` (<= 0 means inside the set).
double max_violation(const MomentProblem& problem, const DiscreteDistribution& p, Hypothesis h,
                     double relax = 0.0);

/// Total variation between two mass vectors on a shared support.
double total_variation(std::span<const double> p, std::span<const double> q);

struct Verdict {
  Hypothesis decision = Hypothesis::h1;
  double statistic = 0.0;
  double threshold = 0.0;
};

/// H1 iff statistic >= threshold (ties decide H1).
Verdict make_verdict(double statistic, double threshold);

nlohmann::json to_json(const Verdict& v);

}  // namespace mrt
