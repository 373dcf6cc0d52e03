#pragma once

// Monte Carlo evaluation: samplers, CSV ingestion and error-probability curves
// for the moment robust test and the direct batch test.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mrt/lfd.hpp"
#include "mrt/model.hpp"

namespace mrt {

/// Deterministic random stream. Seeded from (seed, stream id) so every trial
/// owns an independent, reproducible sequence. Uniforms take the top 53 bits of
/// mt19937_64; normals use the polar method, so draws are identical across
/// standard library implementations.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Lower-triangular Cholesky factor; throws InputError unless `cov` is SPD.
std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& cov);

std::vector<Point> sample_gaussian(std::span<const double> mean,
                                   const std::vector<std::vector<double>>& cov, std::size_t count,
                                   Rng& rng);

struct GaussianSampler {
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;
  std::vector<std::vector<double>> factor;
};

struct CategoricalSampler {
  std::vector<Point> atoms;
  std::vector<double> probabilities;
};

struct UniformBoxSampler {
  std::vector<double> lower;
  std::vector<double> upper;
};

class Sampler {
 public:
  static Sampler gaussian(std::vector<double> mean, std::vector<std::vector<double>> cov);
  static Sampler categorical(std::vector<Point> atoms, std::vector<double> probabilities);
  static Sampler uniform_box(std::vector<double> lower, std::vector<double> upper);
  /// {"type": "gaussian", "mean": [...], "cov": [[...]] | "var": [...]},
  /// {"type": "categorical", "atoms": [[...]], "probabilities": [...]},
  /// {"type": "uniform", "lower": [...], "upper": [...]}
  static Sampler from_json(const nlohmann::json& spec);

  std::size_t dim() const;
  Point draw(Rng& rng) const;
  std::vector<Point> draw(std::size_t count, Rng& rng) const;

 private:
  std::variant<GaussianSampler, CategoricalSampler, UniformBoxSampler> impl_;
};

struct LabeledData {
  std::vector<std::string> feature_names;
  std::string labels[2];
  std::vector<Point> points[2];
};

/// Reads a CSV with a header row. `label_column` names the class column; all
/// other columns must be numeric. With `labels` given, those two values map to
/// H0 and H1 and any other label is an error; otherwise the column must hold
/// exactly two distinct values, assigned in sorted order.
LabeledData ingest_csv(const std::filesystem::path& path, const std::string& label_column,
                       std::optional<std::pair<std::string, std::string>> labels = std::nullopt);
LabeledData ingest_csv(std::istream& in, const std::string& label_column,
                       std::optional<std::pair<std::string, std::string>> labels = std::nullopt);

/// Numeric CSV (optional header row) as points.
std::vector<Point> read_points_csv(const std::filesystem::path& path);
std::vector<Point> read_points_csv(std::istream& in);

/// Half-width of the 95% Wilson score interval.
double wilson_half_width(std::size_t errors, std::size_t trials, double z = 1.959963984540054);

struct ErrorRow {
  std::string test;
  std::size_t s = 0;
  double error = 0.0;
  double ci95 = 0.0;
  std::size_t trials = 0;
  std::size_t false_alarms = 0;
  std::size_t misses = 0;
  std::size_t h0_trials = 0;
  std::size_t h1_trials = 0;
  /// Trial average of the detector's own error bound, NaN when it has none.
  double mean_bound = std::numeric_limits<double>::quiet_NaN();

  double false_alarm_rate() const;
  double miss_rate() const;
};

struct ErrorCurve {
  std::vector<ErrorRow> rows;
  /// Free-form annotations, e.g. approximations used.
  std::vector<std::string> notes;

  const ErrorRow* find(const std::string& test, std::size_t s) const;
  std::vector<std::string> tests() const;
  /// Header `test,s,error,ci95,trials`.
  void write_csv(std::ostream& out) const;
};

/// How each trial turns training data into detectors.
struct ProblemTemplate {
  nlohmann::json functions;   // empty: mean and second moment per axis
  std::optional<double> eta;  // fixed radius; otherwise eta_factor * (min_k gap_k / 2)
  double eta_factor = 0.5;
  double epsilon = 0.02;
  std::size_t grid_cap = kDefaultGridCap;
  double prior0 = 0.5;
  /// The vertex pair tends to sit on a handful of cells, which leaves most of
  /// the domain without a likelihood ratio; the harness centers by default.
  LfdSelection selection = LfdSelection::center;
};

struct Scenario {
  Sampler sampler0 = Sampler::uniform_box({0.0}, {1.0});
  Sampler sampler1 = Sampler::uniform_box({0.0}, {1.0});
  std::size_t train0 = 20;
  std::size_t train1 = 20;
  std::vector<std::size_t> batch_sizes{25, 50, 100, 200, 400};
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  /// Fixed raw-data box; otherwise each trial fits pooled training min/max +1%.
  std::optional<Normalization> normalization;
};

using Detector = std::function<Hypothesis(std::span<const Point>)>;

struct FittedDetector {
  std::string name;
  Detector decide;
  std::function<double(std::size_t)> error_bound;  // optional
};

struct TrialData {
  std::size_t trial = 0;
  Normalization normalization;
  std::vector<Point> train0;  // normalized to [0,1]^d
  std::vector<Point> train1;
};

/// Thrown by a detector factory to request fresh training data for the trial.
class TrialRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using DetectorFactory = std::function<std::vector<FittedDetector>(const TrialData&)>;

struct RunOptions {
  std::size_t threads = 1;
  std::size_t max_resamples = 10;
};

/// Runs every trial: draws training data, fits detectors, then for each batch
/// size draws one batch from the true H0 (even trials) or H1 (odd trials).
/// Reported error is 1/2 false-alarm rate + 1/2 miss rate.
ErrorCurve run_trials(const Scenario& scenario, const DetectorFactory& factory,
                      const RunOptions& options = {});

/// Standard factory: the smoothed least-favorable likelihood-ratio test
/// (batch log-LR) and the direct batch test, both from the same problem.
DetectorFactory standard_detectors(const ProblemTemplate& problem);

ErrorCurve run_scenario(const Scenario& scenario, const ProblemTemplate& problem,
                        const RunOptions& options = {});

Scenario scenario_from_json(const nlohmann::json& spec);
ProblemTemplate problem_template_from_json(const nlohmann::json& spec);

/// Runs fn(i) for i in [0, n) on `threads` workers. Exceptions are rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace mrt
