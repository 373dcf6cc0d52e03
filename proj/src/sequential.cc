#include "mrt/sequential.hpp"

#include <cmath>
#include <sstream>

namespace mrt {

BatchTestSpec BatchTestSpec::from_problem(const MomentProblem& problem) {
  BatchTestSpec spec;
  spec.eta = problem.eta();
  spec.value_bound = 0.0;
  const auto functions = problem.functions();
  for (std::size_t k = 0; k < functions.size(); ++k) {
    if (functions[k].is_matrix())
      throw InputError("the batch test supports scalar moment functions only");
    spec.functions.push_back(functions[k]);
    spec.nominal0.push_back(problem.empirical().scalar(Hypothesis::h0, k));
    spec.nominal1.push_back(problem.empirical().scalar(Hypothesis::h1, k));
    spec.value_bound = std::max(spec.value_bound, functions[k].value_bound());
  }
  for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
    for (const auto& x : problem.training(h)) {
      for (const auto& f : spec.functions) {
        if (std::abs(f(x)) > spec.value_bound * (1.0 + 1e-12)) {
          std::ostringstream msg;
          msg << "declared value bound " << spec.value_bound << " is below |" << f.id()
              << "| = " << std::abs(f(x)) << " on the training data";
          throw InputError(msg.str());
        }
      }
    }
  }
  return spec;
}

std::vector<double> batch_moments(const BatchTestSpec& spec, std::span<const Point> xs) {
  if (xs.empty()) throw InputError("batch must contain at least one point");
  std::vector<double> means(spec.functions.size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t k = 0; k < spec.functions.size(); ++k) means[k] += spec.functions[k](x);
  for (double& m : means) m /= static_cast<double>(xs.size());
  return means;
}

double batch_statistic_from_moments(const BatchTestSpec& spec, std::span<const double> means) {
  if (means.size() != spec.nominal0.size() || means.size() != spec.nominal1.size())
    throw InputError("batch moments do not match the test specification");
  double t = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    // (x - m0)^2 - (x - m1)^2, factored so that a midpoint cancels exactly.
    t += (spec.nominal1[k] - spec.nominal0[k]) *
         (2.0 * means[k] - spec.nominal0[k] - spec.nominal1[k]);
  }
  return t;
}

double batch_statistic(const BatchTestSpec& spec, std::span<const Point> xs) {
  return batch_statistic_from_moments(spec, batch_moments(spec, xs));
}

Verdict batch_classify(const BatchTestSpec& spec, std::span<const Point> xs) {
  return make_verdict(batch_statistic(spec, xs), 0.0);
}

namespace {

double gap_norm1(const BatchTestSpec& spec) {
  if (spec.nominal0.size() != spec.nominal1.size() || spec.nominal0.empty())
    throw InputError("batch test needs matching nominal moments");
  double total = 0.0;
  for (std::size_t k = 0; k < spec.nominal0.size(); ++k)
    total += std::abs(spec.nominal1[k] - spec.nominal0[k]);
  if (!(total > 0.0)) throw InputError("nominal moments coincide; the sets overlap");
  if (!(spec.value_bound > 0.0)) throw InputError("value bound must be positive");
  return total;
}

double exponent_bound(double s, double numerator, double m, double norm1) {
  return std::exp(-s * numerator * numerator / (8.0 * m * m * norm1 * norm1));
}

}  // namespace

double mcdiarmid_bound(const BatchTestSpec& spec, std::size_t s) {
  if (s == 0) throw InputError("batch size must be >= 1");
  const double norm1 = gap_norm1(spec);
  double numerator = 0.0;
  for (std::size_t k = 0; k < spec.nominal0.size(); ++k) {
    const double d = std::abs(spec.nominal1[k] - spec.nominal0[k]);
    numerator += (d + 2.0 * spec.eta) * d;
  }
  if (!(numerator > 0.0)) throw InputError("nonpositive gap; the sets overlap");
  return exponent_bound(static_cast<double>(s), numerator, spec.value_bound, norm1);
}

double mcdiarmid_sup_bound(const BatchTestSpec& spec, std::size_t s) {
  if (s == 0) throw InputError("batch size must be >= 1");
  const double norm1 = gap_norm1(spec);
  double numerator = 0.0;
  for (std::size_t k = 0; k < spec.nominal0.size(); ++k) {
    const double d = std::abs(spec.nominal1[k] - spec.nominal0[k]);
    numerator += (d - 2.0 * spec.eta) * d;
  }
  if (!(numerator > 0.0)) return 1.0;
  return exponent_bound(static_cast<double>(s), numerator, spec.value_bound, norm1);
}

double mcdiarmid_bound(const BatchTestSpec& spec, std::size_t s,
                       std::span<const double> true_moments) {
  if (s == 0) throw InputError("batch size must be >= 1");
  if (true_moments.size() != spec.nominal0.size())
    throw InputError("true moments do not match the test specification");
  const double norm1 = gap_norm1(spec);
  double g = 0.0;
  for (std::size_t k = 0; k < true_moments.size(); ++k) {
    const double a = spec.nominal1[k] - true_moments[k];
    const double b = spec.nominal0[k] - true_moments[k];
    g += a * a - b * b;
  }
  if (!(g > 0.0)) throw InputError("distribution is not closer to the H0 moments; bound undefined");
  return exponent_bound(static_cast<double>(s), g, spec.value_bound, norm1);
}

NpTestSpec NpTestSpec::from_problem(const MomentProblem& problem, double alpha) {
  const auto functions = problem.functions();
  for (std::size_t k = 0; k < functions.size(); ++k) {
    if (functions[k].is_matrix()) continue;
    NpTestSpec spec{functions[k], problem.empirical().scalar(Hypothesis::h0, k), problem.eta(),
                    alpha, functions[k].range_bound()};
    spec.validate();
    return spec;
  }
  throw InputError("the Neyman-Pearson test needs a scalar moment function");
}

void NpTestSpec::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in (0, 1]");
  if (!(range > 0.0) || !std::isfinite(range)) throw InputError("range bound c must be positive");
  if (!(eta >= 0.0)) throw InputError("eta must be non-negative");
}

double np_threshold(const NpTestSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw InputError("sample size must be >= 1");
  const double gamma_n =
      std::sqrt(-spec.range * spec.range * std::log(spec.alpha) / (2.0 * static_cast<double>(n)));
  return spec.nominal0 + spec.eta + gamma_n;
}

Verdict np_classify(const NpTestSpec& spec, std::span<const Point> xs) {
  if (xs.empty()) throw InputError("batch must contain at least one point");
  double mean = 0.0;
  for (const auto& x : xs) mean += spec.function(x);
  mean /= static_cast<double>(xs.size());
  return make_verdict(mean, np_threshold(spec, xs.size()));
}

}  // namespace mrt
