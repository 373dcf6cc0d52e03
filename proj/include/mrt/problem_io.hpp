#pragma once

// JSON documents: problem instances, configuration files and model files.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrt/lfd.hpp"
#include "mrt/model.hpp"

namespace mrt {

/// Rejects keys outside `allowed` (InputError naming the context).
void require_keys(const nlohmann::json& object, std::initializer_list<const char*> allowed,
                  const std::string& context);

/// Problem block:
///   {"space": {"kind": "finite", "atoms": [[..], ..]} | {"kind": "continuous", "dim": d,
///              "lower": [..], "upper": [..]},
///    "functions": [{"id": ..., ...}, ...],
///    "training": {"h0": [[..]], "h1": [[..]]}
///              | {"csv": path, "label_column": name, "labels": [l0, l1]},
///    "moments": {"h0": [..], "h1": [..]},      (scalar functions, instead of training)
///    "eta": r, "prior0": p}
/// Continuous training data is in raw coordinates; it is normalized with the
/// explicit lower/upper box when given, else with the pooled min/max +1%.
/// With `eta_override`, the block's eta is not required.
MomentProblem problem_from_json(const nlohmann::json& block, const std::filesystem::path& base_dir,
                                std::optional<double> eta_override = std::nullopt);

nlohmann::json space_to_json(const SampleSpace& space);
SampleSpace space_from_json(const nlohmann::json& j);
nlohmann::json moments_to_json(const EmpiricalMoments& m);
EmpiricalMoments moments_from_json(const nlohmann::json& j);

struct SolveSettings {
  double epsilon = 0.05;
  std::size_t grid_cap = kDefaultGridCap;
  bool matrix_mode = false;
  LfdSelection selection = LfdSelection::vertex;
};

struct Config {
  nlohmann::json problem;
  SolveSettings solve;
  std::optional<nlohmann::json> scenario;
  std::optional<std::string> model_path;
  std::optional<std::string> curve_path;
  std::filesystem::path base_dir;
};

/// Parses and schema-checks a configuration document; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

/// Everything the classify command needs, as written by `solve`.
struct ModelFile {
  SampleSpace space = SampleSpace::continuous(1);
  std::vector<MomentFunction> functions;
  EmpiricalMoments empirical;
  double eta = 0.0;
  double prior0 = 0.5;
  double epsilon = 0.0;
  double gamma = 0.0;
  double tv = 0.0;
  std::optional<RobustTest> test;

  /// Rebuilds the problem instance (without training sequences).
  MomentProblem problem() const;
};

nlohmann::json model_to_json(const MomentProblem& problem, const LfdSolution& solution,
                             const RobustTest& test);
ModelFile model_from_json(const nlohmann::json& j);

/// Verdicts with infinite statistics are written as "+inf"/"-inf" strings.
nlohmann::json number_to_json(double v);

}  // namespace mrt
