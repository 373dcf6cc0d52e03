#include "mrt/problem_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mrt/eval.hpp"
#include "mrt/moment_functions.hpp"

namespace mrt {

void require_keys(const nlohmann::json& object, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  if (!object.is_object()) throw InputError(context + " must be a JSON object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, _] : object.items())
    if (!names.count(key)) throw InputError("unknown key '" + key + "' in " + context);
}

namespace {

const nlohmann::json& need(const nlohmann::json& object, const char* key,
                           const std::string& context) {
  if (!object.contains(key)) throw InputError(context + " is missing '" + key + "'");
  return object.at(key);
}

nlohmann::json matrix_to_json(const SymMatrix& m) {
  if (m.order() == 1) return m(0, 0);
  return m.to_rows();
}

SymMatrix matrix_from_json(const nlohmann::json& j) {
  if (j.is_number()) return SymMatrix::scalar(j.get<double>());
  return SymMatrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

std::vector<Point> to_unit_all(const Normalization& norm, const std::vector<Point>& raw) {
  std::vector<Point> out;
  out.reserve(raw.size());
  for (const auto& x : raw) out.push_back(norm.to_unit_unclamped(x));
  return out;
}

}  // namespace

nlohmann::json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

nlohmann::json space_to_json(const SampleSpace& space) {
  if (space.is_finite()) return {{"kind", "finite"}, {"atoms", space.atoms()}};
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : space.normalization().axes())
    axes.push_back({{"offset", a.offset}, {"scale", a.scale}});
  return {{"kind", "continuous"}, {"dim", space.dim()}, {"normalization", axes}};
}

SampleSpace space_from_json(const nlohmann::json& j) {
  require_keys(j, {"kind", "atoms", "dim", "lower", "upper", "normalization"}, "space");
  const auto kind = need(j, "kind", "space").get<std::string>();
  if (kind == "finite") {
    for (const char* key : {"dim", "lower", "upper", "normalization"})
      if (j.contains(key)) throw InputError(std::string("finite space does not take '") + key + "'");
    return SampleSpace::finite(need(j, "atoms", "space").get<std::vector<Point>>());
  }
  if (kind != "continuous") throw InputError("space kind must be 'finite' or 'continuous'");
  if (j.contains("atoms")) throw InputError("continuous space does not take 'atoms'");
  const auto dim = need(j, "dim", "space").get<std::size_t>();
  if (j.contains("normalization")) {
    std::vector<AxisMap> axes;
    for (const auto& a : j.at("normalization")) {
      require_keys(a, {"offset", "scale"}, "normalization axis");
      axes.push_back({need(a, "offset", "normalization axis").get<double>(),
                      need(a, "scale", "normalization axis").get<double>()});
    }
    return SampleSpace::continuous(dim, Normalization(std::move(axes)));
  }
  if (j.contains("lower") != j.contains("upper"))
    throw InputError("space needs both 'lower' and 'upper' or neither");
  if (j.contains("lower")) {
    const auto lo = j.at("lower").get<std::vector<double>>();
    const auto hi = j.at("upper").get<std::vector<double>>();
    return SampleSpace::continuous(dim, Normalization::from_bounds(lo, hi));
  }
  return SampleSpace::continuous(dim);
}

nlohmann::json moments_to_json(const EmpiricalMoments& m) {
  nlohmann::json out;
  for (std::size_t h = 0; h < 2; ++h) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : m.values[h]) values.push_back(matrix_to_json(v));
    out[h == 0 ? "h0" : "h1"] = values;
  }
  out["counts"] = {m.counts[0], m.counts[1]};
  return out;
}

EmpiricalMoments moments_from_json(const nlohmann::json& j) {
  require_keys(j, {"h0", "h1", "counts"}, "moments");
  EmpiricalMoments m;
  for (std::size_t h = 0; h < 2; ++h) {
    const auto& values = need(j, h == 0 ? "h0" : "h1", "moments");
    if (!values.is_array()) throw InputError("moments must be arrays");
    for (const auto& v : values) m.values[h].push_back(matrix_from_json(v));
  }
  if (m.values[0].size() != m.values[1].size())
    throw InputError("moment lists for h0 and h1 differ in length");
  if (j.contains("counts")) {
    const auto counts = j.at("counts").get<std::vector<std::size_t>>();
    if (counts.size() != 2) throw InputError("moment counts need two entries");
    m.counts[0] = counts[0];
    m.counts[1] = counts[1];
  }
  return m;
}

MomentProblem problem_from_json(const nlohmann::json& block, const std::filesystem::path& base_dir,
                                std::optional<double> eta_override) {
  require_keys(block, {"space", "functions", "training", "moments", "eta", "prior0"}, "problem");
  SampleSpace space = space_from_json(need(block, "space", "problem"));
  const auto& fspec = need(block, "functions", "problem");
  std::vector<MomentFunction> functions =
      fspec.is_string() && fspec.get<std::string>() == "mean_and_second_moment"
          ? mean_and_second_moments(space.dim())
          : make_moment_functions(fspec, space);

  double eta = 0.0;
  if (eta_override) eta = *eta_override;
  else eta = need(block, "eta", "problem").get<double>();
  const double prior0 = block.contains("prior0") ? block.at("prior0").get<double>() : 0.5;

  if (block.contains("training") == block.contains("moments"))
    throw InputError("problem needs exactly one of 'training' or 'moments'");
  if (block.contains("moments")) {
    return MomentProblem(std::move(space), std::move(functions),
                         moments_from_json(block.at("moments")), eta, prior0);
  }

  const auto& training = block.at("training");
  std::vector<Point> raw[2];
  if (training.contains("csv")) {
    require_keys(training, {"csv", "label_column", "labels"}, "training");
    std::filesystem::path path = training.at("csv").get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    std::optional<std::pair<std::string, std::string>> labels;
    if (training.contains("labels")) {
      const auto l = training.at("labels").get<std::vector<std::string>>();
      if (l.size() != 2) throw InputError("'labels' needs exactly two entries");
      labels = std::make_pair(l[0], l[1]);
    }
    auto data = ingest_csv(path, need(training, "label_column", "training").get<std::string>(),
                           labels);
    raw[0] = std::move(data.points[0]);
    raw[1] = std::move(data.points[1]);
  } else {
    require_keys(training, {"h0", "h1"}, "training");
    raw[0] = need(training, "h0", "training").get<std::vector<Point>>();
    raw[1] = need(training, "h1", "training").get<std::vector<Point>>();
  }
  for (const auto& part : raw)
    for (const auto& x : part)
      if (x.size() != space.dim()) throw InputError("training point dimension mismatch");

  if (!space.is_finite()) {
    const auto& sj = block.at("space");
    if (!sj.contains("lower") && !sj.contains("normalization")) {
      std::vector<Point> pooled = raw[0];
      pooled.insert(pooled.end(), raw[1].begin(), raw[1].end());
      if (pooled.empty()) throw InputError("training sequences must be non-empty");
      space = SampleSpace::continuous(space.dim(), Normalization::fit(pooled));
    }
    raw[0] = to_unit_all(space.normalization(), raw[0]);
    raw[1] = to_unit_all(space.normalization(), raw[1]);
  }
  return MomentProblem::from_training(std::move(space), std::move(functions), std::move(raw[0]),
                                      std::move(raw[1]), eta, prior0);
}

Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  require_keys(j, {"problem", "solve", "scenario", "output"}, "config");
  Config c;
  c.base_dir = base_dir;
  if (j.contains("problem")) {
    c.problem = j.at("problem");
    require_keys(c.problem, {"space", "functions", "training", "moments", "eta", "prior0"},
                 "problem");
  }
  if (j.contains("solve")) {
    const auto& s = j.at("solve");
    require_keys(s, {"epsilon", "grid_cap", "mode", "lfd"}, "solve");
    if (s.contains("epsilon")) c.solve.epsilon = s.at("epsilon").get<double>();
    if (s.contains("grid_cap")) c.solve.grid_cap = s.at("grid_cap").get<std::size_t>();
    if (s.contains("lfd"))
      c.solve.selection = lfd_selection_from_string(s.at("lfd").get<std::string>());
    if (s.contains("mode")) {
      const auto mode = s.at("mode").get<std::string>();
      if (mode != "scalar" && mode != "matrix")
        throw InputError("solve mode must be 'scalar' or 'matrix'");
      c.solve.matrix_mode = mode == "matrix";
    }
    if (!(c.solve.epsilon > 0.0)) throw InputError("solve epsilon must be positive");
  }
  if (j.contains("scenario")) {
    nlohmann::json scenario = j.at("scenario");
    nlohmann::json detector = nlohmann::json::object();
    if (scenario.is_object() && scenario.contains("detector")) {
      detector = scenario.at("detector");
      scenario.erase("detector");
    }
    // Validate both parts now so schema errors surface before any computation.
    scenario_from_json(scenario);
    problem_template_from_json(detector);
    c.scenario = j.at("scenario");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    require_keys(o, {"model", "curve"}, "output");
    if (o.contains("model")) c.model_path = o.at("model").get<std::string>();
    if (o.contains("curve")) c.curve_path = o.at("curve").get<std::string>();
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

MomentProblem ModelFile::problem() const {
  return MomentProblem(space, functions, empirical, eta, prior0);
}

nlohmann::json model_to_json(const MomentProblem& problem, const LfdSolution& solution,
                             const RobustTest& test) {
  nlohmann::json j;
  j["format"] = "mrt-model";
  j["version"] = 1;
  j["space"] = space_to_json(problem.space());
  nlohmann::json functions = nlohmann::json::array();
  for (const auto& f : problem.functions()) functions.push_back(f.spec());
  j["functions"] = functions;
  j["moments"] = moments_to_json(problem.empirical());
  j["eta"] = problem.eta();
  j["eta_max"] = problem.eta_max();
  j["prior0"] = problem.prior0();
  j["epsilon"] = solution.epsilon;
  j["gamma"] = solution.gamma;
  j["tv"] = solution.tv;
  j["lp_iterations"] = solution.lp_iterations;
  j["lfd"] = solution.centered ? "center" : "vertex";
  if (!solution.round_values.empty()) {
    j["cut_rounds"] = solution.round_values.size();
    j["cuts_added"] = solution.cuts_added;
  }
  if (solution.grid) {
    j["grid"] = {{"dim", solution.grid->dim()},
                 {"epsilon", solution.grid->epsilon()},
                 {"per_axis", solution.grid->per_axis()}};
  } else {
    j["grid"] = nullptr;
  }
  j["p0"] = solution.p0.mass();
  j["p1"] = solution.p1.mass();
  j["density0"] = test.density(Hypothesis::h0);
  j["density1"] = test.density(Hypothesis::h1);
  return j;
}

ModelFile model_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"format", "version", "space", "functions", "moments", "eta", "eta_max", "prior0",
                "epsilon", "gamma", "tv", "lp_iterations", "lfd", "cut_rounds", "cuts_added", "grid",
                "p0", "p1", "density0", "density1"},
               "model");
  if (j.value("format", "") != "mrt-model") throw InputError("not a model file");
  ModelFile m;
  m.space = space_from_json(need(j, "space", "model"));
  m.functions = make_moment_functions(need(j, "functions", "model"), m.space);
  m.empirical = moments_from_json(need(j, "moments", "model"));
  m.eta = need(j, "eta", "model").get<double>();
  m.prior0 = need(j, "prior0", "model").get<double>();
  m.epsilon = need(j, "epsilon", "model").get<double>();
  m.gamma = need(j, "gamma", "model").get<double>();
  m.tv = need(j, "tv", "model").get<double>();
  auto d0 = need(j, "density0", "model").get<std::vector<double>>();
  auto d1 = need(j, "density1", "model").get<std::vector<double>>();
  const auto& grid = need(j, "grid", "model");
  if (grid.is_null()) {
    if (!m.space.is_finite()) throw InputError("continuous model needs a grid");
    m.test = RobustTest::on_atoms(m.space.atoms(), std::move(d0), std::move(d1), m.prior0);
  } else {
    require_keys(grid, {"dim", "epsilon", "per_axis"}, "grid");
    DiscreteGrid g(need(grid, "dim", "grid").get<std::size_t>(),
                   need(grid, "epsilon", "grid").get<double>(),
                   need(grid, "per_axis", "grid").get<std::size_t>());
    if (g.dim() != m.space.dim()) throw InputError("grid dimension does not match the space");
    m.test = RobustTest::on_grid(std::move(g), std::move(d0), std::move(d1), m.prior0);
  }
  return m;
}

}  // namespace mrt
