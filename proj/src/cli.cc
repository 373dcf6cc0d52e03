#include "mrt/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mrt/eval.hpp"
#include "mrt/lfd.hpp"
#include "mrt/matrix_lfd.hpp"
#include "mrt/problem_io.hpp"
#include "mrt/sequential.hpp"

namespace mrt {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string model;
  std::string data;
  std::string mode = "single";
  std::string dump_lp;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t trials = 0;
  std::size_t threads = 1;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("failed writing " + path);
}

std::string resolve(const Config& c, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative() && !c.base_dir.empty()) p = c.base_dir / p;
  return p.string();
}

Config need_config(const Options& o) {
  if (o.config.empty()) throw InputError("--config is required");
  return load_config(o.config);
}

MomentProblem need_problem(const Config& c) {
  if (c.problem.is_null()) throw InputError("config has no 'problem' block");
  return problem_from_json(c.problem, c.base_dir);
}

nlohmann::json grid_forecast(const MomentProblem& p, const SolveSettings& s) {
  if (p.space().is_finite()) return {{"kind", "atoms"}, {"points", p.space().atoms().size()}};
  const std::size_t m = cells_per_axis(p.space().dim(), s.epsilon);
  const double points = std::pow(static_cast<double>(m), static_cast<double>(p.space().dim()));
  return {{"kind", "grid"},
          {"epsilon", s.epsilon},
          {"per_axis", m},
          {"points", points},
          {"within_cap", points <= static_cast<double>(s.grid_cap)}};
}

int cmd_info(const Options& o, std::ostream& out) {
  const Config c = need_config(o);
  const MomentProblem p = need_problem(c);
  nlohmann::json j;
  nlohmann::json functions = nlohmann::json::array();
  for (const auto& f : p.functions()) functions.push_back(f.id());
  j["functions"] = functions;
  j["matrix_mode"] = c.solve.matrix_mode || p.has_matrix_functions();
  j["moments"] = moments_to_json(p.empirical());
  j["eta_max"] = p.eta_max();
  j["eta"] = p.eta();
  j["prior0"] = p.prior0();
  j["support"] = grid_forecast(p, c.solve);
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_solve(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = need_config(o);
  const MomentProblem p = need_problem(c);
  std::ofstream dump;
  SolveOptions opts;
  opts.grid_cap = c.solve.grid_cap;
  opts.threads = o.threads;
  opts.selection = c.solve.selection;
  if (!o.dump_lp.empty()) {
    dump.open(o.dump_lp);
    if (!dump) throw InputError("cannot write " + o.dump_lp);
    opts.lp_dump = &dump;
  }
  LfdSolution sol;
  if (c.solve.matrix_mode || p.has_matrix_functions()) {
    MatrixSolveOptions mopts;
    mopts.solve = opts;
    auto m = solve_matrix_lfd(p, c.solve.epsilon, mopts);
    err << "cutting planes: " << m.rounds << " rounds, max violation " << m.max_violation << "\n";
    sol = std::move(m.solution);
  } else if (p.space().is_finite()) {
    sol = solve_finite(p, opts);
  } else {
    sol = solve_relaxed(p, c.solve.epsilon, opts);
  }
  const RobustTest test = robust_test(sol);
  const std::string model = model_to_json(p, sol, test).dump() + "\n";
  std::string path = !o.out.empty() ? o.out : (c.model_path ? resolve(c, *c.model_path) : "");
  nlohmann::json summary = {{"gamma", sol.gamma},
                            {"tv", sol.tv},
                            {"eta", p.eta()},
                            {"eta_max", p.eta_max()},
                            {"epsilon", sol.epsilon},
                            {"support", sol.p0.size()},
                            {"lp_iterations", sol.lp_iterations},
                            {"lfd", sol.centered ? "center" : "vertex"}};
  if (path.empty()) {
    out << model;
    err << summary.dump() << "\n";
  } else {
    write_text(path, model);
    summary["model"] = path;
    out << summary.dump(2) << "\n";
  }
  return kExitOk;
}

// Test points as the model sees them: unit-cube coordinates for continuous
// spaces, the nearest atom for finite ones.
std::vector<Point> prepare_points(const SampleSpace& space, const std::vector<Point>& raw) {
  std::vector<Point> pts;
  pts.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != space.dim()) {
      std::ostringstream msg;
      msg << "data row " << i + 1 << " has " << raw[i].size() << " columns, the model has dim "
          << space.dim();
      throw InputError(msg.str());
    }
    if (space.is_finite()) pts.push_back(space.atoms()[space.nearest_atom(raw[i])]);
    else pts.push_back(space.normalization().to_unit(raw[i]));
  }
  return pts;
}

struct Loaded {
  MomentProblem problem;
  std::optional<RobustTest> test;
};

Loaded load_model_or_config(const Options& o) {
  if (!o.model.empty()) {
    std::ifstream in(o.model);
    if (!in) throw InputError("cannot open model file " + o.model);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("model file is not valid JSON: " + std::string(e.what()));
    }
    ModelFile m = model_from_json(j);
    return {m.problem(), std::move(m.test)};
  }
  if (!o.config.empty()) return {need_problem(need_config(o)), std::nullopt};
  throw InputError("--model or --config is required");
}

int cmd_classify(const Options& o, const std::string& mode, std::ostream& out) {
  if (o.data.empty()) throw InputError("--data is required");
  const Loaded l = load_model_or_config(o);
  const auto pts = prepare_points(l.problem.space(), read_points_csv(o.data));
  nlohmann::json j;
  j["mode"] = mode;
  j["n"] = pts.size();
  auto verdict_json = [](const Verdict& v) {
    return nlohmann::json{{"decision", to_string(v.decision)},
                          {"statistic", number_to_json(v.statistic)},
                          {"threshold", number_to_json(v.threshold)}};
  };
  if (mode == "single" || mode == "batch") {
    if (!l.test) throw InputError("mode '" + mode + "' needs a model file from 'solve'");
    if (mode == "single") {
      nlohmann::json verdicts = nlohmann::json::array();
      for (const auto& x : pts) verdicts.push_back(verdict_json(l.test->classify(x)));
      j["verdicts"] = verdicts;
    } else {
      j["verdict"] = verdict_json(l.test->classify_batch(pts));
    }
  } else if (mode == "direct-batch") {
    const auto spec = BatchTestSpec::from_problem(l.problem);
    j["verdict"] = verdict_json(batch_classify(spec, pts));
    j["mcdiarmid_bound"] = mcdiarmid_bound(spec, pts.size());
    j["mcdiarmid_sup_bound"] = mcdiarmid_sup_bound(spec, pts.size());
  } else if (mode == "np") {
    const auto spec = NpTestSpec::from_problem(l.problem, o.alpha);
    j["verdict"] = verdict_json(np_classify(spec, pts));
    j["alpha"] = o.alpha;
    j["function"] = spec.function.id();
  } else {
    throw InputError("unknown mode '" + mode + "'");
  }
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = need_config(o);
  if (!c.scenario) throw InputError("config has no 'scenario' block");
  nlohmann::json spec = *c.scenario;
  nlohmann::json detector = nlohmann::json::object();
  if (spec.contains("detector")) {
    detector = spec.at("detector");
    spec.erase("detector");
  }
  Scenario scenario = scenario_from_json(spec);
  if (o.seed_given) scenario.seed = o.seed;
  if (o.trials) scenario.trials = o.trials;
  const ProblemTemplate tpl = problem_template_from_json(detector);
  RunOptions run;
  run.threads = o.threads;
  const ErrorCurve curve = run_scenario(scenario, tpl, run);
  for (const auto& note : curve.notes) err << "note: " << note << "\n";
  std::ostringstream csv;
  curve.write_csv(csv);
  const std::string path = !o.out.empty() ? o.out : (c.curve_path ? resolve(c, *c.curve_path) : "");
  if (path.empty()) out << csv.str();
  else write_text(path, csv.str());
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimax robust hypothesis tests from moment constraints", "mrt"};
  app.require_subcommand(1);
  Options o;

  auto* info = app.add_subcommand("info", "Report empirical moments, eta_max and grid size");
  info->add_option("--config", o.config, "Configuration file")->required();

  auto* solve = app.add_subcommand("solve", "Solve for the least favorable pair, write a model");
  solve->add_option("--config", o.config, "Configuration file")->required();
  solve->add_option("--out", o.out, "Model file (default: config output.model or stdout)");
  solve->add_option("--threads", o.threads, "Worker threads for moment evaluation")
      ->check(CLI::PositiveNumber);
  solve->add_option("--dump-lp", o.dump_lp, "Write the first LP in plain text");

  auto* classify = app.add_subcommand("classify", "Classify CSV rows with a solved model");
  classify->add_option("--model", o.model, "Model file from 'solve'")->required();
  classify->add_option("--data", o.data, "CSV of test points")->required();
  classify->add_option("--mode", o.mode, "single | batch | direct-batch | np")
      ->check(CLI::IsMember({"single", "batch", "direct-batch", "np"}));
  classify->add_option("--alpha", o.alpha, "False-alarm level for np mode");

  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo error curves, CSV output");
  evaluate->add_option("--config", o.config, "Configuration file")->required();
  evaluate->add_option("--out", o.out, "CSV path (default: config output.curve or stdout)");
  auto* seed_opt = evaluate->add_option("--seed", o.seed, "Override the scenario seed");
  evaluate->add_option("--trials", o.trials, "Override the number of trials");
  evaluate->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* batch = app.add_subcommand("batch-test", "Direct batch test on a CSV of points");
  auto* np = app.add_subcommand("np-test", "Neyman-Pearson test on a CSV of points");
  for (auto* sub : {batch, np}) {
    auto* m = sub->add_option("--model", o.model, "Model file from 'solve'");
    auto* c = sub->add_option("--config", o.config, "Configuration file");
    m->excludes(c);
    sub->add_option("--data", o.data, "CSV of test points")->required();
  }
  np->add_option("--alpha", o.alpha, "False-alarm level");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  o.seed_given = seed_opt->count() > 0;

  try {
    if (info->parsed()) return cmd_info(o, out);
    if (solve->parsed()) return cmd_solve(o, out, err);
    if (classify->parsed()) return cmd_classify(o, o.mode, out);
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (batch->parsed()) return cmd_classify(o, "direct-batch", out);
    if (np->parsed()) return cmd_classify(o, "np", out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON field: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}

}  // namespace mrt
