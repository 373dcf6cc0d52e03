#include "mrt/eval.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mrt/lfd.hpp"
#include "mrt/moment_functions.hpp"
#include "mrt/sequential.hpp"

namespace mrt {

// ---------------------------------------------------------------------------
// Random numbers

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state ^= stream * 0xd1b54a32d192ed03ULL;
  const std::uint64_t b = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  return u * f;
}

// ---------------------------------------------------------------------------
// Samplers

std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& cov) {
  const std::size_t n = cov.size();
  if (n == 0) throw InputError("covariance matrix is empty");
  double scale = 0.0;
  for (const auto& row : cov) {
    if (row.size() != n) throw InputError("covariance matrix is not square");
    for (double v : row) {
      if (!std::isfinite(v)) throw InputError("covariance matrix has non-finite entries");
      scale = std::max(scale, std::abs(v));
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(cov[i][j] - cov[j][i]) > 1e-12 * std::max(1.0, scale))
        throw InputError("covariance matrix is not symmetric");
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = cov[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (!(d > 1e-14 * std::max(1.0, scale)))
      throw InputError("covariance matrix is not positive definite");
    l[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = cov[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  return l;
}

namespace {

Point gaussian_draw(std::span<const double> mean, const std::vector<std::vector<double>>& factor,
                    Rng& rng) {
  const std::size_t n = mean.size();
  std::vector<double> z(n);
  for (auto& v : z) v = rng.normal();
  Point x(mean.begin(), mean.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k <= i; ++k) x[i] += factor[i][k] * z[k];
  return x;
}

void reject_unknown_keys(const nlohmann::json& spec, const std::set<std::string>& allowed,
                         const char* where) {
  if (!spec.is_object()) throw InputError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : spec.items())
    if (!allowed.count(key))
      throw InputError("unknown key '" + key + "' in " + where);
}

}  // namespace

std::vector<Point> sample_gaussian(std::span<const double> mean,
                                   const std::vector<std::vector<double>>& cov, std::size_t count,
                                   Rng& rng) {
  if (cov.size() != mean.size()) throw InputError("mean and covariance dimensions differ");
  const auto factor = cholesky(cov);
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gaussian_draw(mean, factor, rng));
  return out;
}

Sampler Sampler::gaussian(std::vector<double> mean, std::vector<std::vector<double>> cov) {
  if (mean.empty()) throw InputError("gaussian sampler needs a non-empty mean");
  if (cov.size() != mean.size()) throw InputError("mean and covariance dimensions differ");
  Sampler s;
  auto factor = cholesky(cov);
  s.impl_ = GaussianSampler{std::move(mean), std::move(cov), std::move(factor)};
  return s;
}

Sampler Sampler::categorical(std::vector<Point> atoms, std::vector<double> probabilities) {
  if (atoms.empty() || atoms.size() != probabilities.size())
    throw InputError("categorical sampler needs one probability per atom");
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw InputError("categorical probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTol) throw InputError("categorical probabilities must sum to 1");
  for (const auto& a : atoms)
    if (a.size() != atoms.front().size() || a.empty())
      throw InputError("categorical atoms have inconsistent dimension");
  Sampler s;
  s.impl_ = CategoricalSampler{std::move(atoms), std::move(probabilities)};
  return s;
}

Sampler Sampler::uniform_box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw InputError("uniform sampler needs matching non-empty bounds");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(upper[i] >= lower[i])) throw InputError("uniform sampler upper bound below lower");
  Sampler s;
  s.impl_ = UniformBoxSampler{std::move(lower), std::move(upper)};
  return s;
}

Sampler Sampler::from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("type"))
    throw InputError("sampler must be an object with a 'type'");
  const auto type = spec.at("type").get<std::string>();
  if (type == "gaussian") {
    reject_unknown_keys(spec, {"type", "mean", "cov", "var"}, "gaussian sampler");
    auto mean = spec.at("mean").get<std::vector<double>>();
    std::vector<std::vector<double>> cov;
    if (spec.contains("cov") == spec.contains("var"))
      throw InputError("gaussian sampler needs exactly one of 'cov' or 'var'");
    if (spec.contains("cov")) {
      cov = spec.at("cov").get<std::vector<std::vector<double>>>();
    } else {
      const nlohmann::json& var = spec.at("var");
      std::vector<double> diag =
          var.is_number() ? std::vector<double>(mean.size(), var.get<double>())
                          : var.get<std::vector<double>>();
      if (diag.size() != mean.size()) throw InputError("gaussian 'var' length mismatch");
      cov.assign(mean.size(), std::vector<double>(mean.size(), 0.0));
      for (std::size_t i = 0; i < diag.size(); ++i) cov[i][i] = diag[i];
    }
    return gaussian(std::move(mean), std::move(cov));
  }
  if (type == "categorical") {
    reject_unknown_keys(spec, {"type", "atoms", "probabilities"}, "categorical sampler");
    return categorical(spec.at("atoms").get<std::vector<Point>>(),
                       spec.at("probabilities").get<std::vector<double>>());
  }
  if (type == "uniform") {
    reject_unknown_keys(spec, {"type", "lower", "upper"}, "uniform sampler");
    return uniform_box(spec.at("lower").get<std::vector<double>>(),
                       spec.at("upper").get<std::vector<double>>());
  }
  throw InputError("unknown sampler type '" + type + "'");
}

std::size_t Sampler::dim() const {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSampler>) return s.mean.size();
        else if constexpr (std::is_same_v<T, CategoricalSampler>) return s.atoms.front().size();
        else return s.lower.size();
      },
      impl_);
}

Point Sampler::draw(Rng& rng) const {
  return std::visit(
      [&rng](const auto& s) -> Point {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSampler>) {
          return gaussian_draw(s.mean, s.factor, rng);
        } else if constexpr (std::is_same_v<T, CategoricalSampler>) {
          const double u = rng.uniform();
          double acc = 0.0;
          for (std::size_t j = 0; j < s.atoms.size(); ++j) {
            acc += s.probabilities[j];
            if (u < acc) return s.atoms[j];
          }
          for (std::size_t j = s.atoms.size(); j-- > 0;)
            if (s.probabilities[j] > 0.0) return s.atoms[j];
          return s.atoms.back();
        } else {
          Point x(s.lower.size());
          for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = s.lower[i] + (s.upper[i] - s.lower[i]) * rng.uniform();
          return x;
        }
      },
      impl_);
}

std::vector<Point> Sampler::draw(std::size_t count, Rng& rng) const {
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(rng));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

std::string parse_error(std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << "CSV line " << line << ": " << what;
  return msg.str();
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

LabeledData ingest_csv(std::istream& in, const std::string& label_column,
                       std::optional<std::pair<std::string, std::string>> labels) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw InputError("CSV is empty");
  std::size_t label_index = header.size();
  LabeledData data;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_index = i;
    else data.feature_names.push_back(header[i]);
  }
  if (label_index == header.size())
    throw InputError("CSV has no column named '" + label_column + "'");
  if (data.feature_names.empty()) throw InputError("CSV has no feature columns");

  std::vector<std::pair<std::string, Point>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw InputError(parse_error(line_no, "expected " + std::to_string(header.size()) +
                                                " cells, found " + std::to_string(cells.size())));
    Point p;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == label_index) continue;
      double v;
      if (!parse_number(cells[i], v))
        throw InputError(parse_error(line_no, "non-numeric cell '" + cells[i] + "' in column '" +
                                                  header[i] + "'"));
      p.push_back(v);
    }
    if (cells[label_index].empty()) throw InputError(parse_error(line_no, "empty label"));
    rows.emplace_back(cells[label_index], std::move(p));
  }

  if (labels) {
    data.labels[0] = labels->first;
    data.labels[1] = labels->second;
    if (data.labels[0] == data.labels[1]) throw InputError("the two labels must differ");
  } else {
    std::set<std::string> distinct;
    for (const auto& r : rows) distinct.insert(r.first);
    if (distinct.size() != 2) {
      std::ostringstream msg;
      msg << "label column '" << label_column << "' must hold exactly 2 distinct values, found "
          << distinct.size();
      throw InputError(msg.str());
    }
    data.labels[0] = *distinct.begin();
    data.labels[1] = *std::next(distinct.begin());
  }
  for (auto& [label, p] : rows) {
    if (label == data.labels[0]) data.points[0].push_back(std::move(p));
    else if (label == data.labels[1]) data.points[1].push_back(std::move(p));
    else throw InputError("unexpected label '" + label + "'");
  }
  if (data.points[0].empty() || data.points[1].empty())
    throw InputError("each label needs at least one row");
  return data;
}

LabeledData ingest_csv(const std::filesystem::path& path, const std::string& label_column,
                       std::optional<std::pair<std::string, std::string>> labels) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file " + path.string());
  return ingest_csv(in, label_column, std::move(labels));
}

std::vector<Point> read_points_csv(std::istream& in) {
  std::vector<Point> out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    Point p;
    bool numeric = true;
    for (const auto& c : cells) {
      double v;
      if (!parse_number(c, v)) {
        numeric = false;
        break;
      }
      p.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw InputError(parse_error(line_no, "non-numeric cell"));
    }
    first = false;
    if (!out.empty() && p.size() != out.front().size())
      throw InputError(parse_error(line_no, "row width differs from the first row"));
    out.push_back(std::move(p));
  }
  if (out.empty()) throw InputError("CSV contains no data rows");
  return out;
}

std::vector<Point> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file " + path.string());
  return read_points_csv(in);
}

// ---------------------------------------------------------------------------
// Error curves

double wilson_half_width(std::size_t errors, std::size_t trials, double z) {
  if (trials == 0) return 0.5;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  return z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
}

double ErrorRow::false_alarm_rate() const {
  return h0_trials ? static_cast<double>(false_alarms) / static_cast<double>(h0_trials) : 0.0;
}

double ErrorRow::miss_rate() const {
  return h1_trials ? static_cast<double>(misses) / static_cast<double>(h1_trials) : 0.0;
}

const ErrorRow* ErrorCurve::find(const std::string& test, std::size_t s) const {
  for (const auto& r : rows)
    if (r.test == test && r.s == s) return &r;
  return nullptr;
}

std::vector<std::string> ErrorCurve::tests() const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.test) == out.end()) out.push_back(r.test);
  return out;
}

void ErrorCurve::write_csv(std::ostream& out) const {
  out << "test,s,error,ci95,trials\n";
  std::ostringstream line;
  for (const auto& r : rows) {
    line.str("");
    line << std::setprecision(10) << r.test << ',' << r.s << ',' << r.error << ',' << r.ci95 << ','
         << r.trials << '\n';
    out << line.str();
  }
}

// ---------------------------------------------------------------------------
// Trials

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  std::size_t failure_index = n;
  std::vector<std::thread> workers;
  const std::size_t count = std::min(threads, n);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mutex);
          // Keep the lowest failing index so the reported error is deterministic.
          if (i < failure_index) {
            failure_index = i;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

struct TrialOutcome {
  std::vector<std::string> names;
  // [detector][batch size]
  std::vector<std::vector<char>> wrong;
  std::vector<std::vector<double>> bound;
  Hypothesis truth = Hypothesis::h0;
  std::vector<std::string> notes;
};

std::vector<Point> normalize_all(const Normalization& norm, const std::vector<Point>& raw) {
  std::vector<Point> out;
  out.reserve(raw.size());
  for (const auto& x : raw) out.push_back(norm.to_unit(x));
  return out;
}

}  // namespace

ErrorCurve run_trials(const Scenario& scenario, const DetectorFactory& factory,
                      const RunOptions& options) {
  if (scenario.trials == 0) throw InputError("scenario needs at least one trial");
  if (scenario.batch_sizes.empty()) throw InputError("scenario needs at least one batch size");
  for (std::size_t s : scenario.batch_sizes)
    if (s == 0) throw InputError("batch sizes must be >= 1");
  if (scenario.train0 == 0 || scenario.train1 == 0)
    throw InputError("training sizes must be >= 1");
  if (scenario.sampler0.dim() != scenario.sampler1.dim())
    throw InputError("samplers have different dimensions");

  std::vector<TrialOutcome> outcomes(scenario.trials);
  parallel_for(scenario.trials, options.threads, [&](std::size_t t) {
    Rng rng(scenario.seed, t);
    TrialOutcome& out = outcomes[t];
    std::vector<FittedDetector> detectors;
    TrialData data;
    bool fitted = false;
    std::string last_reason;
    for (std::size_t attempt = 0; attempt <= options.max_resamples && !fitted; ++attempt) {
      const auto raw0 = scenario.sampler0.draw(scenario.train0, rng);
      const auto raw1 = scenario.sampler1.draw(scenario.train1, rng);
      data.trial = t;
      if (scenario.normalization) {
        data.normalization = *scenario.normalization;
      } else {
        std::vector<Point> pooled = raw0;
        pooled.insert(pooled.end(), raw1.begin(), raw1.end());
        data.normalization = Normalization::fit(pooled);
      }
      data.train0 = normalize_all(data.normalization, raw0);
      data.train1 = normalize_all(data.normalization, raw1);
      try {
        detectors = factory(data);
        fitted = true;
      } catch (const TrialRejected& e) {
        last_reason = e.what();
      }
    }
    if (!fitted) {
      std::ostringstream msg;
      msg << "trial " << t << " rejected after " << options.max_resamples
          << " resamples: " << last_reason;
      throw SolverError(msg.str());
    }
    out.truth = t % 2 == 0 ? Hypothesis::h0 : Hypothesis::h1;
    const Sampler& truth = out.truth == Hypothesis::h0 ? scenario.sampler0 : scenario.sampler1;
    out.wrong.assign(detectors.size(), std::vector<char>(scenario.batch_sizes.size(), 0));
    out.bound.assign(detectors.size(), std::vector<double>(scenario.batch_sizes.size(),
                                                           std::numeric_limits<double>::quiet_NaN()));
    for (const auto& d : detectors) out.names.push_back(d.name);
    for (std::size_t b = 0; b < scenario.batch_sizes.size(); ++b) {
      const std::size_t s = scenario.batch_sizes[b];
      const auto batch = normalize_all(data.normalization, truth.draw(s, rng));
      for (std::size_t k = 0; k < detectors.size(); ++k) {
        out.wrong[k][b] = detectors[k].decide(batch) != out.truth;
        if (detectors[k].error_bound) out.bound[k][b] = detectors[k].error_bound(s);
      }
    }
  });

  // Aggregate by detector name in order of first appearance.
  struct Tally {
    std::vector<ErrorRow> rows;
    std::vector<double> bound_sum;
    std::vector<std::size_t> bound_count;
  };
  std::vector<std::string> order;
  std::map<std::string, Tally> tallies;
  for (const auto& out : outcomes) {
    for (std::size_t k = 0; k < out.names.size(); ++k) {
      const auto& name = out.names[k];
      auto [it, inserted] = tallies.try_emplace(name);
      Tally& tally = it->second;
      if (inserted) {
        order.push_back(name);
        for (std::size_t s : scenario.batch_sizes) {
          ErrorRow row;
          row.test = name;
          row.s = s;
          tally.rows.push_back(row);
        }
        tally.bound_sum.assign(scenario.batch_sizes.size(), 0.0);
        tally.bound_count.assign(scenario.batch_sizes.size(), 0);
      }
      for (std::size_t b = 0; b < scenario.batch_sizes.size(); ++b) {
        ErrorRow& row = tally.rows[b];
        ++row.trials;
        if (out.truth == Hypothesis::h0) {
          ++row.h0_trials;
          row.false_alarms += out.wrong[k][b];
        } else {
          ++row.h1_trials;
          row.misses += out.wrong[k][b];
        }
        if (!std::isnan(out.bound[k][b])) {
          tally.bound_sum[b] += out.bound[k][b];
          ++tally.bound_count[b];
        }
      }
    }
  }
  ErrorCurve curve;
  for (const auto& name : order) {
    Tally& tally = tallies[name];
    for (std::size_t b = 0; b < tally.rows.size(); ++b) {
      ErrorRow& row = tally.rows[b];
      if (row.h0_trials && row.h1_trials)
        row.error = 0.5 * row.false_alarm_rate() + 0.5 * row.miss_rate();
      else
        row.error = row.h0_trials ? row.false_alarm_rate() : row.miss_rate();
      row.ci95 = wilson_half_width(row.false_alarms + row.misses, row.trials);
      if (tally.bound_count[b])
        row.mean_bound = tally.bound_sum[b] / static_cast<double>(tally.bound_count[b]);
      curve.rows.push_back(row);
    }
    if (name.find("marginal") != std::string::npos)
      curve.notes.push_back(name + ": product of per-axis least favorable densities (grid cap)");
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Standard detectors

namespace {

// Per-axis approximation used when the joint grid exceeds the cap: each axis
// gets its own one-dimensional least favorable pair from the functions that
// only read that axis, and the test multiplies the per-axis likelihood ratios.
std::optional<std::vector<std::pair<std::size_t, RobustTest>>> marginal_tests(const ProblemTemplate& tpl,
                                                      const MomentProblem& problem, double eta) {
  const std::size_t d = problem.space().dim();
  std::vector<std::vector<nlohmann::json>> by_axis(d);
  for (const auto& f : problem.functions()) {
    const auto& spec = f.spec();
    if (f.is_matrix() || !spec.contains("axis") || spec.contains("lipschitz") ||
        spec.contains("value") || spec.contains("range"))
      return std::nullopt;
    nlohmann::json local = spec;
    local["axis"] = 0;
    by_axis[spec.at("axis").get<std::size_t>()].push_back(local);
  }
  std::vector<std::pair<std::size_t, RobustTest>> tests;
  const auto train0 = problem.training(Hypothesis::h0);
  const auto train1 = problem.training(Hypothesis::h1);
  for (std::size_t axis = 0; axis < d; ++axis) {
    if (by_axis[axis].empty()) continue;
    SampleSpace line = SampleSpace::continuous(1);
    auto functions = make_moment_functions(nlohmann::json(by_axis[axis]), line);
    std::vector<Point> t0, t1;
    for (const auto& x : train0) t0.push_back({x[axis]});
    for (const auto& x : train1) t1.push_back({x[axis]});
    const auto moments = empirical_moments(t0, t1, functions, line);
    double axis_max = 0.0;
    for (std::size_t k = 0; k < functions.size(); ++k)
      axis_max = std::max(axis_max, 0.5 * std::abs(moments.scalar(Hypothesis::h1, k) -
                                                   moments.scalar(Hypothesis::h0, k)));
    // Axes whose sets overlap after relaxation carry no usable information.
    if (!(eta + tpl.epsilon < axis_max)) continue;
    auto p = MomentProblem::from_training(line, std::move(functions), std::move(t0),
                                          std::move(t1), eta, tpl.prior0);
    SolveOptions opts;
    opts.grid_cap = tpl.grid_cap;
    opts.selection = tpl.selection;
    tests.emplace_back(axis, smooth(solve_relaxed(p, tpl.epsilon, opts)));
  }
  if (tests.empty()) throw TrialRejected("no axis separates the hypotheses after relaxation");
  return tests;
}

}  // namespace

DetectorFactory standard_detectors(const ProblemTemplate& tpl) {
  return [tpl](const TrialData& data) {
    const std::size_t d = data.train0.front().size();
    SampleSpace space = SampleSpace::continuous(d, data.normalization);
    std::vector<MomentFunction> functions = tpl.functions.is_null() || tpl.functions.empty()
                                                ? mean_and_second_moments(d)
                                                : make_moment_functions(tpl.functions, space);
    const auto moments = empirical_moments(data.train0, data.train1, functions, space);
    double min_gap = kInfinity, max_gap = 0.0;
    for (std::size_t k = 0; k < functions.size(); ++k) {
      if (functions[k].is_matrix()) throw InputError("standard detectors need scalar functions");
      const double gap = 0.5 * std::abs(moments.scalar(Hypothesis::h1, k) -
                                        moments.scalar(Hypothesis::h0, k));
      min_gap = std::min(min_gap, gap);
      max_gap = std::max(max_gap, gap);
    }
    const double eta = tpl.eta ? *tpl.eta : tpl.eta_factor * min_gap;
    if (!(eta > 0.0)) throw TrialRejected("a moment gap is zero; eta would vanish");
    if (!(eta + tpl.epsilon < max_gap)) {
      std::ostringstream msg;
      msg << "eta + epsilon = " << eta + tpl.epsilon << " is not below eta_max = " << max_gap;
      throw TrialRejected(msg.str());
    }
    auto problem = MomentProblem::from_training(space, std::move(functions), data.train0,
                                                data.train1, eta, tpl.prior0);

    std::vector<FittedDetector> out;
    const std::size_t per_axis = cells_per_axis(d, tpl.epsilon);
    const double grid_points = std::pow(static_cast<double>(per_axis), static_cast<double>(d));
    if (grid_points <= static_cast<double>(tpl.grid_cap)) {
      SolveOptions opts;
      opts.grid_cap = tpl.grid_cap;
    opts.selection = tpl.selection;
      auto test = std::make_shared<const RobustTest>(
          smooth(solve_relaxed(problem, tpl.epsilon, opts)));
      out.push_back({"moment_robust",
                     [test](std::span<const Point> xs) { return test->classify_batch(xs).decision; },
                     {}});
    } else {
      auto tests = marginal_tests(tpl, problem, eta);
      if (!tests) build_grid(d, tpl.epsilon, tpl.grid_cap);  // throws the cap error
      auto shared = std::make_shared<const std::vector<std::pair<std::size_t, RobustTest>>>(
          std::move(*tests));
      const double prior_term = std::log(1.0 - tpl.prior0) - std::log(tpl.prior0);
      out.push_back({"moment_robust_marginal",
                     [shared, prior_term](std::span<const Point> xs) {
                       LogRatio total;
                       for (const auto& [axis, test] : *shared)
                         for (const auto& x : xs) total += test.log_ratio(std::span(&x[axis], 1));
                       total.finite += prior_term;
                       return make_verdict(total.value(), 0.0).decision;
                     },
                     {}});
    }

    auto spec = std::make_shared<const BatchTestSpec>(BatchTestSpec::from_problem(problem));
    out.push_back({"direct_robust",
                   [spec](std::span<const Point> xs) { return batch_classify(*spec, xs).decision; },
                   [spec](std::size_t s) { return mcdiarmid_sup_bound(*spec, s); }});
    return out;
  };
}

ErrorCurve run_scenario(const Scenario& scenario, const ProblemTemplate& problem,
                        const RunOptions& options) {
  return run_trials(scenario, standard_detectors(problem), options);
}

Scenario scenario_from_json(const nlohmann::json& spec) {
  reject_unknown_keys(spec,
                      {"sampler0", "sampler1", "train0", "train1", "batch_sizes", "trials", "seed",
                       "normalization"},
                      "scenario");
  Scenario s;
  if (!spec.contains("sampler0") || !spec.contains("sampler1"))
    throw InputError("scenario needs 'sampler0' and 'sampler1'");
  s.sampler0 = Sampler::from_json(spec.at("sampler0"));
  s.sampler1 = Sampler::from_json(spec.at("sampler1"));
  if (spec.contains("train0")) s.train0 = spec.at("train0").get<std::size_t>();
  if (spec.contains("train1")) s.train1 = spec.at("train1").get<std::size_t>();
  if (spec.contains("batch_sizes"))
    s.batch_sizes = spec.at("batch_sizes").get<std::vector<std::size_t>>();
  if (spec.contains("trials")) s.trials = spec.at("trials").get<std::size_t>();
  if (spec.contains("seed")) s.seed = spec.at("seed").get<std::uint64_t>();
  if (spec.contains("normalization")) {
    const auto& n = spec.at("normalization");
    reject_unknown_keys(n, {"lower", "upper"}, "scenario normalization");
    const auto lo = n.at("lower").get<std::vector<double>>();
    const auto hi = n.at("upper").get<std::vector<double>>();
    s.normalization = Normalization::from_bounds(lo, hi);
    if (s.normalization->dim() != s.sampler0.dim())
      throw InputError("scenario normalization dimension mismatch");
  }
  return s;
}

ProblemTemplate problem_template_from_json(const nlohmann::json& spec) {
  reject_unknown_keys(
      spec, {"functions", "eta", "eta_factor", "epsilon", "grid_cap", "prior0", "lfd"},
      "detector problem");
  ProblemTemplate t;
  if (spec.contains("functions")) t.functions = spec.at("functions");
  if (spec.contains("eta")) t.eta = spec.at("eta").get<double>();
  if (spec.contains("eta_factor")) t.eta_factor = spec.at("eta_factor").get<double>();
  if (spec.contains("epsilon")) t.epsilon = spec.at("epsilon").get<double>();
  if (spec.contains("grid_cap")) t.grid_cap = spec.at("grid_cap").get<std::size_t>();
  if (spec.contains("prior0")) t.prior0 = spec.at("prior0").get<double>();
  if (spec.contains("lfd"))
    t.selection = lfd_selection_from_string(spec.at("lfd").get<std::string>());
  if (!(t.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(t.eta_factor > 0.0 && t.eta_factor < 1.0)) throw InputError("eta_factor must lie in (0, 1)");
  if (!(t.prior0 > 0.0 && t.prior0 < 1.0)) throw InputError("prior0 must lie in (0, 1)");
  return t;
}

}  // namespace mrt
