#include "mrt/moment_functions.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace mrt {

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(total);
}

void check_axis(std::size_t axis, std::span<const double> x) {
  if (axis >= x.size()) throw InputError("moment function axis out of range for the point");
}

// Exact bounds over a finite alphabet.
MomentFunction::Bounds enumerate_bounds(const MomentFunction& fn, const std::vector<Point>& atoms,
                                        MomentFunction::Bounds fallback) {
  std::vector<SymMatrix> values;
  values.reserve(atoms.size());
  for (const auto& a : atoms) values.push_back(fn.evaluate(a));
  double value = 0.0, lipschitz = 0.0, range = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    value = std::max(value, spectral_norm(values[i]));
    for (std::size_t j = i + 1; j < values.size(); ++j) {
      const double diff = spectral_norm(values[i] - values[j]);
      range = std::max(range, diff);
      lipschitz = std::max(lipschitz, diff / euclidean(atoms[i], atoms[j]));
    }
  }
  MomentFunction::Bounds b;
  b.value = value > 0.0 ? value : fallback.value;
  b.lipschitz = lipschitz > 0.0 ? lipschitz : fallback.lipschitz;
  b.range = range > 0.0 ? range : fallback.range;
  return b;
}

MomentFunction with_bounds(const MomentFunction& fn, MomentFunction::Bounds b,
                           nlohmann::json spec) {
  if (fn.is_matrix()) {
    return MomentFunction::matrix(
        fn.id(), fn.order(), [fn](std::span<const double> x) { return fn.evaluate(x); }, b,
        std::move(spec));
  }
  return MomentFunction::scalar(
      fn.id(), [fn](std::span<const double> x) { return fn(x); }, b, std::move(spec));
}

std::size_t get_axis(const nlohmann::json& spec, const char* key, std::size_t dim) {
  if (!spec.contains(key) || !spec.at(key).is_number_integer() ||
      spec.at(key).get<long long>() < 0)
    throw InputError(std::string("moment function needs a non-negative integer '") + key + "'");
  const auto axis = spec.at(key).get<std::size_t>();
  if (axis >= dim) throw InputError("moment function axis exceeds the space dimension");
  return axis;
}

void reject_unknown(const nlohmann::json& spec, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : spec.items()) {
    if (!allowed.count(key)) throw InputError("unknown key in moment function: '" + key + "'");
  }
}

}  // namespace

MomentFunction coordinate_mean(std::size_t axis) {
  return MomentFunction::scalar(
      "mean[" + std::to_string(axis) + "]",
      [axis](std::span<const double> x) {
        check_axis(axis, x);
        return x[axis];
      },
      {1.0, 1.0, 1.0}, {{"id", "mean"}, {"axis", axis}});
}

MomentFunction coordinate_second_moment(std::size_t axis) {
  return MomentFunction::scalar(
      "second_moment[" + std::to_string(axis) + "]",
      [axis](std::span<const double> x) {
        check_axis(axis, x);
        return x[axis] * x[axis];
      },
      {2.0, 1.0, 1.0}, {{"id", "second_moment"}, {"axis", axis}});
}

MomentFunction coordinate_product(std::size_t i, std::size_t j) {
  const double lipschitz = i == j ? 2.0 : std::sqrt(2.0);
  return MomentFunction::scalar(
      "product[" + std::to_string(i) + "," + std::to_string(j) + "]",
      [i, j](std::span<const double> x) {
        check_axis(std::max(i, j), x);
        return x[i] * x[j];
      },
      {lipschitz, 1.0, 1.0}, {{"id", "product"}, {"axes", {i, j}}});
}

MomentFunction polynomial(std::size_t axis, std::vector<double> coefficients) {
  if (coefficients.empty()) throw InputError("polynomial needs at least one coefficient");
  double value = 0.0, lipschitz = 0.0, range = 0.0;
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    const double c = coefficients[k];
    if (!std::isfinite(c)) throw InputError("polynomial coefficients must be finite");
    value += std::abs(c);
    lipschitz += static_cast<double>(k) * std::abs(c);
    if (k > 0) range += std::abs(c);
  }
  if (!(lipschitz > 0.0)) throw InputError("polynomial must be non-constant");
  nlohmann::json spec = {{"id", "polynomial"}, {"axis", axis}, {"coefficients", coefficients}};
  return MomentFunction::scalar(
      "polynomial[" + std::to_string(axis) + "]",
      [axis, coefficients = std::move(coefficients)](std::span<const double> x) {
        check_axis(axis, x);
        double total = 0.0;
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it)
          total = total * x[axis] + *it;
        return total;
      },
      {lipschitz, value, range}, std::move(spec));
}

MomentFunction tabulated(const SampleSpace& space, std::vector<double> values) {
  if (!space.is_finite()) throw InputError("tabulated moment functions need a finite space");
  if (values.size() != space.atoms().size())
    throw InputError("tabulated moment function needs one value per atom");
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("tabulated values must be finite");
  nlohmann::json spec = {{"id", "table"}, {"values", values}};
  auto atoms = std::make_shared<const SampleSpace>(space);
  MomentFunction raw = MomentFunction::scalar(
      "table",
      [atoms, values = std::move(values)](std::span<const double> x) {
        const auto j = atoms->atom_index(x);
        if (!j) throw InputError("tabulated moment function evaluated off the atoms");
        return values[*j];
      },
      {1.0, 1.0, 1.0}, std::move(spec));
  return with_bounds(raw, enumerate_bounds(raw, space.atoms(), {1.0, 1.0, 1.0}), raw.spec());
}

MomentFunction outer_product(std::vector<double> center) {
  const std::size_t d = center.size();
  if (d == 0 || d > kMaxEigenOrder) throw InputError("outer_product center must have 1..8 entries");
  double r2 = 0.0;
  for (double c : center) {
    if (!std::isfinite(c)) throw InputError("outer_product center must be finite");
    const double far = std::max(std::abs(c), std::abs(1.0 - c));
    r2 += far * far;
  }
  const double r = std::sqrt(r2);
  nlohmann::json spec = {{"id", "outer_product"}, {"center", center}};
  return MomentFunction::matrix(
      "outer_product", d,
      [center = std::move(center)](std::span<const double> x) {
        const std::size_t n = center.size();
        if (x.size() != n) throw InputError("outer_product center dimension mismatch");
        SymMatrix m(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) m(i, j) = (x[i] - center[i]) * (x[j] - center[j]);
        return m;
      },
      {2.0 * r, r2, r2}, std::move(spec));
}

MomentFunction diagonal(std::vector<MomentFunction> components) {
  if (components.empty() || components.size() > kMaxEigenOrder)
    throw InputError("diag needs 1..8 scalar components");
  MomentFunction::Bounds b{0.0, 0.0, 0.0};
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& c : components) {
    if (c.is_matrix()) throw InputError("diag components must be scalar");
    b.lipschitz = std::max(b.lipschitz, c.lipschitz_bound());
    b.value = std::max(b.value, c.value_bound());
    b.range = std::max(b.range, c.range_bound());
    specs.push_back(c.spec());
  }
  const std::size_t n = components.size();
  return MomentFunction::matrix(
      "diag", n,
      [components = std::move(components)](std::span<const double> x) {
        SymMatrix m(components.size());
        for (std::size_t i = 0; i < components.size(); ++i) m(i, i) = components[i](x);
        return m;
      },
      b, {{"id", "diag"}, {"components", specs}});
}

std::vector<MomentFunction> mean_and_second_moments(std::size_t dim) {
  std::vector<MomentFunction> out;
  for (std::size_t i = 0; i < dim; ++i) {
    out.push_back(coordinate_mean(i));
    out.push_back(coordinate_second_moment(i));
  }
  return out;
}

MomentFunction make_moment_function(const nlohmann::json& spec, const SampleSpace& space) {
  if (!spec.is_object() || !spec.contains("id") || !spec.at("id").is_string())
    throw InputError("moment function must be an object with a string 'id'");
  const std::string id = spec.at("id").get<std::string>();
  const std::size_t dim = space.dim();
  std::set<std::string> allowed{"id", "lipschitz", "value", "range"};

  MomentFunction fn = [&]() -> MomentFunction {
    if (id == "mean") {
      allowed.insert("axis");
      return coordinate_mean(get_axis(spec, "axis", dim));
    }
    if (id == "second_moment") {
      allowed.insert("axis");
      return coordinate_second_moment(get_axis(spec, "axis", dim));
    }
    if (id == "product") {
      allowed.insert("axes");
      const auto& axes = spec.at("axes");
      if (!axes.is_array() || axes.size() != 2)
        throw InputError("product needs 'axes' with two entries");
      const nlohmann::json pair = {{"i", axes[0]}, {"j", axes[1]}};
      return coordinate_product(get_axis(pair, "i", dim), get_axis(pair, "j", dim));
    }
    if (id == "polynomial") {
      allowed.insert({"axis", "coefficients"});
      if (!spec.contains("coefficients")) throw InputError("polynomial needs 'coefficients'");
      return polynomial(get_axis(spec, "axis", dim),
                        spec.at("coefficients").get<std::vector<double>>());
    }
    if (id == "table") {
      allowed.insert("values");
      if (!spec.contains("values")) throw InputError("table needs 'values'");
      return tabulated(space, spec.at("values").get<std::vector<double>>());
    }
    if (id == "outer_product") {
      allowed.insert("center");
      if (!spec.contains("center")) throw InputError("outer_product needs 'center'");
      auto center = spec.at("center").get<std::vector<double>>();
      if (center.size() != dim) throw InputError("outer_product center dimension mismatch");
      return outer_product(std::move(center));
    }
    if (id == "diag") {
      allowed.insert("components");
      if (!spec.contains("components") || !spec.at("components").is_array())
        throw InputError("diag needs a 'components' array");
      std::vector<MomentFunction> parts;
      for (const auto& c : spec.at("components")) parts.push_back(make_moment_function(c, space));
      return diagonal(std::move(parts));
    }
    throw InputError("unknown moment function id '" + id + "'");
  }();
  reject_unknown(spec, allowed);

  MomentFunction::Bounds b{fn.lipschitz_bound(), fn.value_bound(), fn.range_bound()};
  if (space.is_finite()) b = enumerate_bounds(fn, space.atoms(), b);
  // User-declared bounds take precedence.
  if (spec.contains("lipschitz")) b.lipschitz = spec.at("lipschitz").get<double>();
  if (spec.contains("value")) b.value = spec.at("value").get<double>();
  if (spec.contains("range")) b.range = spec.at("range").get<double>();
  nlohmann::json full = fn.spec();
  for (const char* key : {"lipschitz", "value", "range"})
    if (spec.contains(key)) full[key] = spec.at(key);
  return with_bounds(fn, b, std::move(full));
}

std::vector<MomentFunction> make_moment_functions(const nlohmann::json& specs,
                                                  const SampleSpace& space) {
  if (!specs.is_array() || specs.empty())
    throw InputError("'functions' must be a non-empty array");
  std::vector<MomentFunction> out;
  for (const auto& s : specs) out.push_back(make_moment_function(s, space));
  return out;
}

}  // namespace mrt
