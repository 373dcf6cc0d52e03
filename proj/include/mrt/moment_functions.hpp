#pragma once

// Built-in moment functions. Bounds are exact on [0,1]^d for continuous spaces
// and computed by enumeration over the atoms for finite spaces.

#include <vector>

#include <json.hpp>

#include "mrt/model.hpp"

namespace mrt {

/// psi(x) = x_axis
MomentFunction coordinate_mean(std::size_t axis);
/// psi(x) = x_axis^2
MomentFunction coordinate_second_moment(std::size_t axis);
/// psi(x) = x_i * x_j
MomentFunction coordinate_product(std::size_t i, std::size_t j);
/// psi(x) = sum_k c_k x_axis^k. Bounds: sum |c_k| and sum k |c_k| (attained when
/// the coefficients share a sign).
MomentFunction polynomial(std::size_t axis, std::vector<double> coefficients);
/// Finite alphabets only: psi(atom_j) = values[j].
MomentFunction tabulated(const SampleSpace& space, std::vector<double> values);
/// Psi(x) = (x - c)(x - c)^T.
MomentFunction outer_product(std::vector<double> center);
/// Psi(x) = diag(psi_1(x), ..., psi_r(x)) over scalar components.
MomentFunction diagonal(std::vector<MomentFunction> components);

/// Mean and second moment of every axis: the default constraint family.
std::vector<MomentFunction> mean_and_second_moments(std::size_t dim);

/// Builds a function from its configuration document, e.g.
/// {"id": "mean", "axis": 0} or {"id": "outer_product", "center": [0.5, 0.5]}.
/// For finite spaces the bounds are tightened by enumeration over the atoms.
MomentFunction make_moment_function(const nlohmann::json& spec, const SampleSpace& space);
std::vector<MomentFunction> make_moment_functions(const nlohmann::json& specs,
                                                  const SampleSpace& space);

}  // namespace mrt
