#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrt {

using Point = std::vector<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Centralized tolerances.
inline constexpr double kMassTol = 1e-9;
inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kLpOptimalityTol = 1e-8;
inline constexpr double kNegativeMassClamp = 1e-12;

inline constexpr std::size_t kDefaultGridCap = 250000;

/// Bad input: malformed configuration, violated precondition, schema error.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric or solver failure (infeasible program, breakdown, round cap).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Hypothesis { h0 = 0, h1 = 1 };

inline std::size_t index(Hypothesis h) { return static_cast<std::size_t>(h); }
inline const char* to_string(Hypothesis h) { return h == Hypothesis::h0 ? "H0" : "H1"; }

}  // namespace mrt
