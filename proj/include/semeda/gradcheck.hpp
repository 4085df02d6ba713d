#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semeda/grid.hpp"
#include "semeda/tape.hpp"

namespace semeda {

/// Builds a scalar loss on `tape` from the variable node holding the point.
using TapeFunction = std::function<NodeId(Tape&, NodeId)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the backprop gradient of `f` at `point` against central
/// differences (f(x+eps) - f(x-eps)) / 2eps, coordinate by coordinate.
/// Relative error uses max(|a|, |b|, 1e-8) as denominator.
GradCheckResult finite_diff_check(const TapeFunction& f, const Grid& point, double eps);

inline constexpr double kGradTolerance = 1e-3;

struct SuiteCase {
  std::string name;
  std::size_t instances = 0;
  GradCheckResult worst;
};

/// Finite-difference checks of every tape primitive, every loss and both
/// networks, each over `instances` random problems of at most 4x8x8.
std::vector<SuiteCase> run_gradient_suite(std::size_t instances = 20, std::uint64_t seed = 1);

}  // namespace semeda
