#include "semeda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semeda {

namespace {

double evaluate(const TapeFunction& f, const Grid& point) {
  Tape tape;
  const NodeId x = tape.variable(point);
  return tape.scalar(f(tape, x));
}

}  // namespace

GradCheckResult finite_diff_check(const TapeFunction& f, const Grid& point, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");

  Tape tape;
  const NodeId x = tape.variable(point);
  const NodeId loss = f(tape, x);
  tape.backward(loss);
  const Grid analytic = tape.grad(x);

  GradCheckResult result;
  Grid probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = evaluate(f, probe);
    probe[i] = point[i] - eps;
    const double down = evaluate(f, probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    const double err = std::fabs(a - numeric) / denom;
    if (err > result.max_relative_error || i == 0) {
      result = {std::max(err, result.max_relative_error), i, a, numeric};
    }
  }
  return result;
}

}  // namespace semeda
