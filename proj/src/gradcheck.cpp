#include "omahgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "omahgnn/error.hpp"

namespace omahgnn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));
}

std::vector<double> central_difference(const ScalarFn& f, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw OracleError("central_difference: eps must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f(point);
    point[i] = saved - eps;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleError("central_difference: non-finite evaluation at coordinate " +
                        std::to_string(i));
    }
    out[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const double> x,
                                  std::span<const double> analytic, double eps) {
  if (analytic.size() != x.size()) {
    throw ContractError("finite_diff_check: gradient has " + std::to_string(analytic.size()) +
                        " entries for " + std::to_string(x.size()) + " parameters");
  }
  GradCheckReport report;
  report.analytic.assign(analytic.begin(), analytic.end());
  report.numeric = central_difference(f, x, eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double err = relative_error(report.analytic[i], report.numeric[i]);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const DifferentiableFn& f, std::span<const double> x, double eps) {
  const ValueAndGrad at = f(x);
  return finite_diff_check([&f](std::span<const double> p) { return f(p).value; }, x, at.grad, eps);
}

}  // namespace omahgnn
