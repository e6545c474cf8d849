#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace omahgnn {

using ScalarFn = std::function<double(std::span<const double>)>;

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};
using DifferentiableFn = std::function<ValueAndGrad(std::span<const double>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// |analytic - numeric| / max(1e-8, |numeric|).
double relative_error(double analytic, double numeric);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) per coordinate.
/// OracleError when eps <= 0 or any evaluation is non-finite.
std::vector<double> central_difference(const ScalarFn& f, std::span<const double> x, double eps);

GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const double> x,
                                  std::span<const double> analytic, double eps);

/// Takes the analytic gradient from `f` itself, evaluated at `x`.
GradCheckReport finite_diff_check(const DifferentiableFn& f, std::span<const double> x, double eps);

}  // namespace omahgnn
