#include "proxylab/numerics/grad_check.hpp"

#include <cmath>

namespace proxylab {

GradCheckResult grad_check(const ScalarFunction& function, const Tensor<double>& point,
                           double step, const std::vector<std::size_t>& coordinates) {
  GradCheckResult result;
  Tensor<double> analytic(point.shape());
  const double f0 = function(point, &analytic);
  if (!std::isfinite(f0)) {
    result.failure = "non-finite value at the base point";
    result.failed_coordinate = 0;
    return result;
  }
  if (analytic.shape() != point.shape()) {
    result.failure = "gradient shape " + shape_string(analytic.shape()) +
                     " differs from point shape " + shape_string(point.shape());
    return result;
  }

  std::vector<std::size_t> coords = coordinates;
  if (coords.empty()) {
    coords.resize(point.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }

  Tensor<double> probe = point;
  for (std::size_t i : coords) {
    const double x = probe[i];
    probe[i] = x + step;
    const double up = function(probe, nullptr);
    probe[i] = x - step;
    const double down = function(probe, nullptr);
    probe[i] = x;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      result.failed_coordinate = i;
      result.failure = "non-finite value when perturbing coordinate " + std::to_string(i);
      return result;
    }
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

}  // namespace proxylab
