#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "proxylab/numerics/tensor.hpp"

namespace proxylab {

/// Scalar map evaluated in double precision. When `gradient` is non-null the
/// callee also writes its analytic gradient (same shape as `point`) there.
using ScalarFunction =
    std::function<double(const Tensor<double>& point, Tensor<double>* gradient)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  /// Set when the function produced a non-finite value.
  std::optional<std::size_t> failed_coordinate;
  std::string failure;

  bool ok(double tolerance) const {
    return !failed_coordinate && failure.empty() && max_relative_error < tolerance;
  }
};

/// Compares the analytic gradient against central differences:
/// max over coordinates of |analytic - fd| / max(1, |fd|).
/// `coordinates` restricts the check to a subset; empty means all.
GradCheckResult grad_check(const ScalarFunction& function, const Tensor<double>& point,
                           double step = 1e-5,
                           const std::vector<std::size_t>& coordinates = {});

}  // namespace proxylab
