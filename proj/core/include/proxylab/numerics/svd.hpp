#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "proxylab/numerics/tensor.hpp"

namespace proxylab {

/// Thin SVD A = U · diag(S) · Vᵀ with p = min(n, d) components.
struct SvdResult {
  Tensor<double> u;  ///< n×p, column-orthonormal (empty when not requested)
  std::vector<double> s;  ///< non-negative, non-increasing
  Tensor<double> v;  ///< d×p, column-orthonormal
  int sweeps = 0;
};

class SvdNotConverged : public std::runtime_error {
 public:
  explicit SvdNotConverged(int sweeps)
      : std::runtime_error("one-sided Jacobi SVD did not converge after " +
                           std::to_string(sweeps) + " sweeps"),
        sweeps_(sweeps) {}
  int sweeps() const { return sweeps_; }

 private:
  int sweeps_;
};

struct SvdOptions {
  int max_sweeps = 60;
  /// Columns p, q count as orthogonal once |<a_p, a_q>| <= tol·|a_p|·|a_q|.
  double tolerance = 1e-13;
  bool compute_u = true;
};

/// One-sided (Hestenes) Jacobi SVD. Sign convention: the largest-magnitude
/// entry of every U column is positive (first such entry on ties). The rule is
/// applied whether or not U is returned, so V is identical in both modes.
SvdResult svd(const Tensor<double>& matrix, const SvdOptions& options = {});

}  // namespace proxylab
