#pragma once

#include <cstdint>
#include <vector>

#include "proxylab/numerics/tensor.hpp"

namespace proxylab {

struct KMeansOptions {
  int max_iterations = 100;
};

struct KMeansModel {
  Tensor<double> centers;  ///< k×d
  double inertia = 0.0;
  std::vector<std::uint32_t> assignment;  ///< per fit point
  /// Inertia after each Lloyd assignment step; non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
  bool converged = false;

  std::size_t k() const { return centers.rows(); }
};

/// Index of the nearest center; ties go to the lowest index.
std::uint32_t nearest_center(const Tensor<double>& centers, const double* point);

/// Lloyd's algorithm from a seeded k-means++ start. Runs until the assignment
/// reaches a fixpoint or max_iterations. A cluster that ends up empty is
/// re-seeded with the point farthest from its assigned center.
KMeansModel kmeans(const Tensor<double>& points, std::size_t k, std::uint64_t seed,
                   const KMeansOptions& options = {});

}  // namespace proxylab
