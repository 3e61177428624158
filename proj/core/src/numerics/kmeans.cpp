#include "proxylab/numerics/kmeans.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "proxylab/numerics/rng.hpp"

namespace proxylab {
namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

Tensor<double> plus_plus_init(const Tensor<double>& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Tensor<double> centers = Tensor<double>::matrix(k, d);
  std::size_t first = rng.below(n);
  std::copy_n(points.data() + first * d, d, centers.data());
  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = sq_dist(points.data() + i * d, centers.data(), d);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : best) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += best[i];
        if (cum > target && best[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Guard against landing on an already-covered point through rounding.
      while (best[pick] == 0.0 && pick > 0) --pick;
    }
    std::copy_n(points.data() + pick * d, d, centers.data() + c * d);
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(points.data() + i * d, centers.data() + c * d, d));
    }
  }
  return centers;
}

double assign(const Tensor<double>& points, const Tensor<double>& centers,
              std::vector<std::uint32_t>& assignment, std::vector<double>& dist) {
  const std::size_t n = points.rows(), d = points.cols();
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points.data() + i * d;
    const std::uint32_t c = nearest_center(centers, p);
    assignment[i] = c;
    dist[i] = sq_dist(p, centers.data() + c * d, d);
    inertia += dist[i];
  }
  return inertia;
}

}  // namespace

std::uint32_t nearest_center(const Tensor<double>& centers, const double* point) {
  const std::size_t k = centers.rows(), d = centers.cols();
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double dc = sq_dist(point, centers.data() + c * d, d);
    if (dc < best_d) {
      best_d = dc;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

KMeansModel kmeans(const Tensor<double>& points, std::size_t k, std::uint64_t seed,
                   const KMeansOptions& options) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
  if (k > n) {
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(n) + " available points");
  }
  if (!points.all_finite()) throw std::invalid_argument("kmeans: non-finite input");

  Rng rng(seed);
  KMeansModel model;
  model.centers = plus_plus_init(points, k, rng);
  model.assignment.assign(n, 0);
  std::vector<double> dist(n);
  model.inertia = assign(points, model.centers, model.assignment, dist);
  model.inertia_history.push_back(model.inertia);

  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  std::vector<bool> taken(n);
  for (int it = 0; it < options.max_iterations; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = model.assignment[i];
      ++counts[c];
      const double* p = points.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += p[j];
    }
    std::fill(taken.begin(), taken.end(), false);
    for (std::size_t c = 0; c < k; ++c) {
      double* center = model.centers.data() + c * d;
      if (counts[c] > 0) {
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t j = 0; j < d; ++j) center[j] = sums[c * d + j] * inv;
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      std::copy_n(points.data() + far * d, d, center);
    }

    const std::vector<std::uint32_t> previous = model.assignment;
    model.inertia = assign(points, model.centers, model.assignment, dist);
    model.inertia_history.push_back(model.inertia);
    model.iterations = it + 1;
    if (model.assignment == previous) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace proxylab
