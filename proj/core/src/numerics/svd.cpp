#include "proxylab/numerics/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "proxylab/numerics/gemm.hpp"

namespace proxylab {
namespace {

// Column-major working copy: column j occupies [j*n, (j+1)*n).
struct Columns {
  std::size_t n = 0, d = 0;
  std::vector<double> data;
  double* col(std::size_t j) { return data.data() + j * n; }
  const double* col(std::size_t j) const { return data.data() + j * n; }
};

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i], yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

// Assumes rows >= cols.
SvdResult jacobi_tall(const Tensor<double>& a, const SvdOptions& options) {
  const std::size_t n = a.rows(), d = a.cols();
  Columns w{n, d, std::vector<double>(n * d)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) w.data[c * n + r] = a(r, c);
  }
  Columns v{d, d, std::vector<double>(d * d, 0.0)};
  for (std::size_t j = 0; j < d; ++j) v.col(j)[j] = 1.0;

  // Rounding in length-n dot products grows like sqrt(n)·eps.
  const double tol = std::max(options.tolerance, 4e-16 * std::sqrt(static_cast<double>(n)));
  int sweep = 0;
  bool converged = d < 2;
  while (!converged) {
    if (sweep >= options.max_sweeps) throw SvdNotConverged(sweep);
    ++sweep;
    converged = true;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double* wp = w.col(p);
        double* wq = w.col(q);
        const double alpha = gemm::dot(wp, wp, n);
        const double beta = gemm::dot(wq, wq, n);
        const double gamma = gemm::dot(wp, wq, n);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wp, wq, n, c, s);
        rotate(v.col(p), v.col(q), d, c, s);
      }
    }
  }

  std::vector<double> norms(d);
  for (std::size_t j = 0; j < d; ++j) norms[j] = std::sqrt(gemm::dot(w.col(j), w.col(j), n));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = d ? norms[order[0]] : 0.0;
  const double zero_tol = smax * static_cast<double>(std::max(n, d)) * 1e-15;

  SvdResult out;
  out.sweeps = sweep;
  out.s.resize(d);
  Tensor<double> u = Tensor<double>::matrix(n, d);
  out.v = Tensor<double>::matrix(d, d);
  std::vector<bool> filled(d, false);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t j = order[k];
    const double sigma = norms[j] > zero_tol ? norms[j] : 0.0;
    out.s[k] = sigma;
    for (std::size_t r = 0; r < d; ++r) out.v(r, k) = v.col(j)[r];
    if (sigma > 0.0) {
      for (std::size_t r = 0; r < n; ++r) u(r, k) = w.col(j)[r] / sigma;
      filled[k] = true;
    }
  }

  // Complete U for null singular values with Gram-Schmidt on the standard basis.
  std::size_t candidate = 0;
  for (std::size_t k = 0; k < d; ++k) {
    if (filled[k]) continue;
    std::vector<double> e(n);
    while (true) {
      if (candidate >= n) throw SvdNotConverged(sweep);
      std::fill(e.begin(), e.end(), 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < d; ++j) {
          if (!filled[j]) continue;
          double proj = 0.0;
          for (std::size_t r = 0; r < n; ++r) proj += u(r, j) * e[r];
          for (std::size_t r = 0; r < n; ++r) e[r] -= proj * u(r, j);
        }
      }
      const double norm = std::sqrt(gemm::dot(e.data(), e.data(), n));
      if (norm > 0.5) {
        for (std::size_t r = 0; r < n; ++r) u(r, k) = e[r] / norm;
        filled[k] = true;
        break;
      }
    }
  }

  for (std::size_t k = 0; k < d; ++k) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double m = std::abs(u(r, k));
      if (m > best_abs) {
        best_abs = m;
        best = r;
      }
    }
    if (u(best, k) < 0.0) {
      for (std::size_t r = 0; r < n; ++r) u(r, k) = -u(r, k);
      for (std::size_t r = 0; r < d; ++r) out.v(r, k) = -out.v(r, k);
    }
  }
  if (options.compute_u) out.u = std::move(u);
  return out;
}

}  // namespace

SvdResult svd(const Tensor<double>& matrix, const SvdOptions& options) {
  if (matrix.rank() != 2 || matrix.rows() == 0 || matrix.cols() == 0) {
    throw std::invalid_argument("svd needs a non-empty matrix, got shape " +
                                shape_string(matrix.shape()));
  }
  if (!matrix.all_finite()) throw std::invalid_argument("svd input has non-finite entries");
  if (matrix.rows() >= matrix.cols()) return jacobi_tall(matrix, options);

  // Wide input: factor the transpose and swap the roles of U and V. U is
  // needed here to produce V, so it is always computed.
  SvdOptions inner = options;
  inner.compute_u = true;
  SvdResult t = jacobi_tall(transpose(matrix), inner);
  SvdResult out;
  out.sweeps = t.sweeps;
  out.s = std::move(t.s);
  Tensor<double> u = std::move(t.v);
  Tensor<double> v = std::move(t.u);
  const std::size_t p = out.s.size();
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, k)) > best_abs) {
        best_abs = std::abs(u(r, k));
        best = r;
      }
    }
    if (u(best, k) < 0.0) {
      for (std::size_t r = 0; r < u.rows(); ++r) u(r, k) = -u(r, k);
      for (std::size_t r = 0; r < v.rows(); ++r) v(r, k) = -v(r, k);
    }
  }
  if (options.compute_u) out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

}  // namespace proxylab
