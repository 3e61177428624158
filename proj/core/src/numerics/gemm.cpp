#include "proxylab/numerics/gemm.hpp"

#include "proxylab/numerics/tensor.hpp"

#include <sstream>
#include <vector>

namespace proxylab {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul shape mismatch " + shape_string(a.shape()) +
                                " x " + shape_string(b.shape()));
  }
  Tensor<T> c = Tensor<T>::matrix(a.rows(), b.cols());
  gemm::nn(a.rows(), b.cols(), a.cols(), a.data(), a.cols(), b.data(), b.cols(),
           c.data(), c.cols());
  return c;
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);

namespace gemm {

// Eight independent partial sums let the compiler vectorize without
// reassociating a single accumulator.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  T tail{0};
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
void nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  constexpr std::size_t kBlock = 64;
  for (std::size_t k0 = 0; k0 < k; k0 += kBlock) {
    const std::size_t k1 = std::min(k, k0 + kBlock);
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * ldc;
      const T* arow = a + i * lda;
      for (std::size_t p = k0; p < k1; ++p) {
        const T av = arow[p];
        if (av == T{0}) continue;
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
void nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (m < 8) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = a + i * lda;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += dot(arow, b + j * ldb, k);
    }
    return;
  }
  // Transposing B once turns every row into contiguous axpys.
  std::vector<T> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * ldb + p];
  }
  nn(m, n, k, a, lda, bt.data(), n, c, ldc);
}

template <typename T>
void tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * lda;
    const T* brow = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T{0}) continue;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

#define PROXYLAB_GEMM_INSTANTIATE(T)                                            \
  template T dot<T>(const T*, const T*, std::size_t);                           \
  template void nn<T>(std::size_t, std::size_t, std::size_t, const T*,          \
                      std::size_t, const T*, std::size_t, T*, std::size_t);     \
  template void nt<T>(std::size_t, std::size_t, std::size_t, const T*,          \
                      std::size_t, const T*, std::size_t, T*, std::size_t);     \
  template void tn<T>(std::size_t, std::size_t, std::size_t, const T*,          \
                      std::size_t, const T*, std::size_t, T*, std::size_t);

PROXYLAB_GEMM_INSTANTIATE(float)
PROXYLAB_GEMM_INSTANTIATE(double)

#undef PROXYLAB_GEMM_INSTANTIATE

}  // namespace gemm
}  // namespace proxylab
