#pragma once

#include <cstddef>

// Row-major GEMM kernels. All variants accumulate into C.
namespace proxylab::gemm {

template <typename T>
T dot(const T* a, const T* b, std::size_t n);

/// C(m×n) += A(m×k) · B(k×n)
template <typename T>
void nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc);

/// C(m×n) += A(m×k) · B(n×k)ᵀ
template <typename T>
void nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc);

/// C(m×n) += A(k×m)ᵀ · B(k×n)
template <typename T>
void tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
        const T* b, std::size_t ldb, T* c, std::size_t ldc);

/// y += alpha · x
template <typename T>
inline void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace proxylab::gemm
