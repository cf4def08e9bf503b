#pragma once

#include <cstddef>

namespace bvae::nn {

enum class Trans { no, yes };

// C = alpha * op(A) * op(B) + beta * C, row-major, backed by CBLAS.
// op(A) is M x K, op(B) is K x N.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

} // namespace bvae::nn
