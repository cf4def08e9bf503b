#include "bvae/nn/gemm.hpp"

#include <Eigen/Core>

namespace bvae::nn {

namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using ConstView = Eigen::Map<const RowMajor<T>, 0, Eigen::OuterStride<>>;

template <typename T>
using View = Eigen::Map<RowMajor<T>, 0, Eigen::OuterStride<>>;

template <typename T, typename A, typename B>
void accumulate(View<T>& c, const A& a, const B& b, T alpha, T beta) {
    if (beta == T{0}) {
        c.noalias() = alpha * (a * b);
    } else {
        if (beta != T{1}) c *= beta;
        c.noalias() += alpha * (a * b);
    }
}

} // namespace

template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
    const auto M = static_cast<Eigen::Index>(m);
    const auto N = static_cast<Eigen::Index>(n);
    const auto K = static_cast<Eigen::Index>(k);
    View<T> cv(c, M, N, Eigen::OuterStride<>(static_cast<Eigen::Index>(ldc)));
    const Eigen::OuterStride<> sa(static_cast<Eigen::Index>(lda));
    const Eigen::OuterStride<> sb(static_cast<Eigen::Index>(ldb));
    const bool ta = trans_a == Trans::yes;
    const bool tb = trans_b == Trans::yes;
    // Stored shapes: A is M x K (or K x M when transposed), B is K x N (or N x K).
    ConstView<T> av(a, ta ? K : M, ta ? M : K, sa);
    ConstView<T> bv(b, tb ? N : K, tb ? K : N, sb);
    if (!ta && !tb) accumulate(cv, av, bv, alpha, beta);
    else if (!ta && tb) accumulate(cv, av, bv.transpose(), alpha, beta);
    else if (ta && !tb) accumulate(cv, av.transpose(), bv, alpha, beta);
    else accumulate(cv, av.transpose(), bv.transpose(), alpha, beta);
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t, float, const float*, std::size_t,
                          const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t, double, const double*, std::size_t,
                           const double*, std::size_t, double, double*, std::size_t);

} // namespace bvae::nn
