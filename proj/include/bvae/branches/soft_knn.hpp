#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bvae/tensor.hpp"

namespace bvae::branches {

inline constexpr std::size_t num_classes = 10;

template <typename T>
struct SoftKnnCache {
    std::vector<std::vector<std::size_t>> neighbors; // per query, nearest first
    std::vector<std::vector<T>> weights;             // softmax weights, aligned with neighbors
};

// For each query, softmax over its k nearest context points of -d^2 / tau,
// and the resulting mixture of their one-hot labels. With `exclude_self`,
// queries and context are the same set and a point never neighbors itself.
template <typename T>
BasicTensor<T> soft_knn_probs(const BasicTensor<T>& queries, const BasicTensor<T>& context,
                              std::span<const std::uint8_t> context_labels, std::size_t k, double temperature,
                              bool exclude_self, SoftKnnCache<T>* cache = nullptr);

template <typename T>
struct SoftKnnGrads {
    BasicTensor<T> queries;
    BasicTensor<T> context;
};

template <typename T>
SoftKnnGrads<T> soft_knn_backward(const BasicTensor<T>& queries, const BasicTensor<T>& context,
                                  std::span<const std::uint8_t> context_labels, double temperature,
                                  const SoftKnnCache<T>& cache, const BasicTensor<T>& grad_probs);

} // namespace bvae::branches
