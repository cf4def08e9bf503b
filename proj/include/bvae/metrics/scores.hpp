#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bvae/tensor.hpp"

namespace bvae::metrics {

// Assignment minimizing total cost: result[row] = column.
std::vector<std::size_t> hungarian(const TensorD& cost);

// Contingency counts between two labelings, each relabeled to 0..n-1 in
// order of first appearance. rows follow `a`, columns `b`.
std::vector<std::vector<std::size_t>> contingency(std::span<const int> a, std::span<const int> b);

// Best one-to-one mapping accuracy between clusters and labels.
double clustering_accuracy(std::span<const int> labels, std::span<const int> clusters);

// Mutual information over the larger of the two entropies.
double normalized_mutual_information(std::span<const int> labels, std::span<const int> clusters);

struct AriResult {
    double ari = 0.0;
    double rand_index = 0.0;
    std::uint64_t same_same = 0;           // pairs together in both partitions
    std::uint64_t different_different = 0; // pairs apart in both partitions
    std::uint64_t total_pairs = 0;
};

AriResult adjusted_rand_index(std::span<const int> labels, std::span<const int> clusters);

using ConfusionMatrix = std::array<std::array<std::size_t, 10>, 10>;

// entry[r][c] counts samples of true class r predicted as c.
ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted);
double confusion_accuracy(const ConfusionMatrix& m);

std::vector<int> to_ints(std::span<const std::uint8_t> labels);

} // namespace bvae::metrics
