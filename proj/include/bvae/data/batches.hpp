#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "bvae/data/dataset.hpp"

namespace bvae::data {

using ClassWeights = std::array<float, num_classes>;

inline ClassWeights uniform_class_weights() {
    ClassWeights w;
    w.fill(1.0f);
    return w;
}

struct Batch {
    Tensor images;                     // B x 28 x 28 x 1
    Tensor onehot;                     // B x 10
    std::vector<float> weights;        // per-sample, from the class weight map
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> indices;  // positions in the source dataset
};

// Permutation of 0..n-1 determined by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

Batch gather_batch(const LabeledDataset& ds, std::span<const std::size_t> indices,
                   const ClassWeights& weights = uniform_class_weights());

// Seeded shuffle per epoch; the final partial batch is kept.
class BatchIterator {
public:
    BatchIterator(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                  ClassWeights weights = uniform_class_weights());

    std::size_t batch_count() const;
    Batch batch(std::size_t b) const;
    const std::vector<std::size_t>& order() const { return order_; }

private:
    const LabeledDataset& ds_;
    std::size_t batch_size_;
    ClassWeights weights_;
    std::vector<std::size_t> order_;
};

std::vector<Batch> batch_iter(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed,
                              std::size_t epoch, const ClassWeights& weights = uniform_class_weights());

} // namespace bvae::data
