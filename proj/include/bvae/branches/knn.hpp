#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bvae/tensor.hpp"

namespace bvae::branches {

// Brute-force k-nearest-neighbour vote. Distance ties go to the lower
// training index; vote ties to the lower class.
class KnnClassifier {
public:
    explicit KnnClassifier(std::size_t neighbors);

    void fit(const Tensor& codes, std::span<const std::uint8_t> labels);
    TensorD predict_proba(const Tensor& queries) const; // vote fractions, M x 10
    std::vector<std::uint8_t> predict(const Tensor& queries) const;

    std::size_t neighbors() const { return neighbors_; }

private:
    std::size_t neighbors_;
    Tensor codes_;
    std::vector<std::uint8_t> labels_;
};

// Index of the largest entry; ties resolve to the lowest index.
std::uint8_t argmax_class(std::span<const double> probs);

} // namespace bvae::branches
