#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bvae/branches/soft_knn.hpp"
#include "bvae/tensor.hpp"

namespace bvae::branches {

struct ForestConfig {
    std::size_t n_estimators = 40;
    std::size_t max_depth = 0; // 0 = grow until pure
    std::size_t min_samples_split = 2;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // x[feature] <= threshold
    int right = -1;
    std::array<double, num_classes> distribution{};
};

using DecisionTree = std::vector<TreeNode>;

// Bagged Gini CART trees with sqrt(d) candidate features per split.
class RandomForest {
public:
    explicit RandomForest(ForestConfig config = {});

    void fit(const Tensor& codes, std::span<const std::uint8_t> labels, std::uint64_t seed);
    TensorD predict_proba(const Tensor& queries) const;
    std::vector<std::uint8_t> predict(const Tensor& queries) const;

    const std::vector<DecisionTree>& trees() const { return trees_; }

private:
    ForestConfig config_;
    std::size_t features_ = 0;
    std::vector<DecisionTree> trees_;
};

} // namespace bvae::branches
