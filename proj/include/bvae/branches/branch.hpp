#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bvae/branches/soft_knn.hpp"
#include "bvae/nn/network.hpp"

namespace bvae::branches {

// exact_knn and random_forest train through the soft_knn and class_mean
// surrogates respectively; the exact classifiers are only evaluated.
enum class BranchKind { mlp, linear, soft_knn, class_mean, exact_knn, random_forest };

std::string_view to_string(BranchKind kind);
BranchKind branch_kind_from_string(std::string_view name);

struct BranchConfig {
    BranchKind kind = BranchKind::mlp;
    std::size_t neighbors = 10;    // soft_knn / exact_knn
    double temperature = 1.0;      // soft_knn / class_mean
    double momentum = 0.9;         // class_mean centroid update
    std::size_t n_estimators = 40; // random_forest
    std::size_t max_depth = 0;     // random_forest, 0 = unlimited

    bool operator==(const BranchConfig&) const = default;
};

BranchKind training_kind(BranchKind kind);
void validate(const BranchConfig& config);

inline constexpr double prob_clamp = 1e-7;

template <typename T>
struct BranchOutput {
    BasicTensor<T> probs; // B x 10
    bool differentiable = true;
    std::vector<double> per_sample; // cross-entropy per row, filled by branch_loss
};

template <typename T>
struct BranchLoss {
    double loss = 0.0;              // mean over rows of weight * cross-entropy
    BasicTensor<T> grad_probs;      // d loss / d probs
    std::vector<double> per_sample; // unweighted cross-entropy per row
};

// Weighted categorical cross-entropy on probability rows, with probabilities
// clamped to [1e-7, 1 - 1e-7]. Non-finite probabilities raise NumericError.
template <typename T>
BranchLoss<T> branch_loss(const BasicTensor<T>& probs, std::span<const std::uint8_t> labels,
                          std::span<const T> sample_weights);

template <typename T>
struct BranchStep {
    double loss = 0.0;
    BasicTensor<T> grad_z;         // gradient of scale * loss
    BasicTensor<T> probs;
};

// Trainable classifier branch over latent codes.
template <typename T>
class Branch {
public:
    Branch(BranchConfig config, std::size_t latent_dim);

    const BranchConfig& config() const { return config_; }
    BranchKind kind() const { return training_kind(config_.kind); }
    std::size_t latent_dim() const { return latent_dim_; }

    void initialize(std::mt19937_64& rng);

    // Class probabilities. Instance-based kinds use the batch itself as
    // context (soft_knn) or the running centroids (class_mean).
    BranchOutput<T> forward(const BasicTensor<T>& z, std::span<const std::uint8_t> labels) const;

    // Forward, loss and backward for one batch with centroids held fixed.
    // Parameter gradients are accumulated with factor `scale`.
    BranchStep<T> loss_and_grad(const BasicTensor<T>& z, std::span<const std::uint8_t> labels,
                                std::span<const T> sample_weights, T scale);

    // update_centroids (class_mean only) followed by loss_and_grad.
    BranchStep<T> train_step(const BasicTensor<T>& z, std::span<const std::uint8_t> labels,
                             std::span<const T> sample_weights, T scale);

    std::vector<nn::Parameter<T>*> parameters();
    std::vector<const nn::Parameter<T>*> parameters() const;
    void zero_grad();

    // class_mean running centroids (10 x k) and which classes have been seen.
    const BasicTensor<T>& centroids() const { return centroids_; }
    const std::array<bool, num_classes>& seen() const { return seen_; }
    void set_centroids(BasicTensor<T> centroids, std::array<bool, num_classes> seen);
    void update_centroids(const BasicTensor<T>& z, std::span<const std::uint8_t> labels);

private:
    BasicTensor<T> centroid_logits(const BasicTensor<T>& z) const;

    BranchConfig config_;
    std::size_t latent_dim_;
    std::optional<nn::Network<T>> head_;
    BasicTensor<T> centroids_;
    std::array<bool, num_classes> seen_{};
};

} // namespace bvae::branches
