#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>

#include "bvae/vae/model.hpp"

namespace bvae::vae {

enum class ReconMode { bce, mse };

std::string_view to_string(ReconMode mode);
ReconMode recon_mode_from_string(std::string_view name);

inline constexpr double bce_clamp = 1e-7;

// Batch means of per-sample terms (sums over pixels / latent dims).
struct LossBreakdown {
    double recon = 0.0;
    double kl = 0.0;
    double branch = 0.0;
    double total = 0.0;

    bool operator==(const LossBreakdown&) const = default;
};

// total = alpha * recon + kl + lambda * branch
LossBreakdown total_loss(double alpha, double lambda, double recon, double kl, double branch);

// Closed-form KL(q || N(0, I)) summed over latent dims; one value per row.
template <typename T>
std::vector<double> kl_per_sample(const BasicTensor<T>& mu, const BasicTensor<T>& log_var);
template <typename T>
double kl_divergence(const BasicTensor<T>& mu, const BasicTensor<T>& log_var);

struct ReconResult {
    std::vector<double> per_sample;
    double mean = 0.0;
    std::size_t clamped = 0; // bce predictions pushed into [1e-7, 1-1e-7]
};

template <typename T>
ReconResult reconstruction_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target, ReconMode mode);

// What the classifier branch contributes to one step: its weighted-mean
// loss (unscaled) and the gradient of `scale * loss` with respect to z. The
// callback accumulates its own parameter gradients with the same scale.
template <typename T>
struct BranchTerm {
    double loss = 0.0;
    BasicTensor<T> grad_z;
};

template <typename T>
using BranchCallback = std::function<BranchTerm<T>(const BasicTensor<T>& z, T scale)>;

struct StepSettings {
    double alpha = 1.0;
    double lambda = 0.0;
    ReconMode mode = ReconMode::bce;
};

template <typename T>
struct StepResult {
    LossBreakdown loss;
    std::size_t clamped_pixels = 0;
    BasicTensor<T> mu;
    BasicTensor<T> log_var;
    BasicTensor<T> z;
};

// Forward and backward pass of the weighted objective
//   mean_b w_b (alpha recon_b + kl_b) + lambda * L_branch
// accumulating gradients into the model parameters (and, through the
// callback, into the branch). Gradients are not zeroed first.
template <typename T>
StepResult<T> compute_loss_and_gradients(VaeModel<T>& model, const BasicTensor<T>& images,
                                         const BasicTensor<T>& targets, const BasicTensor<T>& epsilon,
                                         std::span<const T> sample_weights, const StepSettings& settings,
                                         const BranchCallback<T>* branch = nullptr);

} // namespace bvae::vae
