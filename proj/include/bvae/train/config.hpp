#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "bvae/branches/branch.hpp"
#include "bvae/data/batches.hpp"
#include "bvae/data/targets.hpp"
#include "bvae/vae/loss.hpp"

namespace bvae::train {

enum class TargetMode { self, fixed };

struct ProbeConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;

    bool operator==(const ProbeConfig&) const = default;
};

struct TrainConfig {
    double alpha = 1.0;
    double lambda = 0.0;
    std::optional<branches::BranchConfig> branch;
    TargetMode target_mode = TargetMode::self;
    data::TargetKind target_kind = data::TargetKind::exemplar; // used in fixed mode
    std::size_t latent_dim = 2;
    std::size_t epochs = 30;
    std::size_t batch_size = 512;
    std::uint64_t seed = 0;
    data::ClassWeights class_weights = data::uniform_class_weights();
    vae::ReconMode recon_mode = vae::ReconMode::bce;
    std::string dataset = "mnist"; // mnist or mnist_rotated
    std::size_t train_limit = 0;   // use only the first N training samples; 0 = all
    ProbeConfig probe;

    bool operator==(const TrainConfig&) const = default;
};

// Applies forced settings (mse for synthetic fixed targets) and throws
// ConfigError on invalid combinations.
TrainConfig normalized(TrainConfig config);
void validate(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
// Unknown keys and malformed values raise ConfigError. Missing keys keep
// their defaults.
TrainConfig config_from_json(const nlohmann::json& j);

// First 16 hex digits of the SHA-256 of the canonical JSON form.
std::string config_hash(const TrainConfig& config);

// Named per-class weight maps: "uniform", "knn10" {0,1,2: x10; 3,6,7,9: /10},
// "pairs2" {0,1,2,6: x2; 3,5,7,9: /2}, "six_zero2" {0,6: x2; 4,5,8: /2}.
data::ClassWeights class_weight_preset(std::string_view name);

nn::Activation output_activation(vae::ReconMode mode);

} // namespace bvae::train
