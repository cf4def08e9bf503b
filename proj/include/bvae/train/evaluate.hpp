#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bvae/data/dataset.hpp"
#include "bvae/metrics/scores.hpp"
#include "bvae/train/config.hpp"
#include "bvae/vae/model.hpp"

namespace bvae::train {

struct ProbeResult {
    double accuracy = 0.0;
    std::vector<std::uint8_t> predictions;
    metrics::ConfusionMatrix confusion{};
};

// Trains a fresh 512/256/128/10 softmax MLP with Adam on (train_codes,
// train_labels) and scores it on the test codes.
ProbeResult evaluate_probe(const Tensor& train_codes, std::span<const std::uint8_t> train_labels,
                           const Tensor& test_codes, std::span<const std::uint8_t> test_labels,
                           const ProbeConfig& config, std::uint64_t seed);

struct MetricsReport {
    double nmi = 0.0;
    double acc = 0.0;
    double ari = 0.0;
    double probe_accuracy = 0.0;
    metrics::ConfusionMatrix confusion{}; // probe predictions on the test split
    metrics::AriResult ari_detail;
    double kmeans_wcss = 0.0;
};

// k-means (K = 10) on test latent means for NMI / ACC / ARI, and the probe
// trained on train latent means.
MetricsReport evaluate_model(const vae::VaeModel<float>& model, const data::LabeledDataset& train,
                             const data::LabeledDataset& test, const ProbeConfig& probe, std::uint64_t seed);

nlohmann::json to_json(const MetricsReport& report);

} // namespace bvae::train
