#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvae/branches/branch.hpp"
#include "bvae/data/dataset.hpp"
#include "bvae/data/targets.hpp"
#include "bvae/nn/adam.hpp"
#include "bvae/train/config.hpp"
#include "bvae/vae/loss.hpp"
#include "bvae/vae/model.hpp"

namespace bvae::train {

// Self mode returns the images; fixed mode returns targets[label] per row.
Tensor resolve_target(TargetMode mode, const Tensor& images, std::span<const std::uint8_t> labels,
                      const data::TargetSet* targets);

struct EpochRecord {
    std::size_t epoch = 0;
    vae::LossBreakdown loss;        // sample-count weighted mean over the epoch's batches
    vae::LossBreakdown first_batch; // first batch of the epoch, before its update
    std::size_t clamped_pixels = 0;
    std::optional<double> branch_accuracy; // branch argmax vs label over the epoch's batches
    std::optional<double> exact_accuracy;  // exact kNN / forest refit on held-out latents

    bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint;

class Trainer {
public:
    // `targets` is required in fixed target mode. `arch` overrides the
    // default MNIST architecture (latent size and output activation still
    // come from the config).
    Trainer(TrainConfig config, const data::LabeledDataset& train, const data::TargetSet* targets = nullptr,
            std::optional<vae::VaeArchitecture> arch = std::nullopt);

    // Restores model, branch, optimizer, epoch counter and history. Throws
    // ConsistencyError when `train` differs from the set the run started on.
    static Trainer resume(const Checkpoint& checkpoint, const data::LabeledDataset& train,
                          const data::TargetSet* targets = nullptr);

    const TrainConfig& config() const { return config_; }
    std::size_t epoch() const { return epoch_; }
    bool finished() const { return epoch_ >= config_.epochs; }

    // One pass over the training set. Throws NumericError on a non-finite
    // loss; parameters keep the values from the last successful step.
    EpochRecord run_epoch();

    // Runs the remaining epochs, calling `on_epoch` after each.
    void run(const std::function<void(const EpochRecord&)>& on_epoch = {});

    vae::VaeModel<float>& model() { return model_; }
    const vae::VaeModel<float>& model() const { return model_; }
    branches::Branch<float>* branch() { return branch_.get(); }
    const branches::Branch<float>* branch() const { return branch_.get(); }
    const nn::AdamState<float>& optimizer() const { return adam_; }
    const std::vector<EpochRecord>& history() const { return history_; }
    const std::string& train_fingerprint() const { return fingerprint_; }

    Checkpoint checkpoint() const;

private:
    std::vector<nn::Parameter<float>*> all_parameters();
    std::optional<double> exact_diagnostic() const;

    TrainConfig config_;
    const data::LabeledDataset* train_;
    const data::TargetSet* targets_;
    vae::VaeModel<float> model_;
    std::unique_ptr<branches::Branch<float>> branch_;
    nn::AdamState<float> adam_;
    std::size_t epoch_ = 0;
    std::vector<EpochRecord> history_;
    std::string fingerprint_;
};

// SHA-256 over labels and pixel bytes of a dataset.
std::string dataset_fingerprint(const data::LabeledDataset& ds);

// Latents used by the exact-classifier diagnostic: at most this many
// training means, first 90% fit, last 10% scored.
inline constexpr std::size_t diagnostic_samples = 10000;

} // namespace bvae::train
