#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bvae/train/trainer.hpp"

namespace bvae::train {

inline constexpr char checkpoint_magic[8] = {'B', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t checkpoint_version = 1;

struct NamedTensor {
    std::string name;
    Tensor value;

    bool operator==(const NamedTensor&) const = default;
};

// Everything needed to continue a run at an epoch boundary. Random streams
// are derived from (seed, stream, epoch), so the master seed and the epoch
// counter are the complete generator state.
struct Checkpoint {
    TrainConfig config;
    vae::VaeArchitecture architecture;
    std::size_t epoch = 0;
    std::vector<EpochRecord> history;
    nn::AdamConfig adam_config;
    std::uint64_t adam_step = 0;
    std::vector<NamedTensor> parameters; // VAE then branch, in optimizer order
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::optional<Tensor> centroids; // class_mean only
    std::array<bool, 10> centroid_seen{};
    std::string train_fingerprint;

    bool operator==(const Checkpoint&) const = default;
};

// Layout: 8-byte magic, u32 version, u64 header length, u64 payload length,
// JSON header, little-endian f32 payload, u64 checksum (first 8 bytes of
// the SHA-256 of everything before it). All integers little-endian.
std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint);
// FormatError on bad magic, version or layout; IoError on truncation;
// ChecksumError when the checksum does not match.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

vae::VaeModel<float> model_from_checkpoint(const Checkpoint& checkpoint);

nlohmann::json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const vae::VaeArchitecture& arch);
vae::VaeArchitecture architecture_from_json(const nlohmann::json& j);

} // namespace bvae::train
