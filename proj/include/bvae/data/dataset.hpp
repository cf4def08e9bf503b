#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bvae/tensor.hpp"

namespace bvae::data {

inline constexpr std::size_t image_side = 28;
inline constexpr std::size_t image_pixels = image_side * image_side;
inline constexpr std::size_t num_classes = 10;

enum class Split { train, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

// Images are N x 28 x 28 x 1 in [0, 1]; labels are class ids 0..9.
struct LabeledDataset {
    Tensor images;
    std::vector<std::uint8_t> labels;
    Split split = Split::train;
    std::string kind = "mnist";
    std::uint64_t seed = 0;

    std::size_t size() const { return labels.size(); }
    std::span<const float> image(std::size_t i) const { return images.row(i); }
};

// Throws ValidationError on out-of-range pixels or labels and
// ConsistencyError when image and label counts differ.
void validate(const LabeledDataset& ds);

// First `count` samples (or all, if fewer).
LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t count);

// Raw little-endian f32 pixels in `<prefix>.f32` plus a JSON sidecar
// `<prefix>.json` holding shape, labels, split, kind and seed.
void save_dataset_cache(const LabeledDataset& ds, const std::filesystem::path& prefix);
LabeledDataset load_dataset_cache(const std::filesystem::path& prefix);

} // namespace bvae::data
