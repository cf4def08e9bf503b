#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bvae/data/dataset.hpp"

namespace bvae::data {

// Rotates a square single-channel image about its center with bilinear
// sampling; samples outside the image read as 0.
std::vector<float> rotate_image(std::span<const float> image, double angle, std::size_t side = image_side);

// One angle per sample, uniform on [0, 2*pi).
std::vector<double> rotation_angles(std::size_t count, std::uint64_t seed, Split split);

// Rotated copy of `ds` with angles fixed at construction.
LabeledDataset make_rotated_dataset(const LabeledDataset& ds, std::uint64_t seed);

} // namespace bvae::data
