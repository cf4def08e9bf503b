#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>

#include "bvae/data/dataset.hpp"

namespace bvae::data {

enum class TargetKind { exemplar, gaussian, square, wavelet };

std::string_view to_string(TargetKind kind);
TargetKind target_kind_from_string(std::string_view name);

inline constexpr double target_center_radius = 9.0;
inline constexpr double gaussian_sigma = 2.0;
inline constexpr int square_side = 6;
inline constexpr int wavelet_side = 12;

// One fixed output image per class, targets[d] is the image for class d.
struct TargetSet {
    TargetKind kind = TargetKind::exemplar;
    Tensor targets;
    float min_value = 0.0f;
    float max_value = 0.0f;
    // Training index each exemplar was copied from; unused for synthetic kinds.
    std::array<std::size_t, num_classes> source_index{};
};

// Pixel (row, col) centers: evenly spaced on a circle around the image
// center, class 0 at the top, proceeding clockwise.
std::array<std::pair<int, int>, num_classes> class_centers();

TargetSet make_target_set(TargetKind kind, const LabeledDataset& train, std::uint64_t seed);

} // namespace bvae::data
