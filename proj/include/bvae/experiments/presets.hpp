#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bvae/train/config.hpp"

namespace bvae::experiments {

struct Variant {
    std::string name;  // directory-safe identifier, unique within a spec
    std::string label; // row label in the summary table
    train::TrainConfig config;
};

struct ExperimentSpec {
    std::string name;
    std::vector<Variant> variants;
    std::size_t repeats = 3; // repeat r trains with seed + r
};

// table1, table2, table3, table4 and knn_weights.
std::vector<std::string> preset_names();
ExperimentSpec make_preset(std::string_view name, std::uint64_t seed, bool quick);

// 10000 training samples and 10 epochs.
train::TrainConfig quick_profile(train::TrainConfig config);

// Unique non-empty variant names, at least one variant and one repeat, and
// every config valid.
void validate(const ExperimentSpec& spec);

} // namespace bvae::experiments
