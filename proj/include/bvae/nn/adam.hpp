#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bvae/nn/network.hpp"

namespace bvae::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;

    bool operator==(const AdamConfig&) const = default;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<BasicTensor<T>> first_moment;
    std::vector<BasicTensor<T>> second_moment;
};

// Zero moments shaped like `params`.
template <typename T>
AdamState<T> make_adam_state(std::span<Parameter<T>* const> params, AdamConfig config = {});

// One bias-corrected Adam update using each parameter's accumulated grad.
// Throws NumericError naming the first parameter with a non-finite gradient;
// nothing is modified in that case.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state);

} // namespace bvae::nn
