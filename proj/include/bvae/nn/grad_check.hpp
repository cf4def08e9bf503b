#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "bvae/nn/network.hpp"

namespace bvae::nn {

struct GradCheckOptions {
    double step = 1e-5;
    // 0 checks every entry; otherwise an evenly strided subset of each tensor.
    std::size_t max_entries_per_tensor = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares each parameter's `grad` (the analytic gradient, read before any
// probe) against central differences of `loss`, which must re-evaluate the
// model at the current parameter values. Values are restored after each probe.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<Parameter<double>* const> params,
                           GradCheckOptions options = {});

} // namespace bvae::nn
