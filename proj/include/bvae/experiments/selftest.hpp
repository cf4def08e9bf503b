#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bvae::experiments {

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Float64 central-difference checks: each layer kind within 1e-4 and the
// full objective on a reduced model (with an mlp branch) within 1e-3.
std::vector<CheckLine> run_grad_checks(std::uint64_t seed);

// Hungarian vs exhaustive assignment, ARI vs pair counting, NMI edge cases
// and relabeling invariance on random small instances.
std::vector<CheckLine> run_metric_selftests(std::uint64_t seed);

} // namespace bvae::experiments
