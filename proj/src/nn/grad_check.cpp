#include "bvae/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace bvae::nn {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<Parameter<double>* const> params,
                           GradCheckOptions options) {
    GradCheckReport report;
    std::vector<TensorD> analytic;
    for (const Parameter<double>* p : params) analytic.push_back(p->grad);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter<double>* p = params[pi];
        const std::size_t n = p->value.size();
        const std::size_t stride =
            options.max_entries_per_tensor == 0 || n <= options.max_entries_per_tensor
                ? 1
                : (n + options.max_entries_per_tensor - 1) / options.max_entries_per_tensor;
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = p->value[i];
            p->value[i] = saved + options.step;
            const double up = loss();
            p->value[i] = saved - options.step;
            const double down = loss();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double err = relative_error(analytic[pi][i], numeric);
            ++report.entries_checked;
            if (err > report.max_relative_error || report.worst_parameter.empty()) {
                report.max_relative_error = std::max(report.max_relative_error, err);
                report.worst_parameter = p->name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

} // namespace bvae::nn
