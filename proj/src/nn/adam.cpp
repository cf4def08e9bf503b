#include "bvae/nn/adam.hpp"

#include <cmath>

namespace bvae::nn {

template <typename T>
AdamState<T> make_adam_state(std::span<Parameter<T>* const> params, AdamConfig config) {
    AdamState<T> s;
    s.config = config;
    for (const Parameter<T>* p : params) {
        s.first_moment.emplace_back(p->value.shape());
        s.second_moment.emplace_back(p->value.shape());
    }
    return s;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state) {
    if (params.size() != state.first_moment.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                             std::to_string(state.first_moment.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter<T>& p = *params[i];
        if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape()) {
            throw DimensionError("adam_step: shape mismatch for parameter '" + p.name + "'");
        }
        for (std::size_t j = 0; j < p.grad.size(); ++j) {
            if (!std::isfinite(p.grad[j])) {
                throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "' at index " +
                                   std::to_string(j) + " (value " + std::to_string(p.grad[j]) + ")");
            }
        }
    }

    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const T beta1 = static_cast<T>(c.beta1);
    const T beta2 = static_cast<T>(c.beta2);
    const T one_minus_beta1 = static_cast<T>(1.0 - c.beta1);
    const T one_minus_beta2 = static_cast<T>(1.0 - c.beta2);
    const T correction1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
    const T lr = static_cast<T>(c.learning_rate);
    const T eps = static_cast<T>(c.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter<T>& p = *params[i];
        T* m = state.first_moment[i].data();
        T* v = state.second_moment[i].data();
        T* w = p.value.data();
        const T* g = p.grad.data();
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            m[j] = beta1 * m[j] + one_minus_beta1 * g[j];
            v[j] = beta2 * v[j] + one_minus_beta2 * g[j] * g[j];
            const T m_hat = m[j] / correction1;
            const T v_hat = v[j] / correction2;
            w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template AdamState<float> make_adam_state(std::span<Parameter<float>* const>, AdamConfig);
template AdamState<double> make_adam_state(std::span<Parameter<double>* const>, AdamConfig);
template void adam_step(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_step(std::span<Parameter<double>* const>, AdamState<double>&);

} // namespace bvae::nn
