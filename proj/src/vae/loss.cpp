#include "bvae/vae/loss.hpp"

#include <algorithm>
#include <cmath>

namespace bvae::vae {

std::string_view to_string(ReconMode mode) { return mode == ReconMode::bce ? "bce" : "mse"; }

ReconMode recon_mode_from_string(std::string_view name) {
    if (name == "bce") return ReconMode::bce;
    if (name == "mse") return ReconMode::mse;
    throw ConfigError("unknown reconstruction mode '" + std::string(name) + "' (expected bce or mse)");
}

LossBreakdown total_loss(double alpha, double lambda, double recon, double kl, double branch) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    return {recon, kl, branch, alpha * recon + kl + lambda * branch};
}

template <typename T>
std::vector<double> kl_per_sample(const BasicTensor<T>& mu, const BasicTensor<T>& log_var) {
    if (mu.shape() != log_var.shape() || mu.rank() != 2) {
        throw DimensionError("kl_divergence: expected matching B x k tensors, got " + shape_string(mu.shape()) +
                             " and " + shape_string(log_var.shape()));
    }
    const std::size_t b = mu.extent(0);
    const std::size_t k = mu.extent(1);
    std::vector<double> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double m = mu.at(i, j);
            const double lv = log_var.at(i, j);
            s += 1.0 + lv - std::exp(lv) - m * m;
        }
        out[i] = -0.5 * s;
    }
    return out;
}

template <typename T>
double kl_divergence(const BasicTensor<T>& mu, const BasicTensor<T>& log_var) {
    const std::vector<double> per = kl_per_sample(mu, log_var);
    double s = 0.0;
    for (double v : per) s += v;
    return s / static_cast<double>(per.size());
}

template <typename T>
ReconResult reconstruction_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target, ReconMode mode) {
    if (prediction.shape() != target.shape()) {
        throw DimensionError("reconstruction_loss: prediction " + shape_string(prediction.shape()) +
                             " vs target " + shape_string(target.shape()));
    }
    const std::size_t b = prediction.extent(0);
    const std::size_t per = prediction.size() / b;
    ReconResult r;
    r.per_sample.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        double s = 0.0;
        for (std::size_t p = i * per; p < (i + 1) * per; ++p) {
            const double y = prediction[p];
            const double t = target[p];
            if (mode == ReconMode::mse) {
                s += (y - t) * (y - t);
            } else {
                const double c = std::clamp(y, bce_clamp, 1.0 - bce_clamp);
                if (c != y) ++r.clamped;
                s -= t * std::log(c) + (1.0 - t) * std::log(1.0 - c);
            }
        }
        r.per_sample[i] = s;
        r.mean += s;
    }
    r.mean /= static_cast<double>(b);
    return r;
}

template <typename T>
StepResult<T> compute_loss_and_gradients(VaeModel<T>& model, const BasicTensor<T>& images,
                                         const BasicTensor<T>& targets, const BasicTensor<T>& epsilon,
                                         std::span<const T> sample_weights, const StepSettings& settings,
                                         const BranchCallback<T>* branch) {
    const std::size_t b = images.extent(0);
    const std::size_t k = model.latent_dim();
    if (targets.shape() != images.shape()) {
        throw DimensionError("targets " + shape_string(targets.shape()) + " do not match images " +
                             shape_string(images.shape()));
    }
    if (epsilon.shape() != Shape{b, k}) throw DimensionError("epsilon must be " + shape_string({b, k}));
    if (sample_weights.size() != b) throw DimensionError("need one sample weight per image");
    const bool want_mse = settings.mode == ReconMode::mse;
    const bool sigmoid_out = model.architecture().output == nn::Activation::sigmoid;
    if (want_mse == sigmoid_out) {
        throw ConfigError("bce requires a sigmoid decoder output and mse a relu output");
    }

    // Encoder.
    typename nn::Network<T>::Cache trunk_cache, mu_cache, lv_cache, dec_cache;
    const BasicTensor<T> h = model.trunk().forward(images, &trunk_cache);
    StepResult<T> out;
    out.mu = model.mu_head().forward(h, &mu_cache);
    const BasicTensor<T> raw_lv = model.log_var_head().forward(h, &lv_cache);
    out.log_var = raw_lv;
    for (T& v : out.log_var.values()) v = std::clamp(v, static_cast<T>(log_var_min), static_cast<T>(log_var_max));
    out.z = reparameterize(out.mu, out.log_var, epsilon);

    // Decoder and reconstruction term, differentiated at the logits.
    const BasicTensor<T> logits = model.decode_logits(out.z, &dec_cache);
    const BasicTensor<T> prediction = nn::activation_forward(model.architecture().output, logits);
    const ReconResult recon = reconstruction_loss(prediction, targets, settings.mode);
    out.clamped_pixels = recon.clamped;
    const std::vector<double> kl = kl_per_sample(out.mu, out.log_var);

    const std::size_t per = images.size() / b;
    BasicTensor<T> grad_logits(logits.shape());
    double recon_mean = 0.0;
    double kl_mean = 0.0;
    std::vector<T> scale(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double w = sample_weights[i];
        scale[i] = static_cast<T>(w / static_cast<double>(b));
        recon_mean += w * recon.per_sample[i];
        kl_mean += w * kl[i];
        const T c = static_cast<T>(settings.alpha) * scale[i];
        for (std::size_t p = i * per; p < (i + 1) * per; ++p) {
            const T y = prediction[p];
            const T t = targets[p];
            if (want_mse) {
                grad_logits[p] = logits[p] > T{0} ? c * T{2} * (y - t) : T{0};
            } else {
                const bool clamped = static_cast<double>(y) < bce_clamp || static_cast<double>(y) > 1.0 - bce_clamp;
                grad_logits[p] = clamped ? T{0} : c * (y - t);
            }
        }
    }
    recon_mean /= static_cast<double>(b);
    kl_mean /= static_cast<double>(b);

    BasicTensor<T> grad_z = model.decoder().backward(dec_cache, grad_logits);

    double branch_loss = 0.0;
    if (branch != nullptr && *branch) {
        const T lambda = static_cast<T>(settings.lambda);
        BranchTerm<T> term = (*branch)(out.z, lambda);
        branch_loss = term.loss;
        if (settings.lambda != 0.0) {
            if (term.grad_z.shape() != grad_z.shape()) throw DimensionError("branch grad_z has the wrong shape");
            for (std::size_t i = 0; i < grad_z.size(); ++i) grad_z[i] += term.grad_z[i];
        }
    }

    BasicTensor<T> grad_mu(out.mu.shape());
    BasicTensor<T> grad_lv(out.log_var.shape());
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = i * k + j;
            const T lv = out.log_var[idx];
            grad_mu[idx] = grad_z[idx] + scale[i] * out.mu[idx];
            const bool clamped = raw_lv[idx] < static_cast<T>(log_var_min) || raw_lv[idx] > static_cast<T>(log_var_max);
            grad_lv[idx] = clamped ? T{0}
                                   : grad_z[idx] * T{0.5} * std::exp(lv / T{2}) * epsilon[idx] +
                                         scale[i] * T{0.5} * (std::exp(lv) - T{1});
        }
    }
    BasicTensor<T> grad_h = model.mu_head().backward(mu_cache, grad_mu);
    const BasicTensor<T> grad_h_lv = model.log_var_head().backward(lv_cache, grad_lv);
    for (std::size_t i = 0; i < grad_h.size(); ++i) grad_h[i] += grad_h_lv[i];
    model.trunk().backward(trunk_cache, grad_h);

    out.loss = total_loss(settings.alpha, settings.lambda, recon_mean, kl_mean, branch_loss);
    return out;
}

#define BVAE_INSTANTIATE_LOSS(T)                                                                              \
    template std::vector<double> kl_per_sample(const BasicTensor<T>&, const BasicTensor<T>&);                 \
    template double kl_divergence(const BasicTensor<T>&, const BasicTensor<T>&);                              \
    template ReconResult reconstruction_loss(const BasicTensor<T>&, const BasicTensor<T>&, ReconMode);        \
    template StepResult<T> compute_loss_and_gradients(VaeModel<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                                      const BasicTensor<T>&, std::span<const T>,              \
                                                      const StepSettings&, const BranchCallback<T>*);

BVAE_INSTANTIATE_LOSS(float)
BVAE_INSTANTIATE_LOSS(double)

} // namespace bvae::vae
