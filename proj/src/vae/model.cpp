#include "bvae/vae/model.hpp"

#include <algorithm>

namespace bvae::vae {

using nn::Activation;
using nn::LayerSpec;

VaeArchitecture VaeArchitecture::mnist(std::size_t latent_dim, Activation output) {
    VaeArchitecture a;
    a.latent_dim = latent_dim;
    a.output = output;
    return a;
}

namespace {

void check_architecture(const VaeArchitecture& a) {
    if (a.image_side == 0 || a.image_side % 4 != 0) {
        throw ConfigError("image side must be a positive multiple of 4, got " + std::to_string(a.image_side));
    }
    if (a.latent_dim == 0) throw ConfigError("latent dimension must be positive");
    if (a.output != Activation::sigmoid && a.output != Activation::relu) {
        throw ConfigError("decoder output activation must be sigmoid or relu, got " + nn::to_string(a.output));
    }
}

std::vector<LayerSpec> trunk_layers(const VaeArchitecture& a) {
    return {LayerSpec::conv2d("conv1", a.conv1_filters, a.kernel, 2),
            LayerSpec::activate("conv1_relu", Activation::relu),
            LayerSpec::conv2d("conv2", a.conv2_filters, a.kernel, 2),
            LayerSpec::activate("conv2_relu", Activation::relu),
            LayerSpec::flatten("flatten"),
            LayerSpec::dense("hidden", a.hidden_units),
            LayerSpec::activate("hidden_relu", Activation::relu)};
}

std::vector<LayerSpec> decoder_layers(const VaeArchitecture& a) {
    const std::size_t s = a.image_side / 4;
    return {LayerSpec::dense("expand", s * s * a.conv2_filters),
            LayerSpec::activate("expand_relu", Activation::relu),
            LayerSpec::reshape("unflatten", {s, s, a.conv2_filters}),
            LayerSpec::conv2d_transpose("deconv1", a.conv2_filters, a.kernel, 2),
            LayerSpec::activate("deconv1_relu", Activation::relu),
            LayerSpec::conv2d_transpose("deconv2", a.conv1_filters, a.kernel, 2),
            LayerSpec::activate("deconv2_relu", Activation::relu),
            LayerSpec::conv2d("output", 1, a.kernel, 1)};
}

} // namespace

template <typename T>
VaeModel<T>::VaeModel(VaeArchitecture arch) : arch_(arch) {
    check_architecture(arch_);
    trunk_ = nn::Network<T>("encoder", {arch_.image_side, arch_.image_side, 1}, trunk_layers(arch_));
    mu_head_ = nn::Network<T>("z_mean", {arch_.hidden_units}, {LayerSpec::dense("dense", arch_.latent_dim)});
    log_var_head_ =
        nn::Network<T>("z_log_var", {arch_.hidden_units}, {LayerSpec::dense("dense", arch_.latent_dim)});
    decoder_ = nn::Network<T>("decoder", {arch_.latent_dim}, decoder_layers(arch_));
}

template <typename T>
void VaeModel<T>::initialize(std::mt19937_64& rng) {
    trunk_.initialize(rng);
    mu_head_.initialize(rng);
    log_var_head_.initialize(rng);
    decoder_.initialize(rng);
}

template <typename T>
void VaeModel<T>::check_images(const BasicTensor<T>& images) const {
    const Shape& s = images.shape();
    if (s.size() != 4 || s[1] != arch_.image_side || s[2] != arch_.image_side || s[3] != 1) {
        throw DimensionError("encoder expects B x " + std::to_string(arch_.image_side) + " x " +
                             std::to_string(arch_.image_side) + " x 1 images, got " + shape_string(s));
    }
}

template <typename T>
Encoding<T> VaeModel<T>::encode(const BasicTensor<T>& images) const {
    check_images(images);
    const BasicTensor<T> h = trunk_.forward(images);
    Encoding<T> e{mu_head_.forward(h), log_var_head_.forward(h)};
    for (T& v : e.log_var.values()) v = std::clamp(v, static_cast<T>(log_var_min), static_cast<T>(log_var_max));
    return e;
}

template <typename T>
BasicTensor<T> VaeModel<T>::decode_logits(const BasicTensor<T>& z, typename nn::Network<T>::Cache* cache) const {
    if (z.rank() != 2 || z.extent(1) != arch_.latent_dim) {
        throw DimensionError("decoder expects B x " + std::to_string(arch_.latent_dim) + " codes, got " +
                             shape_string(z.shape()));
    }
    return decoder_.forward(z, cache);
}

template <typename T>
BasicTensor<T> VaeModel<T>::decode(const BasicTensor<T>& z) const {
    return nn::activation_forward(arch_.output, decode_logits(z));
}

template <typename T>
std::vector<nn::Parameter<T>*> VaeModel<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    for (nn::Network<T>* net : {&trunk_, &mu_head_, &log_var_head_, &decoder_}) {
        for (auto& p : net->parameters()) out.push_back(&p);
    }
    return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> VaeModel<T>::parameters() const {
    std::vector<const nn::Parameter<T>*> out;
    for (const nn::Network<T>* net : {&trunk_, &mu_head_, &log_var_head_, &decoder_}) {
        for (const auto& p : net->parameters()) out.push_back(&p);
    }
    return out;
}

template <typename T>
std::size_t VaeModel<T>::parameter_count() const {
    return trunk_.parameter_count() + mu_head_.parameter_count() + log_var_head_.parameter_count() +
           decoder_.parameter_count();
}

template <typename T>
void VaeModel<T>::zero_grad() {
    trunk_.zero_grad();
    mu_head_.zero_grad();
    log_var_head_.zero_grad();
    decoder_.zero_grad();
}

template <typename T>
BasicTensor<T> reparameterize(const BasicTensor<T>& mu, const BasicTensor<T>& log_var, const BasicTensor<T>& epsilon) {
    if (mu.shape() != log_var.shape() || mu.shape() != epsilon.shape()) {
        throw DimensionError("reparameterize: shapes " + shape_string(mu.shape()) + ", " +
                             shape_string(log_var.shape()) + ", " + shape_string(epsilon.shape()) + " differ");
    }
    BasicTensor<T> z(mu.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(log_var[i] / T{2}) * epsilon[i];
    return z;
}

template <typename T>
BasicTensor<T> standard_normal(Shape shape, std::mt19937_64& rng) {
    std::normal_distribution<T> dist(T{0}, T{1});
    BasicTensor<T> out(std::move(shape));
    for (T& v : out.values()) v = dist(rng);
    return out;
}

template <typename T>
BasicTensor<T> encode_means(const VaeModel<T>& model, const BasicTensor<T>& images, std::size_t chunk) {
    const std::size_t n = images.extent(0);
    const std::size_t per = images.size() / n;
    const std::size_t k = model.latent_dim();
    BasicTensor<T> out({n, k});
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t b = std::min(chunk, n - begin);
        Shape s = images.shape();
        s[0] = b;
        BasicTensor<T> x(s, std::vector<T>(images.data() + begin * per, images.data() + (begin + b) * per));
        const Encoding<T> e = model.encode(x);
        std::copy(e.mu.values().begin(), e.mu.values().end(), out.data() + begin * k);
    }
    return out;
}

template <typename T>
BasicTensor<T> decoder_grid(const VaeModel<T>& model, double lo, double hi, std::size_t steps) {
    if (model.latent_dim() != 2) {
        throw ConfigError("decoder grid needs a 2-dimensional latent space, model has " +
                          std::to_string(model.latent_dim()));
    }
    if (steps < 2) throw ConfigError("decoder grid needs at least 2 steps");
    BasicTensor<T> z({steps * steps, 2});
    const double step = (hi - lo) / static_cast<double>(steps - 1);
    for (std::size_t i = 0; i < steps; ++i) {
        for (std::size_t j = 0; j < steps; ++j) {
            z.at(i * steps + j, 0) = static_cast<T>(lo + step * static_cast<double>(j));
            z.at(i * steps + j, 1) = static_cast<T>(hi - step * static_cast<double>(i));
        }
    }
    return model.decode(z);
}

#define BVAE_INSTANTIATE_MODEL(T)                                                                          \
    template class VaeModel<T>;                                                                            \
    template BasicTensor<T> reparameterize(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> standard_normal<T>(Shape, std::mt19937_64&);                                   \
    template BasicTensor<T> encode_means(const VaeModel<T>&, const BasicTensor<T>&, std::size_t);          \
    template BasicTensor<T> decoder_grid(const VaeModel<T>&, double, double, std::size_t);

BVAE_INSTANTIATE_MODEL(float)
BVAE_INSTANTIATE_MODEL(double)

} // namespace bvae::vae
