#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "bvae/nn/network.hpp"

namespace bvae::vae {

inline constexpr double log_var_min = -10.0;
inline constexpr double log_var_max = 10.0;

struct VaeArchitecture {
    std::size_t image_side = 28; // must be divisible by 4
    std::size_t conv1_filters = 32;
    std::size_t conv2_filters = 64;
    std::size_t hidden_units = 16;
    std::size_t latent_dim = 2;
    std::size_t kernel = 3;
    nn::Activation output = nn::Activation::sigmoid; // sigmoid or relu

    static VaeArchitecture mnist(std::size_t latent_dim, nn::Activation output = nn::Activation::sigmoid);

    bool operator==(const VaeArchitecture&) const = default;
};

template <typename T>
struct Encoding {
    BasicTensor<T> mu;      // B x k
    BasicTensor<T> log_var; // B x k, clamped
};

template <typename T>
class VaeModel {
public:
    explicit VaeModel(VaeArchitecture arch);

    const VaeArchitecture& architecture() const { return arch_; }
    std::size_t latent_dim() const { return arch_.latent_dim; }

    void initialize(std::mt19937_64& rng);

    Encoding<T> encode(const BasicTensor<T>& images) const;
    // Decoder output after the final activation, B x side x side x 1.
    BasicTensor<T> decode(const BasicTensor<T>& z) const;
    // Pre-activation decoder output.
    BasicTensor<T> decode_logits(const BasicTensor<T>& z, typename nn::Network<T>::Cache* cache = nullptr) const;

    nn::Network<T>& trunk() { return trunk_; }
    nn::Network<T>& mu_head() { return mu_head_; }
    nn::Network<T>& log_var_head() { return log_var_head_; }
    nn::Network<T>& decoder() { return decoder_; }
    const nn::Network<T>& trunk() const { return trunk_; }
    const nn::Network<T>& mu_head() const { return mu_head_; }
    const nn::Network<T>& log_var_head() const { return log_var_head_; }
    const nn::Network<T>& decoder() const { return decoder_; }

    // Stable order: trunk, mu head, log-variance head, decoder.
    std::vector<nn::Parameter<T>*> parameters();
    std::vector<const nn::Parameter<T>*> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();

private:
    void check_images(const BasicTensor<T>& images) const;

    VaeArchitecture arch_;
    nn::Network<T> trunk_;
    nn::Network<T> mu_head_;
    nn::Network<T> log_var_head_;
    nn::Network<T> decoder_;
};

template <typename To, typename From>
void copy_model(const VaeModel<From>& from, VaeModel<To>& to) {
    if (!(from.architecture() == to.architecture())) throw DimensionError("copy_model: architectures differ");
    nn::copy_parameters(from.trunk(), to.trunk());
    nn::copy_parameters(from.mu_head(), to.mu_head());
    nn::copy_parameters(from.log_var_head(), to.log_var_head());
    nn::copy_parameters(from.decoder(), to.decoder());
}

// z = mu + exp(log_var / 2) * epsilon
template <typename T>
BasicTensor<T> reparameterize(const BasicTensor<T>& mu, const BasicTensor<T>& log_var, const BasicTensor<T>& epsilon);

template <typename T>
BasicTensor<T> standard_normal(Shape shape, std::mt19937_64& rng);

// Latent means for every image, computed in chunks.
template <typename T>
BasicTensor<T> encode_means(const VaeModel<T>& model, const BasicTensor<T>& images, std::size_t chunk = 1000);

// steps x steps decoded images over [lo, hi]^2, row-major with the first row
// at the top of the second latent axis: entry (i, j) decodes
// z = (lo + (hi-lo) j/(steps-1), hi - (hi-lo) i/(steps-1)).
template <typename T>
BasicTensor<T> decoder_grid(const VaeModel<T>& model, double lo = -3.0, double hi = 3.0, std::size_t steps = 30);

} // namespace bvae::vae
