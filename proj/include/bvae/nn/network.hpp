#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bvae/nn/ops.hpp"
#include "bvae/tensor.hpp"

namespace bvae::nn {

enum class LayerKind { dense, conv2d, conv2d_transpose, activation, flatten, reshape };

std::string to_string(LayerKind kind);

enum class Padding { same };

// Architecture description of one layer. Shapes are per sample (no batch axis).
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::string name;
    std::size_t units = 0;   // dense
    std::size_t filters = 0; // conv2d / conv2d_transpose
    std::size_t kernel = 3;
    std::size_t stride = 1;
    Padding padding = Padding::same;
    Activation activation = Activation::linear;
    Shape target_shape; // reshape

    static LayerSpec dense(std::string name, std::size_t units);
    static LayerSpec conv2d(std::string name, std::size_t filters, std::size_t kernel, std::size_t stride);
    static LayerSpec conv2d_transpose(std::string name, std::size_t filters, std::size_t kernel, std::size_t stride);
    static LayerSpec activate(std::string name, Activation kind);
    static LayerSpec flatten(std::string name);
    static LayerSpec reshape(std::string name, Shape target);

    bool has_params() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d || kind == LayerKind::conv2d_transpose;
    }
};

template <typename T>
struct Parameter {
    std::string name;
    BasicTensor<T> value;
    BasicTensor<T> grad;
};

// Forward-pass record of one layer, consumed by layer_backward.
template <typename T>
struct LayerCache {
    Shape input_shape;     // batched
    BasicTensor<T> input;  // kept for parameterized layers
    BasicTensor<T> output; // kept for activations
    bool valid = false;
};

template <typename T>
struct LayerGradients {
    BasicTensor<T> input;
    std::vector<BasicTensor<T>> params; // weights, bias (empty for parameter-free layers)
};

// Shape a layer produces from a per-sample input shape; DimensionError if the
// layer cannot consume it.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input);

template <typename T>
BasicTensor<T> layer_forward(const LayerSpec& spec, const std::vector<const BasicTensor<T>*>& params,
                             const BasicTensor<T>& x, LayerCache<T>* cache);

template <typename T>
LayerGradients<T> layer_backward(const LayerSpec& spec, const std::vector<const BasicTensor<T>*>& params,
                                 const LayerCache<T>& cache, const BasicTensor<T>& grad_output);

// Feed-forward stack of layers with owned parameters and accumulated gradients.
template <typename T>
class Network {
public:
    using Cache = std::vector<LayerCache<T>>;

    Network() = default;
    Network(std::string name, Shape input_shape, std::vector<LayerSpec> layers);

    const std::string& name() const { return name_; }
    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return shapes_.back(); }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    // Glorot-uniform weights, zero biases.
    void initialize(std::mt19937_64& rng);

    BasicTensor<T> forward(const BasicTensor<T>& x, Cache* cache = nullptr) const;

    // Accumulates parameter gradients and returns the gradient w.r.t. the input.
    BasicTensor<T> backward(const Cache& cache, const BasicTensor<T>& grad_output);

    std::vector<Parameter<T>>& parameters() { return params_; }
    const std::vector<Parameter<T>>& parameters() const { return params_; }
    std::size_t parameter_count() const;
    void zero_grad();

private:
    std::vector<const BasicTensor<T>*> layer_params(std::size_t layer) const;

    std::string name_;
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape> shapes_; // shapes_[i] is the input of layer i; back() is the output
    std::vector<std::optional<std::size_t>> param_offset_;
    std::vector<Parameter<T>> params_;
};

// Copies parameter values between networks of identical architecture and
// possibly different scalar types.
template <typename To, typename From>
void copy_parameters(const Network<From>& from, Network<To>& to) {
    auto& dst = to.parameters();
    const auto& src = from.parameters();
    if (dst.size() != src.size()) throw DimensionError("copy_parameters: architectures differ");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (dst[i].value.shape() != src[i].value.shape()) {
            throw DimensionError("copy_parameters: shape mismatch for " + src[i].name);
        }
        dst[i].value = tensor_cast<To>(src[i].value);
    }
}

} // namespace bvae::nn
