#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "bvae/tensor.hpp"

// Differentiable primitives. Images are NHWC; convolution kernels are
// k x k x C_in x F for conv2d and k x k x C_out x C_in for the transposed
// convolution (the adjoint of a conv2d sharing the same kernel tensor).
namespace bvae::nn {

enum class Activation { relu, sigmoid, softmax, linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Spatial geometry of a conv2d mapping in_h x in_w x in_c to out_h x out_w x out_c
// with "same" padding: out = ceil(in / stride), the odd pad unit going to the
// bottom/right edge.
struct ConvGeometry {
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::size_t out_h = 0, out_w = 0, out_c = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t pad_top = 0, pad_left = 0;

    std::size_t patch_size() const { return kernel * kernel * in_c; }
};

ConvGeometry same_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                                std::size_t filters, std::size_t kernel, std::size_t stride);

// Geometry of the conv2d whose adjoint maps in_h x in_w x in_c up to
// (in_h*stride) x (in_w*stride) x filters. When out_h/out_w are given they must
// be consistent with that conv, otherwise DimensionError.
ConvGeometry transpose_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c,
                                     std::size_t filters, std::size_t kernel, std::size_t stride,
                                     std::size_t out_h = 0, std::size_t out_w = 0);

template <typename T>
struct DenseGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias, const std::string& layer = "dense");

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> kernels;
    BasicTensor<T> bias;
};

// x: B x H x W x C, kernels: k x k x C x F. bias may be empty.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                              const BasicTensor<T>& bias, std::size_t stride,
                              const std::string& layer = "conv2d");

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                             const BasicTensor<T>& grad_out, std::size_t stride);

// x: B x h x w x C_in, kernels: k x k x C_out x C_in, output B x (h*s) x (w*s) x C_out.
template <typename T>
BasicTensor<T> conv2d_transpose_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                                        const BasicTensor<T>& bias, std::size_t stride,
                                        const std::string& layer = "conv2d_transpose");

template <typename T>
ConvGrads<T> conv2d_transpose_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                                       const BasicTensor<T>& grad_out, std::size_t stride);

template <typename T>
BasicTensor<T> activation_forward(Activation kind, const BasicTensor<T>& x);

// Uses the cached forward output (all four kinds can be differentiated from it).
template <typename T>
BasicTensor<T> activation_backward(Activation kind, const BasicTensor<T>& output,
                                   const BasicTensor<T>& grad_out);

template <typename T>
struct CrossEntropyResult {
    T loss{};
    BasicTensor<T> grad_logits;
    std::vector<T> per_sample; // unweighted -sum_k y log p
};

// loss = mean_b w_b * (-sum_k y_bk log softmax(logits)_bk); grad = w_b (p - y) / B.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, const BasicTensor<T>& labels,
                                            std::span<const T> sample_weights);

} // namespace bvae::nn
