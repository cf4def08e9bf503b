#include "bvae/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "bvae/nn/gemm.hpp"

namespace bvae::nn {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
    }
    return "linear";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softmax") return Activation::softmax;
    if (name == "linear") return Activation::linear;
    throw ConfigError("unknown activation '" + name + "'");
}

ConvGeometry same_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c, std::size_t filters,
                                std::size_t kernel, std::size_t stride) {
    if (stride == 0 || kernel == 0) throw DimensionError("conv kernel and stride must be positive");
    ConvGeometry g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.in_c = in_c;
    g.out_c = filters;
    g.kernel = kernel;
    g.stride = stride;
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const auto pad_total = [&](std::size_t in, std::size_t out) -> std::size_t {
        const std::size_t span = (out - 1) * stride + kernel;
        return span > in ? span - in : 0;
    };
    g.pad_top = pad_total(in_h, g.out_h) / 2;
    g.pad_left = pad_total(in_w, g.out_w) / 2;
    return g;
}

ConvGeometry transpose_conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t in_c, std::size_t filters,
                                     std::size_t kernel, std::size_t stride, std::size_t out_h,
                                     std::size_t out_w) {
    if (out_h == 0) out_h = in_h * stride;
    if (out_w == 0) out_w = in_w * stride;
    // The forward conv runs from the large (output) grid to the small (input) grid.
    ConvGeometry g = same_conv_geometry(out_h, out_w, filters, in_c, kernel, stride);
    if (g.out_h != in_h || g.out_w != in_w) {
        throw DimensionError("transposed conv: " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                             " output is not the adjoint of a stride-" + std::to_string(stride) +
                             " conv producing " + std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    return g;
}

namespace {

// Rows of patches processed per GEMM call; bounds the im2col buffer.
constexpr std::size_t kPatchBudget = std::size_t{1} << 22;

std::size_t chunk_samples(const ConvGeometry& g, std::size_t batch) {
    const std::size_t per_sample = g.out_h * g.out_w * g.patch_size();
    return std::clamp<std::size_t>(kPatchBudget / std::max<std::size_t>(per_sample, 1), 1, batch);
}

template <typename T>
void im2col(const T* x, std::size_t samples, const ConvGeometry& g, T* cols) {
    const std::size_t k = g.kernel;
    const std::size_t c = g.in_c;
    const std::size_t image = g.in_h * g.in_w * c;
    for (std::size_t b = 0; b < samples; ++b) {
        const T* img = x + b * image;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                T* dst = cols;
                cols += g.patch_size();
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
                    for (std::size_t kx = 0; kx < k; ++kx, dst += c) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad_left);
                        if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                            ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                            std::fill(dst, dst + c, T{0});
                        } else {
                            const T* src = img + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * c;
                            std::copy(src, src + c, dst);
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of patch columns back onto the image grid (adjoint of im2col).
template <typename T>
void col2im(const T* cols, std::size_t samples, const ConvGeometry& g, T* x) {
    const std::size_t k = g.kernel;
    const std::size_t c = g.in_c;
    const std::size_t image = g.in_h * g.in_w * c;
    for (std::size_t b = 0; b < samples; ++b) {
        T* img = x + b * image;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                const T* src = cols;
                cols += g.patch_size();
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
                    for (std::size_t kx = 0; kx < k; ++kx, src += c) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad_left);
                        if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                            ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                            continue;
                        }
                        T* dst = img + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                    }
                }
            }
        }
    }
}

template <typename T>
void add_channel_bias(BasicTensor<T>& out, const BasicTensor<T>& bias) {
    if (bias.empty()) return;
    const std::size_t channels = bias.size();
    T* p = out.data();
    for (std::size_t i = 0; i < out.size(); i += channels) {
        for (std::size_t c = 0; c < channels; ++c) p[i + c] += bias[c];
    }
}

template <typename T>
BasicTensor<T> channel_sums(const BasicTensor<T>& grad, std::size_t channels) {
    BasicTensor<T> sums({channels});
    const T* p = grad.data();
    for (std::size_t i = 0; i < grad.size(); i += channels) {
        for (std::size_t c = 0; c < channels; ++c) sums[c] += p[i + c];
    }
    return sums;
}

void require(bool ok, const std::string& layer, const std::string& what) {
    if (!ok) throw DimensionError(layer + ": " + what);
}

} // namespace

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                             const std::string& layer) {
    require(x.rank() == 2 && weights.rank() == 2, layer, "dense expects rank-2 input and weights");
    require(x.extent(1) == weights.extent(0), layer,
            "input " + shape_string(x.shape()) + " does not compose with weights " + shape_string(weights.shape()));
    require(bias.empty() || bias.size() == weights.extent(1), layer, "bias length mismatch");
    const std::size_t b = x.extent(0), n = x.extent(1), m = weights.extent(1);
    BasicTensor<T> out({b, m});
    gemm<T>(Trans::no, Trans::no, b, m, n, T{1}, x.data(), n, weights.data(), m, T{0}, out.data(), m);
    add_channel_bias(out, bias);
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const BasicTensor<T>& grad_out) {
    const std::size_t b = x.extent(0), n = x.extent(1), m = weights.extent(1);
    require(grad_out.rank() == 2 && grad_out.extent(0) == b && grad_out.extent(1) == m, "dense",
            "gradient shape " + shape_string(grad_out.shape()) + " does not match output");
    DenseGrads<T> g{BasicTensor<T>({b, n}), BasicTensor<T>({n, m}), BasicTensor<T>()};
    gemm<T>(Trans::no, Trans::yes, b, n, m, T{1}, grad_out.data(), m, weights.data(), m, T{0}, g.input.data(), n);
    gemm<T>(Trans::yes, Trans::no, n, m, b, T{1}, x.data(), n, grad_out.data(), m, T{0}, g.weights.data(), m);
    g.bias = channel_sums(grad_out, m);
    return g;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                              std::size_t stride, const std::string& layer) {
    require(x.rank() == 4, layer, "conv2d input must be B x H x W x C, got " + shape_string(x.shape()));
    require(kernels.rank() == 4 && kernels.extent(0) == kernels.extent(1), layer,
            "conv2d kernels must be k x k x C x F, got " + shape_string(kernels.shape()));
    require(kernels.extent(2) == x.extent(3), layer,
            "channel mismatch: input has " + std::to_string(x.extent(3)) + ", kernels expect " +
                std::to_string(kernels.extent(2)));
    const std::size_t filters = kernels.extent(3);
    require(bias.empty() || bias.size() == filters, layer, "bias length mismatch");
    const ConvGeometry g = same_conv_geometry(x.extent(1), x.extent(2), x.extent(3), filters, kernels.extent(0), stride);
    const std::size_t batch = x.extent(0);
    BasicTensor<T> out({batch, g.out_h, g.out_w, filters});

    const std::size_t chunk = chunk_samples(g, batch);
    const std::size_t rows_per_sample = g.out_h * g.out_w;
    std::vector<T> cols(chunk * rows_per_sample * g.patch_size());
    for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
        const std::size_t n = std::min(chunk, batch - b0);
        im2col(x.data() + b0 * g.in_h * g.in_w * g.in_c, n, g, cols.data());
        gemm<T>(Trans::no, Trans::no, n * rows_per_sample, filters, g.patch_size(), T{1}, cols.data(),
                g.patch_size(), kernels.data(), filters, T{0}, out.data() + b0 * rows_per_sample * filters, filters);
    }
    add_channel_bias(out, bias);
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernels, const BasicTensor<T>& grad_out,
                             std::size_t stride) {
    const std::size_t filters = kernels.extent(3);
    const ConvGeometry g = same_conv_geometry(x.extent(1), x.extent(2), x.extent(3), filters, kernels.extent(0), stride);
    const std::size_t batch = x.extent(0);
    require(grad_out.shape() == Shape{batch, g.out_h, g.out_w, filters}, "conv2d",
            "gradient shape " + shape_string(grad_out.shape()) + " does not match output");
    ConvGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(kernels.shape()), BasicTensor<T>()};

    const std::size_t chunk = chunk_samples(g, batch);
    const std::size_t rows_per_sample = g.out_h * g.out_w;
    const std::size_t p = g.patch_size();
    std::vector<T> cols(chunk * rows_per_sample * p);
    for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
        const std::size_t n = std::min(chunk, batch - b0);
        const std::size_t rows = n * rows_per_sample;
        const T* gout = grad_out.data() + b0 * rows_per_sample * filters;
        im2col(x.data() + b0 * g.in_h * g.in_w * g.in_c, n, g, cols.data());
        gemm<T>(Trans::yes, Trans::no, p, filters, rows, T{1}, cols.data(), p, gout, filters, T{1},
                grads.kernels.data(), filters);
        gemm<T>(Trans::no, Trans::yes, rows, p, filters, T{1}, gout, filters, kernels.data(), filters, T{0},
                cols.data(), p);
        col2im(cols.data(), n, g, grads.input.data() + b0 * g.in_h * g.in_w * g.in_c);
    }
    grads.bias = channel_sums(grad_out, filters);
    return grads;
}

template <typename T>
BasicTensor<T> conv2d_transpose_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                                        const BasicTensor<T>& bias, std::size_t stride, const std::string& layer) {
    require(x.rank() == 4, layer, "transposed conv input must be B x H x W x C, got " + shape_string(x.shape()));
    require(kernels.rank() == 4 && kernels.extent(0) == kernels.extent(1), layer,
            "transposed conv kernels must be k x k x C_out x C_in, got " + shape_string(kernels.shape()));
    require(kernels.extent(3) == x.extent(3), layer,
            "channel mismatch: input has " + std::to_string(x.extent(3)) + ", kernels expect " +
                std::to_string(kernels.extent(3)));
    const std::size_t out_c = kernels.extent(2);
    require(bias.empty() || bias.size() == out_c, layer, "bias length mismatch");
    const ConvGeometry g =
        transpose_conv_geometry(x.extent(1), x.extent(2), x.extent(3), out_c, kernels.extent(0), stride);
    const std::size_t batch = x.extent(0);
    BasicTensor<T> out({batch, g.in_h, g.in_w, out_c});

    const std::size_t chunk = chunk_samples(g, batch);
    const std::size_t rows_per_sample = g.out_h * g.out_w;
    const std::size_t p = g.patch_size();
    const std::size_t in_c = x.extent(3);
    std::vector<T> cols(chunk * rows_per_sample * p);
    for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
        const std::size_t n = std::min(chunk, batch - b0);
        gemm<T>(Trans::no, Trans::yes, n * rows_per_sample, p, in_c, T{1},
                x.data() + b0 * rows_per_sample * in_c, in_c, kernels.data(), in_c, T{0}, cols.data(), p);
        col2im(cols.data(), n, g, out.data() + b0 * g.in_h * g.in_w * out_c);
    }
    add_channel_bias(out, bias);
    return out;
}

template <typename T>
ConvGrads<T> conv2d_transpose_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernels,
                                       const BasicTensor<T>& grad_out, std::size_t stride) {
    const std::size_t out_c = kernels.extent(2);
    const std::size_t in_c = x.extent(3);
    const ConvGeometry g =
        transpose_conv_geometry(x.extent(1), x.extent(2), in_c, out_c, kernels.extent(0), stride);
    const std::size_t batch = x.extent(0);
    require(grad_out.shape() == Shape{batch, g.in_h, g.in_w, out_c}, "conv2d_transpose",
            "gradient shape " + shape_string(grad_out.shape()) + " does not match output");
    ConvGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(kernels.shape()), BasicTensor<T>()};

    const std::size_t chunk = chunk_samples(g, batch);
    const std::size_t rows_per_sample = g.out_h * g.out_w;
    const std::size_t p = g.patch_size();
    std::vector<T> cols(chunk * rows_per_sample * p);
    for (std::size_t b0 = 0; b0 < batch; b0 += chunk) {
        const std::size_t n = std::min(chunk, batch - b0);
        const std::size_t rows = n * rows_per_sample;
        im2col(grad_out.data() + b0 * g.in_h * g.in_w * out_c, n, g, cols.data());
        gemm<T>(Trans::no, Trans::no, rows, in_c, p, T{1}, cols.data(), p, kernels.data(), in_c, T{0},
                grads.input.data() + b0 * rows_per_sample * in_c, in_c);
        gemm<T>(Trans::yes, Trans::no, p, in_c, rows, T{1}, cols.data(), p,
                x.data() + b0 * rows_per_sample * in_c, in_c, T{1}, grads.kernels.data(), in_c);
    }
    grads.bias = channel_sums(grad_out, out_c);
    return grads;
}

template <typename T>
BasicTensor<T> activation_forward(Activation kind, const BasicTensor<T>& x) {
    BasicTensor<T> y = x;
    switch (kind) {
    case Activation::linear: break;
    case Activation::relu:
        for (T& v : y.values()) v = v > T{0} ? v : T{0};
        break;
    case Activation::sigmoid:
        for (T& v : y.values()) {
            if (v >= T{0}) {
                v = T{1} / (T{1} + std::exp(-v));
            } else {
                const T e = std::exp(v);
                v = e / (T{1} + e);
            }
        }
        break;
    case Activation::softmax: {
        const std::size_t width = y.shape().back();
        for (std::size_t off = 0; off < y.size(); off += width) {
            T* row = y.data() + off;
            const T mx = *std::max_element(row, row + width);
            T sum{0};
            for (std::size_t j = 0; j < width; ++j) sum += (row[j] = std::exp(row[j] - mx));
            for (std::size_t j = 0; j < width; ++j) row[j] /= sum;
        }
        break;
    }
    }
    return y;
}

template <typename T>
BasicTensor<T> activation_backward(Activation kind, const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
    if (output.shape() != grad_out.shape()) throw DimensionError("activation backward: shape mismatch");
    BasicTensor<T> g = grad_out;
    switch (kind) {
    case Activation::linear: break;
    case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(output[i] > T{0})) g[i] = T{0};
        }
        break;
    case Activation::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= output[i] * (T{1} - output[i]);
        break;
    case Activation::softmax: {
        const std::size_t width = g.shape().back();
        for (std::size_t off = 0; off < g.size(); off += width) {
            T inner{0};
            for (std::size_t j = 0; j < width; ++j) inner += output[off + j] * grad_out[off + j];
            for (std::size_t j = 0; j < width; ++j) g[off + j] = output[off + j] * (grad_out[off + j] - inner);
        }
        break;
    }
    }
    return g;
}

template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, const BasicTensor<T>& labels,
                                            std::span<const T> sample_weights) {
    if (logits.rank() != 2 || logits.shape() != labels.shape()) {
        throw DimensionError("softmax_cross_entropy: logits " + shape_string(logits.shape()) + " vs labels " +
                             shape_string(labels.shape()));
    }
    const std::size_t batch = logits.extent(0), classes = logits.extent(1);
    if (sample_weights.size() != batch) throw DimensionError("softmax_cross_entropy: one weight per row required");

    CrossEntropyResult<T> r;
    r.grad_logits = activation_forward(Activation::softmax, logits);
    r.per_sample.resize(batch);
    T total{0};
    const T inv_batch = T{1} / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const T* l = logits.data() + b * classes;
        const T* y = labels.data() + b * classes;
        T label_mass{0};
        for (std::size_t k = 0; k < classes; ++k) label_mass += y[k];
        if (!(label_mass > T{0})) {
            throw ValidationError("softmax_cross_entropy: row " + std::to_string(b) + " has no label");
        }
        if (!(sample_weights[b] > T{0})) {
            throw ValidationError("softmax_cross_entropy: sample weight must be positive (row " +
                                  std::to_string(b) + ")");
        }
        const T mx = *std::max_element(l, l + classes);
        T sum{0};
        for (std::size_t k = 0; k < classes; ++k) sum += std::exp(l[k] - mx);
        const T lse = mx + std::log(sum);
        T ce{0};
        for (std::size_t k = 0; k < classes; ++k) ce -= y[k] * (l[k] - lse);
        r.per_sample[b] = ce;
        total += sample_weights[b] * ce;

        T* g = r.grad_logits.data() + b * classes;
        const T scale = sample_weights[b] * inv_batch;
        for (std::size_t k = 0; k < classes; ++k) g[k] = scale * (g[k] * label_mass - y[k]);
    }
    r.loss = total * inv_batch;
    return r;
}

#define BVAE_INSTANTIATE_OPS(T)                                                                                   \
    template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                          const std::string&);                                                    \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                           std::size_t, const std::string&);                                      \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                          std::size_t);                                                           \
    template BasicTensor<T> conv2d_transpose_forward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                                     const BasicTensor<T>&, std::size_t, const std::string&);     \
    template ConvGrads<T> conv2d_transpose_backward(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                                    const BasicTensor<T>&, std::size_t);                          \
    template BasicTensor<T> activation_forward(Activation, const BasicTensor<T>&);                                \
    template BasicTensor<T> activation_backward(Activation, const BasicTensor<T>&, const BasicTensor<T>&);        \
    template CrossEntropyResult<T> softmax_cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                                         std::span<const T>);

BVAE_INSTANTIATE_OPS(float)
BVAE_INSTANTIATE_OPS(double)

} // namespace bvae::nn
