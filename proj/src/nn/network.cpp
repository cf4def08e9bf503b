#include "bvae/nn/network.hpp"

#include <cmath>

namespace bvae::nn {

std::string to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv2d_transpose: return "conv2d_transpose";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    }
    return "unknown";
}

LayerSpec LayerSpec::dense(std::string name, std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.name = std::move(name);
    s.units = units;
    return s;
}

LayerSpec LayerSpec::conv2d(std::string name, std::size_t filters, std::size_t kernel, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.name = std::move(name);
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::conv2d_transpose(std::string name, std::size_t filters, std::size_t kernel, std::size_t stride) {
    LayerSpec s = conv2d(std::move(name), filters, kernel, stride);
    s.kind = LayerKind::conv2d_transpose;
    return s;
}

LayerSpec LayerSpec::activate(std::string name, Activation kind) {
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.name = std::move(name);
    s.activation = kind;
    return s;
}

LayerSpec LayerSpec::flatten(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    s.name = std::move(name);
    return s;
}

LayerSpec LayerSpec::reshape(std::string name, Shape target) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.name = std::move(name);
    s.target_shape = std::move(target);
    return s;
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
    const auto fail = [&](const std::string& why) {
        return DimensionError("layer '" + spec.name + "' (" + to_string(spec.kind) + "): " + why + ", input " +
                              shape_string(in));
    };
    switch (spec.kind) {
    case LayerKind::dense:
        if (in.size() != 1) throw fail("dense layer needs a flat input");
        if (spec.units == 0) throw fail("dense layer needs units > 0");
        return {spec.units};
    case LayerKind::conv2d: {
        if (in.size() != 3) throw fail("conv2d needs H x W x C input");
        if (spec.filters == 0 || spec.kernel == 0 || spec.stride == 0) throw fail("invalid conv geometry");
        const auto g = same_conv_geometry(in[0], in[1], in[2], spec.filters, spec.kernel, spec.stride);
        return {g.out_h, g.out_w, spec.filters};
    }
    case LayerKind::conv2d_transpose:
        if (in.size() != 3) throw fail("conv2d_transpose needs H x W x C input");
        if (spec.filters == 0 || spec.kernel == 0 || spec.stride == 0) throw fail("invalid conv geometry");
        return {in[0] * spec.stride, in[1] * spec.stride, spec.filters};
    case LayerKind::activation:
        if (spec.activation == Activation::softmax && in.size() != 1) throw fail("softmax needs a flat input");
        return in;
    case LayerKind::flatten:
        return {shape_size(in)};
    case LayerKind::reshape:
        if (shape_size(spec.target_shape) != shape_size(in)) {
            throw fail("cannot reshape to " + shape_string(spec.target_shape));
        }
        return spec.target_shape;
    }
    throw fail("unknown layer kind");
}

namespace {

Shape batched(std::size_t batch, const Shape& sample) {
    Shape s{batch};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

} // namespace

template <typename T>
BasicTensor<T> layer_forward(const LayerSpec& spec, const std::vector<const BasicTensor<T>*>& params,
                             const BasicTensor<T>& x, LayerCache<T>* cache) {
    BasicTensor<T> y;
    switch (spec.kind) {
    case LayerKind::dense:
        y = dense_forward(x, *params.at(0), *params.at(1), spec.name);
        break;
    case LayerKind::conv2d:
        y = conv2d_forward(x, *params.at(0), *params.at(1), spec.stride, spec.name);
        break;
    case LayerKind::conv2d_transpose:
        y = conv2d_transpose_forward(x, *params.at(0), *params.at(1), spec.stride, spec.name);
        break;
    case LayerKind::activation:
        y = activation_forward(spec.activation, x);
        break;
    case LayerKind::flatten:
        y = x.reshaped({x.extent(0), x.size() / x.extent(0)});
        break;
    case LayerKind::reshape:
        y = x.reshaped(batched(x.extent(0), spec.target_shape));
        break;
    }
    if (cache != nullptr) {
        cache->input_shape = x.shape();
        cache->input = spec.has_params() ? x : BasicTensor<T>();
        cache->output = spec.kind == LayerKind::activation ? y : BasicTensor<T>();
        cache->valid = true;
    }
    return y;
}

template <typename T>
LayerGradients<T> layer_backward(const LayerSpec& spec, const std::vector<const BasicTensor<T>*>& params,
                                 const LayerCache<T>& cache, const BasicTensor<T>& grad_output) {
    if (!cache.valid) throw UsageError("layer '" + spec.name + "': backward called without a forward cache");
    LayerGradients<T> g;
    switch (spec.kind) {
    case LayerKind::dense: {
        auto d = dense_backward(cache.input, *params.at(0), grad_output);
        g.input = std::move(d.input);
        g.params = {std::move(d.weights), std::move(d.bias)};
        break;
    }
    case LayerKind::conv2d: {
        auto c = conv2d_backward(cache.input, *params.at(0), grad_output, spec.stride);
        g.input = std::move(c.input);
        g.params = {std::move(c.kernels), std::move(c.bias)};
        break;
    }
    case LayerKind::conv2d_transpose: {
        auto c = conv2d_transpose_backward(cache.input, *params.at(0), grad_output, spec.stride);
        g.input = std::move(c.input);
        g.params = {std::move(c.kernels), std::move(c.bias)};
        break;
    }
    case LayerKind::activation:
        g.input = activation_backward(spec.activation, cache.output, grad_output);
        break;
    case LayerKind::flatten:
    case LayerKind::reshape:
        g.input = grad_output.reshaped(cache.input_shape);
        break;
    }
    return g;
}

template <typename T>
Network<T>::Network(std::string name, Shape input_shape, std::vector<LayerSpec> layers)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    shapes_.push_back(input_shape_);
    for (const LayerSpec& spec : layers_) {
        const Shape& in = shapes_.back();
        Shape out = layer_output_shape(spec, in);
        if (spec.has_params()) {
            param_offset_.push_back(params_.size());
            Shape w_shape;
            Shape b_shape;
            switch (spec.kind) {
            case LayerKind::dense:
                w_shape = {in[0], spec.units};
                b_shape = {spec.units};
                break;
            case LayerKind::conv2d:
                w_shape = {spec.kernel, spec.kernel, in[2], spec.filters};
                b_shape = {spec.filters};
                break;
            default:
                w_shape = {spec.kernel, spec.kernel, spec.filters, in[2]};
                b_shape = {spec.filters};
                break;
            }
            params_.push_back({name_ + "/" + spec.name + "/weights", BasicTensor<T>(w_shape), BasicTensor<T>(w_shape)});
            params_.push_back({name_ + "/" + spec.name + "/bias", BasicTensor<T>(b_shape), BasicTensor<T>(b_shape)});
        } else {
            param_offset_.push_back(std::nullopt);
        }
        shapes_.push_back(std::move(out));
    }
}

template <typename T>
void Network<T>::initialize(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!param_offset_[i]) continue;
        Parameter<T>& w = params_[*param_offset_[i]];
        Parameter<T>& b = params_[*param_offset_[i] + 1];
        const Shape& s = w.value.shape();
        double fan_in = 0;
        double fan_out = 0;
        if (s.size() == 2) {
            fan_in = static_cast<double>(s[0]);
            fan_out = static_cast<double>(s[1]);
        } else {
            const double receptive = static_cast<double>(s[0] * s[1]);
            fan_in = receptive * static_cast<double>(s[2]);
            fan_out = receptive * static_cast<double>(s[3]);
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (T& v : w.value.values()) v = static_cast<T>(dist(rng));
        b.value.fill(T{0});
    }
}

template <typename T>
std::vector<const BasicTensor<T>*> Network<T>::layer_params(std::size_t layer) const {
    if (!param_offset_[layer]) return {};
    const std::size_t off = *param_offset_[layer];
    return {&params_[off].value, &params_[off + 1].value};
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& x, Cache* cache) const {
    if (x.rank() != input_shape_.size() + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1)) {
        throw DimensionError("network '" + name_ + "' expects per-sample shape " + shape_string(input_shape_) +
                             ", got " + shape_string(x.shape()));
    }
    if (cache != nullptr) cache->assign(layers_.size(), LayerCache<T>{});
    BasicTensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layer_forward(layers_[i], layer_params(i), h, cache != nullptr ? &(*cache)[i] : nullptr);
    }
    return h;
}

template <typename T>
BasicTensor<T> Network<T>::backward(const Cache& cache, const BasicTensor<T>& grad_output) {
    if (cache.size() != layers_.size()) throw UsageError("network '" + name_ + "': missing forward cache");
    BasicTensor<T> g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        LayerGradients<T> lg = layer_backward(layers_[i], layer_params(i), cache[i], g);
        if (param_offset_[i]) {
            for (std::size_t p = 0; p < lg.params.size(); ++p) {
                BasicTensor<T>& acc = params_[*param_offset_[i] + p].grad;
                for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += lg.params[p][j];
            }
        }
        g = std::move(lg.input);
    }
    return g;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
void Network<T>::zero_grad() {
    for (auto& p : params_) p.grad.fill(T{0});
}

template class Network<float>;
template class Network<double>;

template BasicTensor<float> layer_forward(const LayerSpec&, const std::vector<const BasicTensor<float>*>&,
                                          const BasicTensor<float>&, LayerCache<float>*);
template BasicTensor<double> layer_forward(const LayerSpec&, const std::vector<const BasicTensor<double>*>&,
                                           const BasicTensor<double>&, LayerCache<double>*);
template LayerGradients<float> layer_backward(const LayerSpec&, const std::vector<const BasicTensor<float>*>&,
                                              const LayerCache<float>&, const BasicTensor<float>&);
template LayerGradients<double> layer_backward(const LayerSpec&, const std::vector<const BasicTensor<double>*>&,
                                               const LayerCache<double>&, const BasicTensor<double>&);

} // namespace bvae::nn
