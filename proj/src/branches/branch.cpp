#include "bvae/branches/branch.hpp"

#include <cmath>
#include <limits>

namespace bvae::branches {

using nn::Activation;
using nn::LayerSpec;

std::string_view to_string(BranchKind kind) {
    switch (kind) {
    case BranchKind::mlp: return "mlp";
    case BranchKind::linear: return "linear";
    case BranchKind::soft_knn: return "soft_knn";
    case BranchKind::class_mean: return "class_mean";
    case BranchKind::exact_knn: return "exact_knn";
    case BranchKind::random_forest: return "random_forest";
    }
    return "?";
}

BranchKind branch_kind_from_string(std::string_view name) {
    for (BranchKind k : {BranchKind::mlp, BranchKind::linear, BranchKind::soft_knn, BranchKind::class_mean,
                         BranchKind::exact_knn, BranchKind::random_forest}) {
        if (name == to_string(k)) return k;
    }
    if (name == "knn") return BranchKind::exact_knn;
    if (name == "rf") return BranchKind::random_forest;
    throw ConfigError("unknown branch kind '" + std::string(name) +
                      "' (expected mlp, linear, soft_knn, class_mean, exact_knn or random_forest)");
}

BranchKind training_kind(BranchKind kind) {
    if (kind == BranchKind::exact_knn) return BranchKind::soft_knn;
    if (kind == BranchKind::random_forest) return BranchKind::class_mean;
    return kind;
}

void validate(const BranchConfig& c) {
    if (c.neighbors < 1) throw ConfigError("branch neighbours must be at least 1");
    if (!(c.temperature > 0.0) || !std::isfinite(c.temperature)) {
        throw ConfigError("branch temperature must be positive");
    }
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("centroid momentum must be in [0, 1)");
    if (c.n_estimators < 1) throw ConfigError("random forest needs at least one estimator");
}

template <typename T>
BranchLoss<T> branch_loss(const BasicTensor<T>& probs, std::span<const std::uint8_t> labels,
                          std::span<const T> sample_weights) {
    if (probs.rank() != 2 || probs.extent(1) != num_classes) {
        throw DimensionError("branch_loss: probabilities must be B x 10, got " + shape_string(probs.shape()));
    }
    const std::size_t b = probs.extent(0);
    if (labels.size() != b || sample_weights.size() != b) {
        throw DimensionError("branch_loss: need one label and one weight per row");
    }
    BranchLoss<T> out;
    out.grad_probs = BasicTensor<T>(probs.shape());
    out.per_sample.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (!std::isfinite(probs.at(i, c))) {
                throw NumericError("branch produced a non-finite probability at row " + std::to_string(i) +
                                   ", class " + std::to_string(c));
            }
        }
        if (labels[i] >= num_classes) throw ValidationError("branch_loss: label out of range");
        const double p = probs.at(i, labels[i]);
        const double clamped = std::clamp(p, prob_clamp, 1.0 - prob_clamp);
        out.per_sample[i] = -std::log(clamped);
        const double w = sample_weights[i];
        out.loss += w * out.per_sample[i];
        if (clamped == p) out.grad_probs.at(i, labels[i]) = static_cast<T>(-w / (static_cast<double>(b) * p));
    }
    out.loss /= static_cast<double>(b);
    return out;
}

template <typename T>
Branch<T>::Branch(BranchConfig config, std::size_t latent_dim)
    : config_(config), latent_dim_(latent_dim), centroids_({num_classes, latent_dim}) {
    validate(config_);
    if (latent_dim_ == 0) throw ConfigError("branch latent dimension must be positive");
    if (kind() == BranchKind::mlp) {
        head_.emplace("branch", Shape{latent_dim_},
                      std::vector<LayerSpec>{LayerSpec::dense("dense1", 512), LayerSpec::activate("relu1", Activation::relu),
                                             LayerSpec::dense("dense2", 256), LayerSpec::activate("relu2", Activation::relu),
                                             LayerSpec::dense("dense3", 128), LayerSpec::activate("relu3", Activation::relu),
                                             LayerSpec::dense("logits", num_classes),
                                             LayerSpec::activate("softmax", Activation::softmax)});
    } else if (kind() == BranchKind::linear) {
        head_.emplace("branch", Shape{latent_dim_},
                      std::vector<LayerSpec>{LayerSpec::dense("logits", num_classes),
                                             LayerSpec::activate("softmax", Activation::softmax)});
    }
}

template <typename T>
void Branch<T>::initialize(std::mt19937_64& rng) {
    if (head_) head_->initialize(rng);
    centroids_.fill(T{0});
    seen_.fill(false);
}

template <typename T>
BasicTensor<T> Branch<T>::centroid_logits(const BasicTensor<T>& z) const {
    if (std::none_of(seen_.begin(), seen_.end(), [](bool s) { return s; })) {
        throw UsageError("class_mean branch has no centroids yet");
    }
    const std::size_t b = z.extent(0);
    BasicTensor<T> logits({b, num_classes});
    const T inv_tau = static_cast<T>(1.0 / config_.temperature);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (!seen_[c]) {
                logits.at(i, c) = -std::numeric_limits<T>::infinity();
                continue;
            }
            T d2{0};
            for (std::size_t d = 0; d < latent_dim_; ++d) {
                const T diff = z.at(i, d) - centroids_.at(c, d);
                d2 += diff * diff;
            }
            logits.at(i, c) = -d2 * inv_tau;
        }
    }
    return logits;
}

template <typename T>
BranchOutput<T> Branch<T>::forward(const BasicTensor<T>& z, std::span<const std::uint8_t> labels) const {
    if (z.rank() != 2 || z.extent(1) != latent_dim_) {
        throw DimensionError("branch expects B x " + std::to_string(latent_dim_) + " codes, got " +
                             shape_string(z.shape()));
    }
    BranchOutput<T> out;
    switch (kind()) {
    case BranchKind::mlp:
    case BranchKind::linear: out.probs = head_->forward(z); break;
    case BranchKind::soft_knn:
        out.probs = soft_knn_probs(z, z, labels, config_.neighbors, config_.temperature, true);
        out.differentiable = false;
        break;
    case BranchKind::class_mean:
        out.probs = nn::activation_forward(Activation::softmax, centroid_logits(z));
        out.differentiable = false;
        break;
    default: throw UsageError("branch kind has no trainable form");
    }
    return out;
}

template <typename T>
void Branch<T>::update_centroids(const BasicTensor<T>& z, std::span<const std::uint8_t> labels) {
    if (labels.size() != z.extent(0)) throw DimensionError("branch: one label per code required");
    std::array<std::size_t, num_classes> count{};
    BasicTensor<T> sums({num_classes, latent_dim_});
    for (std::size_t i = 0; i < z.extent(0); ++i) {
        ++count[labels[i]];
        for (std::size_t d = 0; d < latent_dim_; ++d) sums.at(labels[i], d) += z.at(i, d);
    }
    const T keep = static_cast<T>(config_.momentum);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (count[c] == 0) continue;
        for (std::size_t d = 0; d < latent_dim_; ++d) {
            const T mean = sums.at(c, d) / static_cast<T>(count[c]);
            centroids_.at(c, d) = seen_[c] ? keep * centroids_.at(c, d) + (T{1} - keep) * mean : mean;
        }
        seen_[c] = true;
    }
}

template <typename T>
BranchStep<T> Branch<T>::train_step(const BasicTensor<T>& z, std::span<const std::uint8_t> labels,
                                    std::span<const T> sample_weights, T scale) {
    if (kind() == BranchKind::class_mean) update_centroids(z, labels);
    return loss_and_grad(z, labels, sample_weights, scale);
}

template <typename T>
BranchStep<T> Branch<T>::loss_and_grad(const BasicTensor<T>& z, std::span<const std::uint8_t> labels,
                                       std::span<const T> sample_weights, T scale) {
    if (labels.size() != z.extent(0)) throw DimensionError("branch: one label per code required");
    BranchStep<T> step;
    switch (kind()) {
    case BranchKind::mlp:
    case BranchKind::linear: {
        typename nn::Network<T>::Cache cache;
        step.probs = head_->forward(z, &cache);
        const BranchLoss<T> loss = branch_loss(step.probs, labels, sample_weights);
        BasicTensor<T> g = loss.grad_probs;
        for (T& v : g.values()) v *= scale;
        step.grad_z = head_->backward(cache, g);
        step.loss = loss.loss;
        break;
    }
    case BranchKind::soft_knn: {
        SoftKnnCache<T> cache;
        step.probs = soft_knn_probs(z, z, labels, config_.neighbors, config_.temperature, true, &cache);
        const BranchLoss<T> loss = branch_loss(step.probs, labels, sample_weights);
        const SoftKnnGrads<T> g = soft_knn_backward(z, z, labels, config_.temperature, cache, loss.grad_probs);
        step.grad_z = BasicTensor<T>(z.shape());
        for (std::size_t i = 0; i < z.size(); ++i) step.grad_z[i] = scale * (g.queries[i] + g.context[i]);
        step.loss = loss.loss;
        break;
    }
    case BranchKind::class_mean: {
        step.probs = nn::activation_forward(Activation::softmax, centroid_logits(z));
        const BranchLoss<T> loss = branch_loss(step.probs, labels, sample_weights);
        const BasicTensor<T> grad_logits = nn::activation_backward(Activation::softmax, step.probs, loss.grad_probs);
        step.grad_z = BasicTensor<T>(z.shape());
        const T factor = static_cast<T>(-2.0 / config_.temperature) * scale;
        for (std::size_t i = 0; i < z.extent(0); ++i) {
            for (std::size_t c = 0; c < num_classes; ++c) {
                if (!seen_[c]) continue;
                const T gl = grad_logits.at(i, c);
                for (std::size_t d = 0; d < latent_dim_; ++d) {
                    step.grad_z.at(i, d) += factor * gl * (z.at(i, d) - centroids_.at(c, d));
                }
            }
        }
        step.loss = loss.loss;
        break;
    }
    default: throw UsageError("branch kind has no trainable form");
    }
    return step;
}

template <typename T>
std::vector<nn::Parameter<T>*> Branch<T>::parameters() {
    std::vector<nn::Parameter<T>*> out;
    if (head_) {
        for (auto& p : head_->parameters()) out.push_back(&p);
    }
    return out;
}

template <typename T>
std::vector<const nn::Parameter<T>*> Branch<T>::parameters() const {
    std::vector<const nn::Parameter<T>*> out;
    if (head_) {
        for (const auto& p : head_->parameters()) out.push_back(&p);
    }
    return out;
}

template <typename T>
void Branch<T>::zero_grad() {
    if (head_) head_->zero_grad();
}

template <typename T>
void Branch<T>::set_centroids(BasicTensor<T> centroids, std::array<bool, num_classes> seen) {
    if (centroids.shape() != centroids_.shape()) {
        throw DimensionError("centroids must be " + shape_string(centroids_.shape()));
    }
    centroids_ = std::move(centroids);
    seen_ = seen;
}

template class Branch<float>;
template class Branch<double>;
template BranchLoss<float> branch_loss(const Tensor&, std::span<const std::uint8_t>, std::span<const float>);
template BranchLoss<double> branch_loss(const TensorD&, std::span<const std::uint8_t>, std::span<const double>);

} // namespace bvae::branches
