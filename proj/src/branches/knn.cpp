#include "bvae/branches/knn.hpp"

#include <algorithm>
#include <numeric>

#include "bvae/branches/soft_knn.hpp"

namespace bvae::branches {

std::uint8_t argmax_class(std::span<const double> probs) {
    return static_cast<std::uint8_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

KnnClassifier::KnnClassifier(std::size_t neighbors) : neighbors_(neighbors) {
    if (neighbors_ < 1) throw ConfigError("kNN needs at least one neighbour");
}

void KnnClassifier::fit(const Tensor& codes, std::span<const std::uint8_t> labels) {
    if (codes.rank() != 2 || codes.extent(0) != labels.size()) {
        throw DimensionError("kNN fit: codes " + shape_string(codes.shape()) + " vs " + std::to_string(labels.size()) +
                             " labels");
    }
    if (neighbors_ > labels.size()) {
        throw ConfigError("kNN with " + std::to_string(neighbors_) + " neighbours needs at least that many points");
    }
    codes_ = codes;
    labels_.assign(labels.begin(), labels.end());
}

TensorD KnnClassifier::predict_proba(const Tensor& queries) const {
    if (labels_.empty()) throw UsageError("kNN classifier is not fitted");
    if (queries.rank() != 2 || queries.extent(1) != codes_.extent(1)) {
        throw DimensionError("kNN predict: query width does not match the training codes");
    }
    const std::size_t n = labels_.size();
    const std::size_t dim = codes_.extent(1);
    TensorD probs({queries.extent(0), num_classes});
    std::vector<float> dist(n);
    std::vector<std::size_t> order(n);
    for (std::size_t q = 0; q < queries.extent(0); ++q) {
        const float* x = queries.row(q).data();
        for (std::size_t j = 0; j < n; ++j) {
            const float* y = codes_.data() + j * dim;
            float s = 0.0f;
            for (std::size_t d = 0; d < dim; ++d) s += (x[d] - y[d]) * (x[d] - y[d]);
            dist[j] = s;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(neighbors_ - 1), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
        for (std::size_t a = 0; a < neighbors_; ++a) probs.at(q, labels_[order[a]]) += 1.0 / static_cast<double>(neighbors_);
    }
    return probs;
}

std::vector<std::uint8_t> KnnClassifier::predict(const Tensor& queries) const {
    const TensorD probs = predict_proba(queries);
    std::vector<std::uint8_t> out(probs.extent(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_class(probs.row(i));
    return out;
}

} // namespace bvae::branches
