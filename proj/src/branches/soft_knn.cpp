#include "bvae/branches/soft_knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bvae::branches {

namespace {

template <typename T>
T squared_distance(std::span<const T> a, std::span<const T> b) {
    T s{0};
    for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

} // namespace

template <typename T>
BasicTensor<T> soft_knn_probs(const BasicTensor<T>& queries, const BasicTensor<T>& context,
                              std::span<const std::uint8_t> context_labels, std::size_t k, double temperature,
                              bool exclude_self, SoftKnnCache<T>* cache) {
    if (!(temperature > 0.0)) throw ConfigError("soft_knn temperature must be positive");
    if (queries.rank() != 2 || context.rank() != 2 || queries.extent(1) != context.extent(1)) {
        throw DimensionError("soft_knn: queries " + shape_string(queries.shape()) + " and context " +
                             shape_string(context.shape()) + " must be 2-D with equal width");
    }
    const std::size_t m = queries.extent(0);
    const std::size_t n = context.extent(0);
    if (context_labels.size() != n) throw DimensionError("soft_knn: one label per context point required");
    if (exclude_self && m != n) throw DimensionError("soft_knn: self-exclusion needs queries == context");
    const std::size_t available = exclude_self ? n - 1 : n;
    if (k < 1 || available < k) {
        throw ConfigError("soft_knn needs " + std::to_string(k) + " neighbours but the context offers " +
                          std::to_string(available));
    }

    BasicTensor<T> probs({m, num_classes});
    if (cache != nullptr) {
        cache->neighbors.assign(m, {});
        cache->weights.assign(m, {});
    }
    std::vector<std::size_t> order(n);
    std::vector<T> dist(n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[j] = squared_distance(queries.row(i), context.row(j));
        order.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (!(exclude_self && j == i)) order.push_back(j);
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
        order.resize(k);
        // The nearest neighbour has the largest logit; subtracting it keeps exp() in range.
        const T scale = static_cast<T>(1.0 / temperature);
        const T top = -dist[order[0]] * scale;
        std::vector<T> w(k);
        T total{0};
        for (std::size_t a = 0; a < k; ++a) {
            w[a] = std::exp(-dist[order[a]] * scale - top);
            total += w[a];
        }
        for (std::size_t a = 0; a < k; ++a) {
            w[a] /= total;
            probs.at(i, context_labels[order[a]]) += w[a];
        }
        if (cache != nullptr) {
            cache->neighbors[i] = order;
            cache->weights[i] = std::move(w);
        }
    }
    return probs;
}

template <typename T>
SoftKnnGrads<T> soft_knn_backward(const BasicTensor<T>& queries, const BasicTensor<T>& context,
                                  std::span<const std::uint8_t> context_labels, double temperature,
                                  const SoftKnnCache<T>& cache, const BasicTensor<T>& grad_probs) {
    const std::size_t m = queries.extent(0);
    const std::size_t dim = queries.extent(1);
    if (cache.neighbors.size() != m || grad_probs.shape() != Shape{m, num_classes}) {
        throw DimensionError("soft_knn_backward: cache or gradient does not match the queries");
    }
    SoftKnnGrads<T> g{BasicTensor<T>(queries.shape()), BasicTensor<T>(context.shape())};
    const T two_over_tau = static_cast<T>(2.0 / temperature);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& nb = cache.neighbors[i];
        const auto& w = cache.weights[i];
        T mean{0};
        for (std::size_t a = 0; a < nb.size(); ++a) mean += w[a] * grad_probs.at(i, context_labels[nb[a]]);
        for (std::size_t a = 0; a < nb.size(); ++a) {
            const std::size_t j = nb[a];
            const T grad_logit = w[a] * (grad_probs.at(i, context_labels[j]) - mean);
            for (std::size_t d = 0; d < dim; ++d) {
                const T diff = queries.at(i, d) - context.at(j, d);
                g.queries.at(i, d) -= grad_logit * two_over_tau * diff;
                g.context.at(j, d) += grad_logit * two_over_tau * diff;
            }
        }
    }
    return g;
}

#define BVAE_INSTANTIATE_SOFT_KNN(T)                                                                           \
    template BasicTensor<T> soft_knn_probs(const BasicTensor<T>&, const BasicTensor<T>&,                       \
                                           std::span<const std::uint8_t>, std::size_t, double, bool,           \
                                           SoftKnnCache<T>*);                                                  \
    template SoftKnnGrads<T> soft_knn_backward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                               std::span<const std::uint8_t>, double, const SoftKnnCache<T>&,  \
                                               const BasicTensor<T>&);

BVAE_INSTANTIATE_SOFT_KNN(float)
BVAE_INSTANTIATE_SOFT_KNN(double)

} // namespace bvae::branches
