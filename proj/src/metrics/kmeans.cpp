#include "bvae/metrics/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bvae/random.hpp"

namespace bvae::metrics {

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

TensorD plus_plus_seeds(const TensorD& points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.extent(0);
    const std::size_t dim = points.extent(1);
    TensorD centers({k, dim});
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t pick = first(rng);
    std::copy_n(points.row(pick).begin(), dim, centers.row(0).begin());
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points.row(i).data(), centers.row(0).data(), dim);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double d : nearest) total += d;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += nearest[i];
                if (acc > target && nearest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        std::copy_n(points.row(pick).begin(), dim, centers.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points.row(i).data(), centers.row(c).data(), dim));
        }
    }
    return centers;
}

Partition lloyd(const TensorD& points, TensorD centers, const KMeansOptions& o) {
    const std::size_t n = points.extent(0);
    const std::size_t dim = points.extent(1);
    const std::size_t k = o.clusters;
    Partition p;
    p.clusters = k;
    p.assignments.assign(n, 0);
    for (std::size_t iter = 0; iter < o.max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points.row(i).data(), centers.row(c).data(), dim);
                if (d < best) {
                    best = d;
                    arg = static_cast<int>(c);
                }
            }
            p.assignments[i] = arg;
        }
        TensorD updated({k, dim});
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(p.assignments[i]);
            ++count[c];
            for (std::size_t d = 0; d < dim; ++d) updated.at(c, d) += points.at(i, d);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) updated.at(c, d) /= static_cast<double>(count[c]);
        }
        // Re-seed empty clusters at the point farthest from its assigned centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = squared_distance(points.row(i).data(),
                                                  updated.row(static_cast<std::size_t>(p.assignments[i])).data(), dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            const std::size_t old = static_cast<std::size_t>(p.assignments[far]);
            std::copy_n(points.row(far).begin(), dim, updated.row(c).begin());
            p.assignments[far] = static_cast<int>(c);
            count[c] = 1;
            // Recompute the donor cluster without the moved point.
            --count[old];
            std::fill(updated.row(old).begin(), updated.row(old).end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<std::size_t>(p.assignments[i]) != old) continue;
                for (std::size_t d = 0; d < dim; ++d) updated.at(old, d) += points.at(i, d);
            }
            if (count[old] > 0) {
                for (std::size_t d = 0; d < dim; ++d) updated.at(old, d) /= static_cast<double>(count[old]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, std::sqrt(squared_distance(updated.row(c).data(), centers.row(c).data(), dim)));
        }
        centers = std::move(updated);
        p.iterations = iter + 1;
        p.wcss_history.push_back(within_cluster_sum_of_squares(points, p.assignments, centers));
        if (shift <= o.tol) break;
    }
    p.centroids = std::move(centers);
    p.wcss = p.wcss_history.back();
    return p;
}

} // namespace

double within_cluster_sum_of_squares(const TensorD& points, const std::vector<int>& assignments,
                                     const TensorD& centroids) {
    const std::size_t dim = points.extent(1);
    double s = 0.0;
    for (std::size_t i = 0; i < points.extent(0); ++i) {
        s += squared_distance(points.row(i).data(), centroids.row(static_cast<std::size_t>(assignments[i])).data(), dim);
    }
    return s;
}

Partition kmeans(const TensorD& points, const KMeansOptions& o) {
    if (points.rank() != 2) throw DimensionError("kmeans expects an N x d matrix, got " + shape_string(points.shape()));
    if (o.clusters < 1 || o.restarts < 1 || o.max_iter < 1) {
        throw ConfigError("kmeans needs positive cluster, restart and iteration counts");
    }
    if (points.extent(0) < o.clusters) {
        throw ConfigError("kmeans with K=" + std::to_string(o.clusters) + " needs at least K points, got " +
                          std::to_string(points.extent(0)));
    }
    if (!points.all_finite()) throw NumericError("kmeans: non-finite input point");
    Partition best;
    for (std::size_t r = 0; r < o.restarts; ++r) {
        std::mt19937_64 rng = make_rng(o.seed, Stream::kmeans, r);
        Partition p = lloyd(points, plus_plus_seeds(points, o.clusters, rng), o);
        p.restart = r;
        if (r == 0 || p.wcss < best.wcss) best = std::move(p);
    }
    return best;
}

} // namespace bvae::metrics
