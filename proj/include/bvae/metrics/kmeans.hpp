#pragma once

#include <cstdint>
#include <vector>

#include "bvae/tensor.hpp"

namespace bvae::metrics {

struct KMeansOptions {
    std::size_t clusters = 10;
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    double tol = 1e-4; // on the largest centroid shift (Euclidean)
    std::uint64_t seed = 0;
};

struct Partition {
    std::vector<int> assignments;
    std::size_t clusters = 0;
    TensorD centroids;
    double wcss = 0.0;
    std::size_t iterations = 0;
    std::size_t restart = 0;
    std::vector<double> wcss_history; // after each Lloyd iteration of the chosen restart
};

// k-means++ seeding and Lloyd iterations, keeping the restart with the lowest
// within-cluster sum of squares (ties to the earlier restart). An emptied
// cluster is re-seeded at the point farthest from its current centroid.
Partition kmeans(const TensorD& points, const KMeansOptions& options = {});

double within_cluster_sum_of_squares(const TensorD& points, const std::vector<int>& assignments,
                                     const TensorD& centroids);

} // namespace bvae::metrics
