#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

namespace bvae::oracle {

// Best accuracy over every one-to-one mapping from cluster ids to labels,
// both drawn from 0..k-1.
inline double exhaustive_accuracy(std::span<const int> labels, std::span<const int> clusters, int k) {
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) hits += perm[static_cast<std::size_t>(clusters[i])] == labels[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(labels.size());
}

struct PairCounts {
    double same_same = 0, same_diff = 0, diff_same = 0, diff_diff = 0;
};

// Classifies every unordered pair of points.
inline PairCounts count_pairs(std::span<const int> labels, std::span<const int> clusters) {
    PairCounts p;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            const bool l = labels[i] == labels[j];
            const bool c = clusters[i] == clusters[j];
            (l ? (c ? p.same_same : p.same_diff) : (c ? p.diff_same : p.diff_diff)) += 1;
        }
    }
    return p;
}

// Pair-count form of the adjusted Rand index.
inline double pair_count_ari(std::span<const int> labels, std::span<const int> clusters) {
    const PairCounts p = count_pairs(labels, clusters);
    const double a = p.same_same, b = p.same_diff, c = p.diff_same, d = p.diff_diff;
    const double denom = (a + b) * (b + d) + (a + c) * (c + d);
    return denom == 0 ? 1.0 : 2.0 * (a * d - b * c) / denom;
}

// MI / max(H) from explicit empirical probabilities.
inline double direct_nmi(std::span<const int> labels, std::span<const int> clusters) {
    const double n = static_cast<double>(labels.size());
    std::map<int, double> pl, pc;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        pl[labels[i]] += 1 / n;
        pc[clusters[i]] += 1 / n;
        joint[{labels[i], clusters[i]}] += 1 / n;
    }
    double hl = 0, hc = 0, mi = 0;
    for (auto [_, p] : pl) hl -= p * std::log(p);
    for (auto [_, p] : pc) hc -= p * std::log(p);
    for (auto [key, p] : joint) mi += p * std::log(p / (pl[key.first] * pc[key.second]));
    return mi / std::max(hl, hc);
}

} // namespace bvae::oracle
