#include "bvae/branches/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bvae/branches/knn.hpp"
#include "bvae/random.hpp"

namespace bvae::branches {

namespace {

double gini(const std::array<double, num_classes>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / total) * (c / total);
    return s;
}

class TreeBuilder {
public:
    TreeBuilder(const Tensor& codes, std::span<const std::uint8_t> labels, const ForestConfig& config,
                std::mt19937_64& rng)
        : codes_(codes), labels_(labels), config_(config), rng_(rng), dim_(codes.extent(1)),
          candidates_(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dim_))))) {}

    DecisionTree build(std::vector<std::size_t> samples) {
        grow(samples, 0);
        return std::move(tree_);
    }

private:
    float value(std::size_t sample, std::size_t feature) const { return codes_.at(sample, feature); }

    int grow(std::vector<std::size_t>& samples, std::size_t depth) {
        const int id = static_cast<int>(tree_.size());
        tree_.emplace_back();
        std::array<double, num_classes> counts{};
        for (std::size_t s : samples) counts[labels_[s]] += 1.0;
        const double n = static_cast<double>(samples.size());
        for (std::size_t c = 0; c < num_classes; ++c) tree_[id].distribution[c] = counts[c] / n;

        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
        const bool depth_limited = config_.max_depth > 0 && depth >= config_.max_depth;
        if (pure || depth_limited || samples.size() < config_.min_samples_split) return id;

        std::vector<std::size_t> features(dim_);
        std::iota(features.begin(), features.end(), std::size_t{0});
        std::shuffle(features.begin(), features.end(), rng_);
        features.resize(candidates_);

        double best_score = INFINITY;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f : features) {
            std::sort(samples.begin(), samples.end(), [&](std::size_t a, std::size_t b) {
                return value(a, f) < value(b, f) || (value(a, f) == value(b, f) && a < b);
            });
            std::array<double, num_classes> left{};
            for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
                left[labels_[samples[i]]] += 1.0;
                const float lo = value(samples[i], f);
                const float hi = value(samples[i + 1], f);
                if (lo == hi) continue;
                std::array<double, num_classes> right{};
                for (std::size_t c = 0; c < num_classes; ++c) right[c] = counts[c] - left[c];
                const double nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left_samples, right_samples;
        for (std::size_t s : samples) {
            (static_cast<double>(value(s, static_cast<std::size_t>(best_feature))) <= best_threshold ? left_samples
                                                                                                      : right_samples)
                .push_back(s);
        }
        samples.clear();
        samples.shrink_to_fit();
        tree_[id].feature = best_feature;
        tree_[id].threshold = best_threshold;
        const int l = grow(left_samples, depth + 1);
        const int r = grow(right_samples, depth + 1);
        tree_[id].left = l;
        tree_[id].right = r;
        return id;
    }

    const Tensor& codes_;
    std::span<const std::uint8_t> labels_;
    const ForestConfig& config_;
    std::mt19937_64& rng_;
    std::size_t dim_;
    std::size_t candidates_;
    DecisionTree tree_;
};

const TreeNode& leaf_for(const DecisionTree& tree, std::span<const float> x) {
    int node = 0;
    while (tree[node].feature >= 0) {
        node = static_cast<double>(x[static_cast<std::size_t>(tree[node].feature)]) <= tree[node].threshold
                   ? tree[node].left
                   : tree[node].right;
    }
    return tree[node];
}

} // namespace

RandomForest::RandomForest(ForestConfig config) : config_(config) {
    if (config_.n_estimators < 1) throw ConfigError("random forest needs at least one estimator");
    if (config_.min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
}

void RandomForest::fit(const Tensor& codes, std::span<const std::uint8_t> labels, std::uint64_t seed) {
    if (codes.rank() != 2 || codes.extent(0) != labels.size()) {
        throw DimensionError("forest fit: codes " + shape_string(codes.shape()) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    features_ = codes.extent(1);
    trees_.clear();
    const std::size_t n = labels.size();
    for (std::size_t t = 0; t < config_.n_estimators; ++t) {
        std::mt19937_64 rng = make_rng(seed, Stream::forest, t);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> bootstrap(n);
        for (std::size_t& s : bootstrap) s = pick(rng);
        trees_.push_back(TreeBuilder(codes, labels, config_, rng).build(std::move(bootstrap)));
    }
}

TensorD RandomForest::predict_proba(const Tensor& queries) const {
    if (trees_.empty()) throw UsageError("random forest is not fitted");
    if (queries.rank() != 2 || queries.extent(1) != features_) {
        throw DimensionError("forest predict: query width does not match the training codes");
    }
    TensorD probs({queries.extent(0), num_classes});
    const double share = 1.0 / static_cast<double>(trees_.size());
    for (std::size_t q = 0; q < queries.extent(0); ++q) {
        for (const DecisionTree& tree : trees_) {
            const TreeNode& leaf = leaf_for(tree, queries.row(q));
            for (std::size_t c = 0; c < num_classes; ++c) probs.at(q, c) += share * leaf.distribution[c];
        }
    }
    return probs;
}

std::vector<std::uint8_t> RandomForest::predict(const Tensor& queries) const {
    const TensorD probs = predict_proba(queries);
    std::vector<std::uint8_t> out(probs.extent(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_class(probs.row(i));
    return out;
}

} // namespace bvae::branches
