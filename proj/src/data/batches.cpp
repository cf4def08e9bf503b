#include "bvae/data/batches.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bvae/random.hpp"

namespace bvae::data {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng = make_rng(seed, Stream::shuffle, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

Batch gather_batch(const LabeledDataset& ds, std::span<const std::size_t> indices, const ClassWeights& weights) {
    if (indices.empty()) throw ConfigError("gather_batch: empty batch");
    const std::size_t b = indices.size();
    Batch out;
    out.images = Tensor({b, image_side, image_side, 1});
    out.onehot = Tensor({b, num_classes});
    out.indices.assign(indices.begin(), indices.end());
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = indices[i];
        if (src >= ds.size()) throw DimensionError("gather_batch: index " + std::to_string(src) + " out of range");
        std::ranges::copy(ds.image(src), out.images.row(i).begin());
        const std::uint8_t label = ds.labels[src];
        out.labels.push_back(label);
        out.onehot.at(i, label) = 1.0f;
        out.weights.push_back(weights[label]);
    }
    return out;
}

BatchIterator::BatchIterator(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                             ClassWeights weights)
    : ds_(ds), batch_size_(batch_size), weights_(weights) {
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    for (float w : weights_) {
        if (!(w > 0.0f) || !std::isfinite(w)) throw ConfigError("class weights must be positive and finite");
    }
    order_ = epoch_order(ds.size(), seed, epoch);
}

std::size_t BatchIterator::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

Batch BatchIterator::batch(std::size_t b) const {
    const std::size_t begin = b * batch_size_;
    if (begin >= order_.size()) throw DimensionError("batch " + std::to_string(b) + " out of range");
    const std::size_t end = std::min(order_.size(), begin + batch_size_);
    return gather_batch(ds_, std::span(order_).subspan(begin, end - begin), weights_);
}

std::vector<Batch> batch_iter(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed,
                              std::size_t epoch, const ClassWeights& weights) {
    const BatchIterator it(ds, batch_size, seed, epoch, weights);
    std::vector<Batch> out;
    for (std::size_t b = 0; b < it.batch_count(); ++b) out.push_back(it.batch(b));
    return out;
}

} // namespace bvae::data
