#include "bvae/train/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include "bvae/branches/branch.hpp"
#include "bvae/metrics/kmeans.hpp"
#include "bvae/nn/adam.hpp"
#include "bvae/random.hpp"

namespace bvae::train {

ProbeResult evaluate_probe(const Tensor& train_codes, std::span<const std::uint8_t> train_labels,
                           const Tensor& test_codes, std::span<const std::uint8_t> test_labels,
                           const ProbeConfig& config, std::uint64_t seed) {
    if (train_codes.rank() != 2 || test_codes.rank() != 2 || train_codes.extent(1) != test_codes.extent(1)) {
        throw DimensionError("evaluate_probe: codes must be N x k with matching k");
    }
    if (train_labels.size() != train_codes.extent(0) || test_labels.size() != test_codes.extent(0)) {
        throw DimensionError("evaluate_probe: one label per code required");
    }
    const std::size_t n = train_codes.extent(0);
    const std::size_t k = train_codes.extent(1);
    branches::Branch<float> probe(branches::BranchConfig{.kind = branches::BranchKind::mlp}, k);
    auto init_rng = make_rng(seed, Stream::probe, 0);
    probe.initialize(init_rng);
    auto params = probe.parameters();
    nn::AdamState<float> adam = nn::make_adam_state<float>(params);

    std::vector<std::size_t> order(n);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto shuffle_rng = make_rng(seed, Stream::probe, e + 1);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, n - start);
            Tensor z({b, k});
            std::vector<std::uint8_t> labels(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(train_codes.row(src).begin(), k, z.row(i).begin());
                labels[i] = train_labels[src];
            }
            const std::vector<float> weights(b, 1.0f);
            probe.zero_grad();
            probe.loss_and_grad(z, labels, weights, 1.0f);
            nn::adam_step<float>(params, adam);
        }
    }

    ProbeResult result;
    const std::size_t m = test_codes.extent(0);
    result.predictions.resize(m);
    constexpr std::size_t chunk = 4096;
    for (std::size_t start = 0; start < m; start += chunk) {
        const std::size_t b = std::min(chunk, m - start);
        Tensor z({b, k}, std::vector<float>(test_codes.values().begin() + start * k,
                                            test_codes.values().begin() + (start + b) * k));
        const branches::BranchOutput<float> out = probe.forward(z, {});
        for (std::size_t i = 0; i < b; ++i) {
            const auto row = out.probs.row(i);
            result.predictions[start + i] = static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin());
        }
    }
    result.confusion = metrics::confusion_matrix(test_labels, result.predictions);
    result.accuracy = metrics::confusion_accuracy(result.confusion);
    return result;
}

MetricsReport evaluate_model(const vae::VaeModel<float>& model, const data::LabeledDataset& train,
                             const data::LabeledDataset& test, const ProbeConfig& probe, std::uint64_t seed) {
    const Tensor test_codes = vae::encode_means(model, test.images);
    const Tensor train_codes = vae::encode_means(model, train.images);

    metrics::KMeansOptions opts;
    opts.seed = seed;
    const metrics::Partition part = metrics::kmeans(tensor_cast<double>(test_codes), opts);
    const std::vector<int> truth = metrics::to_ints(test.labels);

    MetricsReport r;
    r.nmi = metrics::normalized_mutual_information(truth, part.assignments);
    r.acc = metrics::clustering_accuracy(truth, part.assignments);
    r.ari_detail = metrics::adjusted_rand_index(truth, part.assignments);
    r.ari = r.ari_detail.ari;
    r.kmeans_wcss = part.wcss;
    const ProbeResult p = evaluate_probe(train_codes, train.labels, test_codes, test.labels, probe, seed);
    r.probe_accuracy = p.accuracy;
    r.confusion = p.confusion;
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    return {{"nmi", r.nmi},
            {"acc", r.acc},
            {"ari", r.ari},
            {"probe_accuracy", r.probe_accuracy},
            {"confusion", r.confusion},
            {"rand_index", r.ari_detail.rand_index},
            {"same_same_pairs", r.ari_detail.same_same},
            {"different_different_pairs", r.ari_detail.different_different},
            {"total_pairs", r.ari_detail.total_pairs},
            {"kmeans_wcss", r.kmeans_wcss}};
}

} // namespace bvae::train
