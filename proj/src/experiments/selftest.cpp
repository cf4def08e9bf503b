#include "bvae/experiments/selftest.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "bvae/branches/branch.hpp"
#include "bvae/metrics/scores.hpp"
#include "bvae/nn/grad_check.hpp"
#include "bvae/vae/loss.hpp"

namespace bvae::experiments {

namespace {

using nn::Activation;
using nn::LayerSpec;

std::string fmt_err(double e) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "max relative error %.3g", e);
    return buf;
}

TensorD random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    TensorD t(std::move(shape));
    for (double& v : t.values()) v = u(rng);
    return t;
}

double layer_error(const std::string& name, const Shape& sample, std::vector<LayerSpec> layers, std::mt19937_64& rng) {
    nn::Network<double> net(name, sample, std::move(layers));
    net.initialize(rng);
    for (auto& p : net.parameters()) {
        for (double& v : p.value.values()) v += 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    Shape in{3};
    in.insert(in.end(), sample.begin(), sample.end());
    nn::Parameter<double> input{"input", random_tensor(in, rng), TensorD(in)};
    nn::Network<double>::Cache cache;
    const TensorD out = net.forward(input.value, &cache);
    const TensorD probe = random_tensor(out.shape(), rng);
    net.zero_grad();
    input.grad = net.backward(cache, probe);
    std::vector<nn::Parameter<double>*> params{&input};
    for (auto& p : net.parameters()) params.push_back(&p);
    const auto loss = [&] { return dot<double>(net.forward(input.value).values(), probe.values()); };
    return nn::grad_check(loss, params).max_relative_error;
}

double end_to_end_error(vae::ReconMode mode, std::mt19937_64& rng) {
    vae::VaeArchitecture arch;
    arch.image_side = 4;
    arch.conv1_filters = 3;
    arch.conv2_filters = 4;
    arch.hidden_units = 5;
    arch.output = mode == vae::ReconMode::bce ? Activation::sigmoid : Activation::relu;
    vae::VaeModel<double> model(arch);
    model.initialize(rng);
    for (auto* p : model.parameters()) {
        if (p->name.ends_with("bias")) p->value = random_tensor(p->value.shape(), rng, -0.1, 0.1);
    }
    branches::Branch<double> branch(branches::BranchConfig{.kind = branches::BranchKind::mlp}, 2);
    branch.initialize(rng);
    const TensorD images = random_tensor({3, 4, 4, 1}, rng, 0.05, 0.95);
    const TensorD targets = mode == vae::ReconMode::bce ? images : random_tensor({3, 4, 4, 1}, rng, 0.0, 1.0);
    const TensorD eps = random_tensor({3, 2}, rng);
    const std::vector<std::uint8_t> labels{1, 4, 7};
    const std::vector<double> weights{1.0, 0.5, 2.0};
    const vae::BranchCallback<double> cb = [&](const TensorD& z, double scale) {
        auto step = branch.loss_and_grad(z, labels, weights, scale);
        return vae::BranchTerm<double>{step.loss, step.grad_z};
    };
    const vae::StepSettings settings{0.7, 3.0, mode};
    model.zero_grad();
    branch.zero_grad();
    vae::compute_loss_and_gradients<double>(model, images, targets, eps, weights, settings, &cb);
    std::vector<nn::Parameter<double>*> params = model.parameters();
    for (auto* p : branch.parameters()) params.push_back(p);
    const auto loss = [&] {
        return vae::compute_loss_and_gradients<double>(model, images, targets, eps, weights, settings, &cb).loss.total;
    };
    // The mlp head is large; a strided subset of each branch tensor suffices.
    return nn::grad_check(loss, params, {1e-6, 64}).max_relative_error;
}

double exhaustive_accuracy(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) hits += perm[static_cast<std::size_t>(pred[i])] == truth[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(truth.size());
}

double pair_ari(const std::vector<int>& a, const std::vector<int>& b) {
    double ss = 0, sd = 0, ds = 0, dd = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool x = a[i] == a[j];
            const bool y = b[i] == b[j];
            (x && y ? ss : x ? sd : y ? ds : dd) += 1;
        }
    }
    const double n = ss + sd + ds + dd;
    const double expected = (ss + sd) * (ss + ds) / n;
    const double max_index = 0.5 * ((ss + sd) + (ss + ds));
    if (max_index == expected) return 1.0;
    return (ss - expected) / (max_index - expected);
}

} // namespace

std::vector<CheckLine> run_grad_checks(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CheckLine> out;
    const auto layer = [&](const std::string& name, const Shape& sample, std::vector<LayerSpec> layers) {
        const double e = layer_error(name, sample, std::move(layers), rng);
        out.push_back({"layer " + name, e <= 1e-4, fmt_err(e)});
    };
    layer("dense", {5}, {LayerSpec::dense("d", 4)});
    layer("conv2d_stride1", {5, 5, 2}, {LayerSpec::conv2d("c", 3, 3, 1)});
    layer("conv2d_stride2", {6, 6, 2}, {LayerSpec::conv2d("c", 3, 3, 2)});
    layer("conv2d_transpose_stride2", {3, 3, 2}, {LayerSpec::conv2d_transpose("t", 3, 3, 2)});
    layer("relu", {7}, {LayerSpec::dense("d", 6), LayerSpec::activate("a", Activation::relu)});
    layer("sigmoid", {7}, {LayerSpec::dense("d", 6), LayerSpec::activate("a", Activation::sigmoid)});
    layer("softmax", {7}, {LayerSpec::dense("d", 6), LayerSpec::activate("a", Activation::softmax)});
    layer("flatten_reshape", {2, 2, 3},
          {LayerSpec::flatten("f"), LayerSpec::dense("d", 8), LayerSpec::reshape("r", {2, 2, 2})});
    for (vae::ReconMode mode : {vae::ReconMode::bce, vae::ReconMode::mse}) {
        const double e = end_to_end_error(mode, rng);
        out.push_back({"end-to-end objective (" + std::string(vae::to_string(mode)) + ", mlp branch)", e <= 1e-3,
                       fmt_err(e)});
    }
    return out;
}

std::vector<CheckLine> run_metric_selftests(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CheckLine> out;

    std::size_t acc_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 5;
        const std::size_t n = 5 + static_cast<std::size_t>(trial % 20);
        std::uniform_int_distribution<int> lab(0, k - 1);
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = lab(rng);
            p[i] = lab(rng);
        }
        if (std::abs(metrics::clustering_accuracy(t, p) - exhaustive_accuracy(t, p, k)) > 1e-12) ++acc_bad;
    }
    out.push_back({"ACC (Hungarian) equals exhaustive mapping, K <= 6, 200 instances", acc_bad == 0,
                   std::to_string(acc_bad) + " mismatches"});

    std::size_t ari_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 11);
        std::uniform_int_distribution<int> lab(0, 3);
        std::vector<int> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = lab(rng);
            b[i] = lab(rng);
        }
        if (std::abs(metrics::adjusted_rand_index(a, b).ari - pair_ari(a, b)) > 1e-12) ++ari_bad;
    }
    out.push_back({"ARI equals pair-counting oracle, N <= 12, 200 instances", ari_bad == 0,
                   std::to_string(ari_bad) + " mismatches"});

    const std::vector<int> x{0, 0, 1, 1, 2, 2, 2, 3};
    const std::vector<int> constant(x.size(), 0);
    const double nmi_same = metrics::normalized_mutual_information(x, x);
    const double nmi_const = metrics::normalized_mutual_information(x, constant);
    out.push_back({"NMI of identical partitions is 1", std::abs(nmi_same - 1.0) < 1e-12,
                   "NMI = " + std::to_string(nmi_same)});
    out.push_back({"NMI against a constant clustering is 0", std::abs(nmi_const) < 1e-12,
                   "NMI = " + std::to_string(nmi_const)});

    std::size_t relabel_bad = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> lab(0, 4);
        std::vector<int> t(30), p(30);
        for (std::size_t i = 0; i < 30; ++i) {
            t[i] = lab(rng);
            p[i] = lab(rng);
        }
        std::vector<int> perm{0, 1, 2, 3, 4};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> q(30);
        for (std::size_t i = 0; i < 30; ++i) q[i] = perm[static_cast<std::size_t>(p[i])];
        const bool same = std::abs(metrics::clustering_accuracy(t, p) - metrics::clustering_accuracy(t, q)) < 1e-12 &&
                          std::abs(metrics::normalized_mutual_information(t, p) -
                                   metrics::normalized_mutual_information(t, q)) < 1e-12 &&
                          std::abs(metrics::adjusted_rand_index(t, p).ari - metrics::adjusted_rand_index(t, q).ari) <
                              1e-12;
        relabel_bad += !same;
    }
    out.push_back({"ACC, NMI and ARI invariant to cluster relabeling", relabel_bad == 0,
                   std::to_string(relabel_bad) + " of 50 instances changed"});
    return out;
}

} // namespace bvae::experiments
