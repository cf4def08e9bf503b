#include "bvae/experiments/presets.hpp"

#include <set>

namespace bvae::experiments {

using train::TargetMode;
using train::TrainConfig;

namespace {

TrainConfig vae(std::uint64_t seed, const std::string& dataset, std::size_t k) {
    TrainConfig c;
    c.seed = seed;
    c.dataset = dataset;
    c.latent_dim = k;
    return c;
}

TrainConfig with_mlp(TrainConfig c, double lambda, double alpha = 1.0) {
    c.branch = branches::BranchConfig{.kind = branches::BranchKind::mlp};
    c.lambda = lambda;
    c.alpha = alpha;
    return c;
}

TrainConfig with_target(TrainConfig c, data::TargetKind kind) {
    c.target_mode = TargetMode::fixed;
    c.target_kind = kind;
    return train::normalized(c);
}

// The six rows shared by the MNIST and rotated-MNIST comparisons.
std::vector<Variant> comparison_rows(std::uint64_t seed, const std::string& dataset) {
    const TrainConfig base = vae(seed, dataset, 2);
    return {
        {"vae", "VAE", base},
        {"vae_fixed", "VAE + Fixed Output", with_target(base, data::TargetKind::exemplar)},
        {"bvae_l10", "BVAE (lambda = 10)", with_mlp(base, 10)},
        {"bvae_l100", "BVAE (lambda = 100)", with_mlp(base, 100)},
        {"bvae_a001", "BVAE (alpha = 0.01)", with_mlp(base, 1, 0.01)},
        {"bvae_fixed", "BVAE + Fixed Output", with_target(with_mlp(base, 100), data::TargetKind::exemplar)},
    };
}

} // namespace

std::vector<std::string> preset_names() { return {"table1", "table2", "table3", "table4", "knn_weights"}; }

TrainConfig quick_profile(TrainConfig c) {
    c.train_limit = 10000;
    c.epochs = 10;
    return c;
}

ExperimentSpec make_preset(std::string_view name, std::uint64_t seed, bool quick) {
    ExperimentSpec spec;
    spec.name = std::string(name);
    if (name == "table1") {
        spec.variants = comparison_rows(seed, "mnist");
    } else if (name == "table3") {
        spec.variants = comparison_rows(seed, "mnist_rotated");
    } else if (name == "table2") {
        const TrainConfig base = vae(seed, "mnist", 2);
        spec.variants = {
            {"fixed_mnist", "MNIST", with_target(base, data::TargetKind::exemplar)},
            {"fixed_gaussian", "Gaussians", with_target(base, data::TargetKind::gaussian)},
            {"fixed_square", "Squares", with_target(base, data::TargetKind::square)},
            {"fixed_wavelet", "Wavelets", with_target(base, data::TargetKind::wavelet)},
        };
    } else if (name == "table4") {
        for (std::size_t k : {2, 3, 5, 10}) {
            const TrainConfig base = vae(seed, "mnist_rotated", k);
            const std::string suffix = "_k" + std::to_string(k);
            const std::string dim = " (k = " + std::to_string(k) + ")";
            spec.variants.push_back({"vae" + suffix, "VAE" + dim, base});
            spec.variants.push_back({"vae_fixed" + suffix, "VAE + Fixed Output" + dim,
                                     with_target(base, data::TargetKind::exemplar)});
            spec.variants.push_back({"bvae" + suffix, "BVAE" + dim, with_mlp(base, 100)});
        }
    } else if (name == "knn_weights") {
        TrainConfig base = vae(seed, "mnist", 2);
        base.branch = branches::BranchConfig{.kind = branches::BranchKind::exact_knn, .neighbors = 40};
        base.lambda = 10;
        for (const char* preset : {"uniform", "knn10", "pairs2", "six_zero2"}) {
            TrainConfig c = base;
            c.class_weights = train::class_weight_preset(preset);
            spec.variants.push_back({std::string("knn_") + preset, std::string("kNN branch, weights ") + preset, c});
        }
    } else {
        std::string known;
        for (const std::string& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown experiment preset '" + std::string(name) + "' (expected one of " + known + ")");
    }
    if (quick) {
        for (Variant& v : spec.variants) v.config = quick_profile(v.config);
    }
    validate(spec);
    return spec;
}

void validate(const ExperimentSpec& spec) {
    if (spec.variants.empty()) throw ConfigError("experiment '" + spec.name + "' has no variants");
    if (spec.repeats < 1) throw ConfigError("experiment '" + spec.name + "' needs at least one repeat");
    std::set<std::string> names;
    for (const Variant& v : spec.variants) {
        if (v.name.empty()) throw ConfigError("experiment '" + spec.name + "' has a variant without a name");
        if (v.name.find_first_of("/\\ ") != std::string::npos) {
            throw ConfigError("variant name '" + v.name + "' must not contain slashes or spaces");
        }
        if (!names.insert(v.name).second) {
            throw ConfigError("variant name '" + v.name + "' appears twice in experiment '" + spec.name + "'");
        }
        train::validate(v.config);
    }
}

} // namespace bvae::experiments
