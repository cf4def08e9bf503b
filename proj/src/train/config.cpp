#include "bvae/train/config.hpp"

#include <cmath>

#include "bvae/hash.hpp"

namespace bvae::train {

using nlohmann::json;

namespace {

bool synthetic(data::TargetKind k) { return k != data::TargetKind::exemplar; }

template <typename T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool found = false;
        for (const char* k : known) found = found || key == k;
        if (!found) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

} // namespace

nn::Activation output_activation(vae::ReconMode mode) {
    return mode == vae::ReconMode::bce ? nn::Activation::sigmoid : nn::Activation::relu;
}

TrainConfig normalized(TrainConfig c) {
    if (c.target_mode == TargetMode::fixed && synthetic(c.target_kind)) c.recon_mode = vae::ReconMode::mse;
    validate(c);
    return c;
}

void validate(const TrainConfig& c) {
    if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw ConfigError("alpha must be positive");
    if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be non-negative");
    if (c.lambda > 0.0 && !c.branch) throw ConfigError("lambda > 0 needs a classifier branch");
    if (c.latent_dim != 2 && c.latent_dim != 3 && c.latent_dim != 5 && c.latent_dim != 10) {
        throw ConfigError("latent_dim must be one of 2, 3, 5, 10; got " + std::to_string(c.latent_dim));
    }
    if (c.epochs < 1) throw ConfigError("epochs must be at least 1");
    if (c.batch_size < 1) throw ConfigError("batch size must be at least 1");
    for (float w : c.class_weights) {
        if (!(w > 0.0f) || !std::isfinite(w)) throw ConfigError("class weights must be positive and finite");
    }
    if (c.dataset != "mnist" && c.dataset != "mnist_rotated") {
        throw ConfigError("dataset must be mnist or mnist_rotated, got '" + c.dataset + "'");
    }
    if (c.target_mode == TargetMode::fixed && synthetic(c.target_kind) && c.recon_mode != vae::ReconMode::mse) {
        throw ConfigError("synthetic fixed targets use mse reconstruction");
    }
    if (c.branch) branches::validate(*c.branch);
    if (c.probe.epochs < 1 || c.probe.batch_size < 1) throw ConfigError("probe epochs and batch size must be positive");
}

json to_json(const TrainConfig& c) {
    json j;
    j["alpha"] = c.alpha;
    j["lambda"] = c.lambda;
    if (c.branch) {
        const branches::BranchConfig& b = *c.branch;
        j["branch"] = {{"kind", branches::to_string(b.kind)}, {"neighbors", b.neighbors},
                       {"temperature", b.temperature}, {"momentum", b.momentum},
                       {"n_estimators", b.n_estimators}, {"max_depth", b.max_depth}};
    } else {
        j["branch"] = nullptr;
    }
    j["target"] = c.target_mode == TargetMode::self ? "self" : std::string(data::to_string(c.target_kind));
    j["latent_dim"] = c.latent_dim;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    json weights = json::object();
    for (std::size_t d = 0; d < c.class_weights.size(); ++d) weights[std::to_string(d)] = c.class_weights[d];
    j["class_weights"] = weights;
    j["recon"] = vae::to_string(c.recon_mode);
    j["dataset"] = c.dataset;
    j["train_limit"] = c.train_limit;
    j["probe"] = {{"epochs", c.probe.epochs}, {"batch_size", c.probe.batch_size}};
    return j;
}

TrainConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"alpha", "lambda", "branch", "target", "latent_dim", "epochs", "batch_size", "seed",
                    "class_weights", "recon", "dataset", "train_limit", "probe"},
                   "config");
    TrainConfig c;
    if (j.contains("alpha")) c.alpha = get_as<double>(j, "alpha");
    if (j.contains("lambda")) c.lambda = get_as<double>(j, "lambda");
    if (j.contains("branch") && !j.at("branch").is_null()) {
        const json& b = j.at("branch");
        if (b.is_string()) {
            c.branch = branches::BranchConfig{.kind = branches::branch_kind_from_string(b.get<std::string>())};
        } else {
            reject_unknown(b, {"kind", "neighbors", "temperature", "momentum", "n_estimators", "max_depth"}, "branch");
            branches::BranchConfig bc;
            bc.kind = branches::branch_kind_from_string(get_as<std::string>(b, "kind"));
            if (b.contains("neighbors")) bc.neighbors = get_as<std::size_t>(b, "neighbors");
            if (b.contains("temperature")) bc.temperature = get_as<double>(b, "temperature");
            if (b.contains("momentum")) bc.momentum = get_as<double>(b, "momentum");
            if (b.contains("n_estimators")) bc.n_estimators = get_as<std::size_t>(b, "n_estimators");
            if (b.contains("max_depth")) bc.max_depth = get_as<std::size_t>(b, "max_depth");
            c.branch = bc;
        }
    }
    if (j.contains("target")) {
        const std::string t = get_as<std::string>(j, "target");
        if (t == "self") {
            c.target_mode = TargetMode::self;
        } else {
            c.target_mode = TargetMode::fixed;
            c.target_kind = data::target_kind_from_string(t);
        }
    }
    if (j.contains("latent_dim")) c.latent_dim = get_as<std::size_t>(j, "latent_dim");
    if (j.contains("epochs")) c.epochs = get_as<std::size_t>(j, "epochs");
    if (j.contains("batch_size")) c.batch_size = get_as<std::size_t>(j, "batch_size");
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("class_weights")) {
        const json& w = j.at("class_weights");
        if (w.is_string()) {
            c.class_weights = class_weight_preset(w.get<std::string>());
        } else {
            if (!w.is_object()) throw ConfigError("class_weights must be a preset name or an object");
            for (const auto& [key, value] : w.items()) {
                std::size_t cls = 0;
                try {
                    cls = std::stoul(key);
                } catch (const std::exception&) {
                    throw ConfigError("class_weights key '" + key + "' is not a class id");
                }
                if (cls >= c.class_weights.size() || key != std::to_string(cls)) {
                    throw ConfigError("class_weights key '" + key + "' is not a class id 0..9");
                }
                if (!value.is_number()) throw ConfigError("class weight for '" + key + "' must be a number");
                c.class_weights[cls] = value.get<float>();
            }
        }
    }
    if (j.contains("recon")) c.recon_mode = vae::recon_mode_from_string(get_as<std::string>(j, "recon"));
    if (j.contains("dataset")) c.dataset = get_as<std::string>(j, "dataset");
    if (j.contains("train_limit")) c.train_limit = get_as<std::size_t>(j, "train_limit");
    if (j.contains("probe")) {
        const json& p = j.at("probe");
        reject_unknown(p, {"epochs", "batch_size"}, "probe");
        if (p.contains("epochs")) c.probe.epochs = get_as<std::size_t>(p, "epochs");
        if (p.contains("batch_size")) c.probe.batch_size = get_as<std::size_t>(p, "batch_size");
    }
    return normalized(c);
}

std::string config_hash(const TrainConfig& config) { return sha256_hex(to_json(config).dump()).substr(0, 16); }

data::ClassWeights class_weight_preset(std::string_view name) {
    data::ClassWeights w = data::uniform_class_weights();
    auto scale = [&](std::initializer_list<int> classes, float factor) {
        for (int c : classes) w[static_cast<std::size_t>(c)] = factor;
    };
    if (name == "uniform") return w;
    if (name == "knn10") {
        scale({0, 1, 2}, 10.0f);
        scale({3, 6, 7, 9}, 0.1f);
    } else if (name == "pairs2") {
        scale({0, 1, 2, 6}, 2.0f);
        scale({3, 5, 7, 9}, 0.5f);
    } else if (name == "six_zero2") {
        scale({0, 6}, 2.0f);
        scale({4, 5, 8}, 0.5f);
    } else {
        throw ConfigError("unknown class weight preset '" + std::string(name) +
                          "' (expected uniform, knn10, pairs2 or six_zero2)");
    }
    return w;
}

} // namespace bvae::train
