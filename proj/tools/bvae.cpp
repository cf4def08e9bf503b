#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bvae/data/idx.hpp"
#include "bvae/experiments/export.hpp"
#include "bvae/experiments/presets.hpp"
#include "bvae/experiments/runner.hpp"
#include "bvae/experiments/selftest.hpp"
#include "bvae/train/checkpoint.hpp"

using namespace bvae;
namespace fs = std::filesystem;

namespace {

enum ExitCode { ok = 0, other = 1, config_error = 2, data_error = 3, numeric_error = 4 };

struct Globals {
    std::string data_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool quick = false;
    std::string out = "runs";
    bool force = false;
    std::string config;
    bool no_verify = false;
};

struct TrainOverrides {
    std::optional<double> alpha, lambda, temperature;
    std::optional<std::string> branch, target, dataset, class_weights, recon;
    std::optional<std::size_t> latent_dim, epochs, batch_size, train_limit, neighbors;
};

void log_line(const std::string& s) { std::cerr << s << std::endl; }

fs::path require_data_dir(const Globals& g) {
    if (g.data_dir.empty()) {
        throw IoError("no MNIST directory given; pass --data DIR or set BVAE_DATA_DIR to a directory holding "
                      "train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte and "
                      "t10k-labels-idx1-ubyte (optionally .gz)");
    }
    return g.data_dir;
}

train::TrainConfig build_config(const Globals& g, const TrainOverrides& o) {
    nlohmann::json j = nlohmann::json::object();
    if (!g.config.empty()) {
        std::ifstream in(g.config);
        if (!in) throw ConfigError("cannot read config file " + g.config);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(g.config + ": " + e.what());
        }
    }
    if (o.alpha) j["alpha"] = *o.alpha;
    if (o.lambda) j["lambda"] = *o.lambda;
    if (o.branch) {
        if (*o.branch == "none") {
            j["branch"] = nullptr;
        } else {
            nlohmann::json b = j.contains("branch") && j["branch"].is_object() ? j["branch"] : nlohmann::json::object();
            b["kind"] = *o.branch;
            j["branch"] = b;
        }
    }
    if (o.neighbors || o.temperature) {
        if (!j.contains("branch") || !j["branch"].is_object()) throw ConfigError("--neighbors/--temperature need --branch");
        if (o.neighbors) j["branch"]["neighbors"] = *o.neighbors;
        if (o.temperature) j["branch"]["temperature"] = *o.temperature;
    }
    if (o.target) j["target"] = *o.target;
    if (o.dataset) j["dataset"] = *o.dataset;
    if (o.class_weights) j["class_weights"] = *o.class_weights;
    if (o.recon) j["recon"] = *o.recon;
    if (o.latent_dim) j["latent_dim"] = *o.latent_dim;
    if (o.epochs) j["epochs"] = *o.epochs;
    if (o.batch_size) j["batch_size"] = *o.batch_size;
    if (o.train_limit) j["train_limit"] = *o.train_limit;
    if (g.seed_set) j["seed"] = g.seed;
    train::TrainConfig c = train::config_from_json(j);
    if (g.quick) {
        // Explicit epoch/limit flags win over the quick profile.
        const train::TrainConfig q = experiments::quick_profile(c);
        if (!o.epochs) c.epochs = q.epochs;
        if (!o.train_limit) c.train_limit = q.train_limit;
    }
    return train::normalized(c);
}

std::vector<float> parse_point(const std::string& s) {
    std::vector<float> z;
    std::stringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            z.push_back(std::stof(cell));
        } catch (const std::exception&) {
            throw ConfigError("latent point '" + s + "' must be comma-separated numbers");
        }
    }
    if (z.empty()) throw ConfigError("empty latent point");
    return z;
}

void print_report(const train::MetricsReport& r) {
    std::cout << train::to_json(r).dump(2) << std::endl;
}

int print_checks(const std::vector<experiments::CheckLine>& lines) {
    bool all = true;
    for (const auto& l : lines) {
        std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << " (" << l.detail << ")\n";
        all = all && l.pass;
    }
    return all ? ok : other;
}

int run(int argc, char** argv) {
    CLI::App app{"Branched variational autoencoder experiments on MNIST"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    if (const char* env = std::getenv("BVAE_DATA_DIR")) g.data_dir = env;
    app.add_option("--data", g.data_dir, "MNIST directory (default: $BVAE_DATA_DIR)");
    app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) { g.seed_set = true; });
    app.add_flag("--quick", g.quick, "10000-sample, 10-epoch smoke profile");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_flag("--force", g.force, "overwrite existing outputs");
    app.add_option("--config", g.config, "JSON training config; flags override its fields");
    app.add_flag("--no-verify", g.no_verify, "skip the SHA-256 check of the MNIST files");

    TrainOverrides o;
    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_option("--alpha", o.alpha, "reconstruction weight");
        cmd->add_option("--lambda", o.lambda, "classifier branch weight");
        cmd->add_option("--branch", o.branch, "none, mlp, linear, soft_knn, class_mean, exact_knn, random_forest");
        cmd->add_option("--neighbors", o.neighbors, "kNN neighbours");
        cmd->add_option("--temperature", o.temperature, "soft kNN / class-mean temperature");
        cmd->add_option("--target", o.target, "self, exemplar, gaussian, square, wavelet");
        cmd->add_option("--dataset", o.dataset, "mnist or mnist_rotated");
        cmd->add_option("--class-weights", o.class_weights, "uniform, knn10, pairs2, six_zero2");
        cmd->add_option("--recon", o.recon, "bce or mse");
        cmd->add_option("--latent-dim", o.latent_dim, "2, 3, 5 or 10");
        cmd->add_option("--epochs", o.epochs, "training epochs");
        cmd->add_option("--batch-size", o.batch_size, "batch size");
        cmd->add_option("--train-limit", o.train_limit, "use the first N training images (0 = all)");
    };

    auto* train_cmd = app.add_subcommand("train", "train one configuration, then evaluate it");
    add_overrides(train_cmd);
    std::string run_name = "train";
    train_cmd->add_option("--name", run_name, "run directory name under --out")->capture_default_str();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (k-means metrics and probe)");
    std::string checkpoint;
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

    auto* export_cmd = app.add_subcommand("export", "write figure data from a checkpoint");
    std::string export_kind;
    std::string export_path;
    std::string point;
    std::size_t test_index = 0;
    bool has_index = false;
    export_cmd->add_option("kind", export_kind, "scatter, grid, confusion or recon")
        ->required()
        ->check(CLI::IsMember({"scatter", "grid", "confusion", "recon"}));
    export_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    export_cmd->add_option("--file", export_path, "output file (confusion: CSV; a .pgm is written alongside)")->required();
    export_cmd->add_option("--z", point, "latent point for recon, comma-separated");
    export_cmd->add_option("--test-index", test_index, "recon: decode the latent mean of this test image")
        ->each([&](const std::string&) { has_index = true; });

    std::size_t repeats = 3;
    std::vector<std::string> only;
    bool no_exports = false;
    std::vector<CLI::App*> tables;
    for (const std::string& name : experiments::preset_names()) {
        std::string verb = name;
        std::replace(verb.begin(), verb.end(), '_', '-');
        auto* t = app.add_subcommand(verb, "run the " + name + " experiment preset");
        t->add_option("--repeats", repeats, "independent runs per variant")->capture_default_str();
        t->add_option("--variant", only, "run only these variants (finished runs of the rest are still tabulated)");
        t->add_flag("--no-exports", no_exports, "skip scatter, decoder grid and confusion exports");
        tables.push_back(t);
    }

    auto* grad_cmd = app.add_subcommand("grad-check", "finite-difference checks of every layer and the objective");
    auto* metrics_cmd = app.add_subcommand("metrics-selftest", "metric oracles on random small instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    if (train_cmd->parsed()) {
        const train::TrainConfig c = build_config(g, o);
        experiments::DataCache data(require_data_dir(g), !g.no_verify);
        experiments::RunOptions opts{g.out, g.force, {}, true, log_line};
        const fs::path dir = fs::path(g.out) / run_name;
        const experiments::RunResult r = experiments::run_single(run_name, c, data, dir, opts);
        print_report(r.metrics);
        std::cerr << "outputs in " << dir.string() << std::endl;
        return ok;
    }

    if (eval_cmd->parsed() || export_cmd->parsed()) {
        const train::Checkpoint ck = train::load_checkpoint(checkpoint);
        const vae::VaeModel<float> model = train::model_from_checkpoint(ck);
        const experiments::Provenance prov{train::config_hash(ck.config), ck.config.seed,
                                           std::string(experiments::code_version())};
        if (export_cmd->parsed() && export_kind == "grid") {
            experiments::export_decoder_grid(model, export_path, prov);
            return ok;
        }
        if (export_cmd->parsed() && export_kind == "recon" && !has_index) {
            if (point.empty()) throw ConfigError("recon export needs --z or --test-index");
            const std::vector<float> z = parse_point(point);
            experiments::export_reconstruction(model, z, export_path, prov);
            return ok;
        }
        experiments::DataCache data(require_data_dir(g), !g.no_verify);
        const experiments::DataCache::RunData d = data.prepare(ck.config);
        if (eval_cmd->parsed()) {
            print_report(train::evaluate_model(model, d.train, d.test, ck.config.probe, ck.config.seed));
        } else if (export_kind == "scatter") {
            experiments::export_latent_scatter(model, d.test, export_path, prov);
        } else if (export_kind == "confusion") {
            const train::MetricsReport r = train::evaluate_model(model, d.train, d.test, ck.config.probe, ck.config.seed);
            fs::path pgm = export_path;
            pgm.replace_extension(".pgm");
            experiments::export_confusion(r.confusion, export_path, pgm, prov);
        } else {
            if (test_index >= d.test.size()) throw ConfigError("--test-index out of range");
            const data::LabeledDataset one = data::take_prefix(d.test, test_index + 1);
            const Tensor mu = vae::encode_means(model, one.images);
            const auto z = mu.row(test_index);
            experiments::export_reconstruction(model, z, export_path, prov);
        }
        return ok;
    }

    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (!tables[i]->parsed()) continue;
        experiments::ExperimentSpec spec = experiments::make_preset(experiments::preset_names()[i], g.seed, g.quick);
        spec.repeats = repeats;
        experiments::DataCache data(require_data_dir(g), !g.no_verify);
        experiments::RunOptions opts{g.out, g.force, only, !no_exports, log_line};
        experiments::run_experiment(spec, data, opts);
        std::ifstream summary(fs::path(g.out) / spec.name / "summary.csv");
        std::cout << summary.rdbuf();
        return ok;
    }

    if (grad_cmd->parsed()) return print_checks(experiments::run_grad_checks(g.seed));
    if (metrics_cmd->parsed()) return print_checks(experiments::run_metric_selftests(g.seed));
    return other;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return config_error;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return config_error;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << std::endl;
        return numeric_error;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return data_error;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return data_error;
    } catch (const ValidationError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return data_error;
    } catch (const ConsistencyError& e) {
        std::cerr << "data error: " << e.what() << std::endl;
        return data_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return other;
    }
}
