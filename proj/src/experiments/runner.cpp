#include "bvae/experiments/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bvae/data/idx.hpp"
#include "bvae/data/rotation.hpp"
#include "bvae/experiments/export.hpp"
#include "bvae/train/checkpoint.hpp"

namespace bvae::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void say(const RunOptions& o, const std::string& msg) {
    if (o.log) o.log(msg);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    const std::vector<unsigned char> bytes(text.begin(), text.end());
    fs::path tmp = path;
    tmp += ".partial";
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw IoError("write failed for " + tmp.string());
    fs::rename(tmp, path);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_history_csv(const fs::path& path, const train::TrainConfig& config,
                       const std::vector<train::EpochRecord>& history) {
    std::ostringstream out;
    out << "# config_hash=" << train::config_hash(config) << "\n# seed=" << config.seed
        << "\n# version=" << code_version() << "\n";
    out << "epoch,recon,kl,branch,total,first_batch_total,clamped_pixels,branch_accuracy,exact_accuracy\n";
    for (const train::EpochRecord& r : history) {
        out << r.epoch << "," << fmt(r.loss.recon) << "," << fmt(r.loss.kl) << "," << fmt(r.loss.branch) << ","
            << fmt(r.loss.total) << "," << fmt(r.first_batch.total) << "," << r.clamped_pixels << ","
            << (r.branch_accuracy ? fmt(*r.branch_accuracy) : "") << ","
            << (r.exact_accuracy ? fmt(*r.exact_accuracy) : "") << "\n";
    }
    write_text(path, out.str());
}

train::MetricsReport metrics_from_json(const json& j) {
    train::MetricsReport r;
    r.nmi = j.at("nmi").get<double>();
    r.acc = j.at("acc").get<double>();
    r.ari = j.at("ari").get<double>();
    r.probe_accuracy = j.at("probe_accuracy").get<double>();
    r.confusion = j.at("confusion").get<metrics::ConfusionMatrix>();
    r.ari_detail.ari = r.ari;
    r.ari_detail.rand_index = j.at("rand_index").get<double>();
    r.ari_detail.same_same = j.at("same_same_pairs").get<std::uint64_t>();
    r.ari_detail.different_different = j.at("different_different_pairs").get<std::uint64_t>();
    r.ari_detail.total_pairs = j.at("total_pairs").get<std::uint64_t>();
    r.kmeans_wcss = j.at("kmeans_wcss").get<double>();
    return r;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

DataCache::DataCache(fs::path data_dir, bool verify) : dir_(std::move(data_dir)), verify_(verify) {}

const data::LabeledDataset& DataCache::mnist(data::Split split) {
    auto it = splits_.find(split);
    if (it == splits_.end()) it = splits_.emplace(split, data::load_mnist(dir_, split, verify_)).first;
    return it->second;
}

DataCache::RunData DataCache::prepare(const train::TrainConfig& c) {
    RunData d;
    const data::LabeledDataset& train_raw = mnist(data::Split::train);
    const data::LabeledDataset& test_raw = mnist(data::Split::test);
    const std::size_t n = c.train_limit == 0 ? train_raw.size() : std::min(c.train_limit, train_raw.size());
    const data::LabeledDataset train_prefix = data::take_prefix(train_raw, n);
    if (c.dataset == "mnist_rotated") {
        d.train = data::make_rotated_dataset(train_prefix, c.seed);
        d.test = data::make_rotated_dataset(test_raw, c.seed);
    } else {
        d.train = train_prefix;
        d.test = test_raw;
    }
    if (c.target_mode == train::TargetMode::fixed) d.targets = data::make_target_set(c.target_kind, train_prefix, c.seed);
    return d;
}

RunResult read_run_result(const fs::path& run_dir) {
    const json j = read_json(run_dir / "metrics.json");
    RunResult r;
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.metrics = metrics_from_json(j.at("metrics"));
    for (const json& h : j.at("history")) r.history.push_back(train::epoch_record_from_json(h));
    r.reused = true;
    return r;
}

RunResult run_single(const std::string& variant, const train::TrainConfig& config, DataCache& data,
                     const fs::path& run_dir, const RunOptions& options) {
    const std::string hash = train::config_hash(config);
    const fs::path metrics_path = run_dir / "metrics.json";
    const fs::path ckpt_path = run_dir / "checkpoint.bvae";
    const fs::path config_path = run_dir / "config.json";

    if (fs::exists(config_path) && !options.force) {
        const std::string existing = train::config_hash(train::config_from_json(read_json(config_path)));
        if (existing != hash) {
            throw ConfigError(run_dir.string() + " holds a run with config " + existing + ", requested " + hash +
                              "; pass --force to overwrite");
        }
        if (fs::exists(metrics_path)) {
            say(options, variant + " seed " + std::to_string(config.seed) + ": reusing " + metrics_path.string());
            return read_run_result(run_dir);
        }
    }
    if (options.force) {
        for (const fs::path& p : {metrics_path, ckpt_path}) fs::remove(p);
    }
    fs::create_directories(run_dir);
    write_text(config_path, train::to_json(config).dump(2) + "\n");

    DataCache::RunData d = data.prepare(config);
    const data::TargetSet* targets = d.targets ? &*d.targets : nullptr;
    std::optional<train::Trainer> trainer;
    if (fs::exists(ckpt_path)) {
        train::Checkpoint ck = train::load_checkpoint(ckpt_path);
        if (train::config_hash(ck.config) != hash) {
            throw ConfigError(ckpt_path.string() + " belongs to config " + train::config_hash(ck.config));
        }
        trainer.emplace(train::Trainer::resume(ck, d.train, targets));
        say(options, variant + " seed " + std::to_string(config.seed) + ": resuming at epoch " +
                         std::to_string(trainer->epoch()));
    } else {
        trainer.emplace(config, d.train, targets);
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        trainer->run([&](const train::EpochRecord& r) {
            train::save_checkpoint(trainer->checkpoint(), ckpt_path);
            write_history_csv(run_dir / "history.csv", config, trainer->history());
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s seed %llu: epoch %zu/%zu loss %.4f (recon %.4f kl %.4f branch %.4f) %.0fs",
                          variant.c_str(), static_cast<unsigned long long>(config.seed), r.epoch + 1, config.epochs,
                          r.loss.total, r.loss.recon, r.loss.kl, r.loss.branch, secs);
            say(options, buf);
        });
    } catch (const NumericError& e) {
        json diag = {{"error", e.what()},
                     {"epoch", trainer->epoch()},
                     {"config_hash", hash},
                     {"seed", config.seed},
                     {"version", code_version()},
                     {"last_good_checkpoint", fs::exists(ckpt_path) ? ckpt_path.string() : ""}};
        write_text(run_dir / "diagnostics.json", diag.dump(2) + "\n");
        throw;
    }

    RunResult result;
    result.variant = variant;
    result.seed = config.seed;
    result.config_hash = hash;
    result.history = trainer->history();
    result.metrics = train::evaluate_model(trainer->model(), d.train, d.test, config.probe, config.seed);

    const Provenance prov{hash, config.seed, std::string(code_version())};
    if (options.exports) {
        export_latent_scatter(trainer->model(), d.test, run_dir / "scatter.csv", prov);
        if (config.latent_dim == 2) export_decoder_grid(trainer->model(), run_dir / "decoder_grid.pgm", prov);
        export_confusion(result.metrics.confusion, run_dir / "confusion.csv", run_dir / "confusion.pgm", prov);
    }

    json history = json::array();
    for (const train::EpochRecord& r : result.history) history.push_back(train::to_json(r));
    const json out = {{"variant", variant},          {"config_hash", hash},
                      {"seed", config.seed},         {"version", code_version()},
                      {"config", train::to_json(config)}, {"metrics", train::to_json(result.metrics)},
                      {"history", history}};
    write_text(metrics_path, out.dump(2) + "\n");
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s seed %llu: NMI %.3f ACC %.3f ARI %.3f probe %.3f", variant.c_str(),
                  static_cast<unsigned long long>(config.seed), result.metrics.nmi, result.metrics.acc,
                  result.metrics.ari, result.metrics.probe_accuracy);
    say(options, buf);
    return result;
}

std::vector<SummaryRow> aggregate(const ExperimentSpec& spec, const std::vector<RunResult>& results) {
    std::vector<SummaryRow> rows;
    for (const Variant& v : spec.variants) {
        SummaryRow row;
        row.variant = v.name;
        row.label = v.label;
        row.config_hash = train::config_hash(v.config);
        std::size_t n = 0;
        for (const RunResult& r : results) {
            if (r.variant != v.name) continue;
            row.seeds.push_back(r.seed);
            row.nmi += r.metrics.nmi;
            row.acc += r.metrics.acc;
            row.ari += r.metrics.ari;
            row.probe_accuracy += r.metrics.probe_accuracy;
            ++n;
        }
        if (n == 0) continue;
        const double dn = static_cast<double>(n);
        row.nmi /= dn;
        row.acc /= dn;
        row.ari /= dn;
        row.probe_accuracy /= dn;
        rows.push_back(row);
    }
    return rows;
}

void write_summary_csv(const fs::path& path, const ExperimentSpec& spec, const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "# experiment=" << spec.name << "\n# version=" << code_version() << "\n";
    out << "# values are means over the listed seeds\n";
    out << "variant,label,config_hash,seeds,NMI,ACC,ARI,Classification Accuracy\n";
    for (const SummaryRow& r : rows) {
        std::string seeds;
        for (std::uint64_t s : r.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
        out << r.variant << "," << r.label << "," << r.config_hash << "," << seeds << "," << fmt(r.nmi) << ","
            << fmt(r.acc) << "," << fmt(r.ari) << "," << fmt(r.probe_accuracy) << "\n";
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text(path, out.str());
}

std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<SummaryRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != 8) throw FormatError(path.string() + ": expected 8 columns in '" + line + "'");
        SummaryRow r;
        r.variant = cells[0];
        r.label = cells[1];
        r.config_hash = cells[2];
        std::istringstream seeds(cells[3]);
        std::string s;
        while (std::getline(seeds, s, ';')) r.seeds.push_back(std::stoull(s));
        r.nmi = std::stod(cells[4]);
        r.acc = std::stod(cells[5]);
        r.ari = std::stod(cells[6]);
        r.probe_accuracy = std::stod(cells[7]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<RunResult> run_experiment(const ExperimentSpec& spec, DataCache& data, const RunOptions& options) {
    validate(spec);
    for (const std::string& name : options.only) {
        const bool known = std::any_of(spec.variants.begin(), spec.variants.end(),
                                       [&](const Variant& v) { return v.name == name; });
        if (!known) throw ConfigError("experiment '" + spec.name + "' has no variant '" + name + "'");
    }
    const fs::path root = options.out_dir / spec.name;
    std::vector<RunResult> results;
    for (const Variant& v : spec.variants) {
        if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), v.name) == options.only.end()) {
            continue;
        }
        for (std::size_t r = 0; r < spec.repeats; ++r) {
            train::TrainConfig c = v.config;
            c.seed = v.config.seed + r;
            const fs::path dir = root / v.name / ("seed_" + std::to_string(c.seed));
            results.push_back(run_single(v.name, c, data, dir, options));
        }
    }
    // Fold in finished runs of other variants so partial invocations still
    // produce a complete table.
    for (const Variant& v : spec.variants) {
        if (options.only.empty() || std::find(options.only.begin(), options.only.end(), v.name) != options.only.end()) {
            continue;
        }
        for (std::size_t r = 0; r < spec.repeats; ++r) {
            const fs::path dir = root / v.name / ("seed_" + std::to_string(v.config.seed + r));
            if (fs::exists(dir / "metrics.json")) {
                RunResult prior = read_run_result(dir);
                train::TrainConfig c = v.config;
                c.seed = v.config.seed + r;
                if (prior.config_hash == train::config_hash(c)) results.push_back(prior);
            }
        }
    }
    write_summary_csv(root / "summary.csv", spec, aggregate(spec, results));
    return results;
}

} // namespace bvae::experiments
