#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bvae/data/targets.hpp"
#include "bvae/experiments/presets.hpp"
#include "bvae/train/evaluate.hpp"
#include "bvae/train/trainer.hpp"

namespace bvae::experiments {

using Logger = std::function<void(const std::string&)>;

// Loads and verifies the MNIST splits once and derives per-run datasets.
class DataCache {
public:
    // `verify` checks the SHA-256 of each file against the published MNIST
    // digests.
    explicit DataCache(std::filesystem::path data_dir, bool verify = true);

    const data::LabeledDataset& mnist(data::Split split);

    struct RunData {
        data::LabeledDataset train;
        data::LabeledDataset test;
        std::optional<data::TargetSet> targets;
    };
    // Rotation (seeded by the config seed), the training prefix and fixed
    // targets. Exemplar targets always come from the upright training set.
    RunData prepare(const train::TrainConfig& config);

private:
    std::filesystem::path dir_;
    bool verify_;
    std::map<data::Split, data::LabeledDataset> splits_;
};

struct RunResult {
    std::string variant;
    std::uint64_t seed = 0;
    std::string config_hash;
    train::MetricsReport metrics;
    std::vector<train::EpochRecord> history;
    bool reused = false;
};

struct RunOptions {
    std::filesystem::path out_dir;
    bool force = false;
    std::vector<std::string> only; // restrict to these variant names when non-empty
    bool exports = true;           // scatter, decoder grid and confusion next to each run
    Logger log;
};

// Trains (or resumes from run_dir/checkpoint.bvae), evaluates and writes
// config.json, history.csv, metrics.json and the exports. A finished run
// with the same config hash is reused; a different config in the same
// directory is refused unless `force` is set.
RunResult run_single(const std::string& variant, const train::TrainConfig& config, DataCache& data,
                     const std::filesystem::path& run_dir, const RunOptions& options);

struct SummaryRow {
    std::string variant;
    std::string label;
    std::string config_hash; // hash of the repeat-0 config
    std::vector<std::uint64_t> seeds;
    double nmi = 0.0;
    double acc = 0.0;
    double ari = 0.0;
    double probe_accuracy = 0.0;
};

std::vector<SummaryRow> aggregate(const ExperimentSpec& spec, const std::vector<RunResult>& results);
void write_summary_csv(const std::filesystem::path& path, const ExperimentSpec& spec,
                       const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

// Runs every variant and repeat under out_dir/<spec name>/<variant>/seed_<s>
// and writes out_dir/<spec name>/summary.csv.
std::vector<RunResult> run_experiment(const ExperimentSpec& spec, DataCache& data, const RunOptions& options);

RunResult read_run_result(const std::filesystem::path& run_dir);

} // namespace bvae::experiments
