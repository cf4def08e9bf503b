#include "bvae/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "bvae/branches/forest.hpp"
#include "bvae/branches/knn.hpp"
#include "bvae/data/batches.hpp"
#include "bvae/hash.hpp"
#include "bvae/random.hpp"
#include "bvae/train/checkpoint.hpp"

namespace bvae::train {

namespace {

vae::VaeArchitecture resolve_architecture(const TrainConfig& c, std::optional<vae::VaeArchitecture> arch) {
    vae::VaeArchitecture a = arch.value_or(vae::VaeArchitecture{});
    a.latent_dim = c.latent_dim;
    a.output = output_activation(c.recon_mode);
    return a;
}

void check_batches(const TrainConfig& c, std::size_t n) {
    if (n == 0) throw ConfigError("training set is empty");
    if (!c.branch || branches::training_kind(c.branch->kind) != branches::BranchKind::soft_knn) return;
    const std::size_t k = c.branch->neighbors;
    const std::size_t tail = n % c.batch_size;
    const std::size_t smallest = tail == 0 ? std::min(n, c.batch_size) : tail;
    if (smallest <= k) {
        throw ConfigError("soft kNN branch with " + std::to_string(k) + " neighbours needs every batch to hold more than " +
                          std::to_string(k) + " samples; the smallest batch has " + std::to_string(smallest) +
                          " (training size " + std::to_string(n) + ", batch size " + std::to_string(c.batch_size) + ")");
    }
}

void accumulate(vae::LossBreakdown& sum, const vae::LossBreakdown& x, double w) {
    sum.recon += w * x.recon;
    sum.kl += w * x.kl;
    sum.branch += w * x.branch;
    sum.total += w * x.total;
}

} // namespace

Tensor resolve_target(TargetMode mode, const Tensor& images, std::span<const std::uint8_t> labels,
                      const data::TargetSet* targets) {
    if (mode == TargetMode::self) return images;
    if (targets == nullptr) throw ConfigError("fixed target mode needs a target set");
    if (labels.size() != images.extent(0)) throw DimensionError("resolve_target: one label per image required");
    const std::size_t pixels = images.size() / images.extent(0);
    if (targets->targets.size() / targets->targets.extent(0) != pixels) {
        throw DimensionError("resolve_target: target images have a different size than the inputs");
    }
    Tensor out(images.shape());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= targets->targets.extent(0)) throw ValidationError("resolve_target: label out of range");
        const auto src = targets->targets.row(labels[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::string dataset_fingerprint(const data::LabeledDataset& ds) {
    std::vector<unsigned char> bytes(ds.labels.begin(), ds.labels.end());
    const auto pixels = ds.images.values();
    const std::size_t offset = bytes.size();
    bytes.resize(offset + pixels.size() * sizeof(float));
    std::memcpy(bytes.data() + offset, pixels.data(), pixels.size() * sizeof(float));
    return sha256_hex(bytes);
}

Trainer::Trainer(TrainConfig config, const data::LabeledDataset& train, const data::TargetSet* targets,
                 std::optional<vae::VaeArchitecture> arch)
    : config_(normalized(std::move(config))),
      train_(&train),
      targets_(targets),
      model_(resolve_architecture(config_, arch)) {
    data::validate(train);
    check_batches(config_, train.size());
    if (config_.target_mode == TargetMode::fixed && targets_ == nullptr) {
        throw ConfigError("fixed target mode (" + std::string(data::to_string(config_.target_kind)) +
                          ") needs a target set");
    }
    auto init_rng = make_rng(config_.seed, Stream::init);
    model_.initialize(init_rng);
    if (config_.branch) {
        branch_ = std::make_unique<branches::Branch<float>>(*config_.branch, config_.latent_dim);
        auto branch_rng = make_rng(config_.seed, Stream::branch_init);
        branch_->initialize(branch_rng);
    }
    auto params = all_parameters();
    adam_ = nn::make_adam_state<float>(params);
    fingerprint_ = dataset_fingerprint(train);
}

std::vector<nn::Parameter<float>*> Trainer::all_parameters() {
    auto params = model_.parameters();
    if (branch_) {
        for (auto* p : branch_->parameters()) params.push_back(p);
    }
    return params;
}

EpochRecord Trainer::run_epoch() {
    const data::LabeledDataset& ds = *train_;
    data::BatchIterator batches(ds, config_.batch_size, config_.seed, epoch_, config_.class_weights);
    auto eps_rng = make_rng(config_.seed, Stream::epsilon, epoch_);
    const vae::StepSettings settings{config_.alpha, config_.lambda, config_.recon_mode};
    auto params = all_parameters();

    EpochRecord record;
    record.epoch = epoch_;
    std::size_t correct = 0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.batch_count(); ++b) {
        const data::Batch batch = batches.batch(b);
        const std::size_t n = batch.labels.size();
        const Tensor target = resolve_target(config_.target_mode, batch.images, batch.labels, targets_);
        const Tensor eps = vae::standard_normal<float>({n, config_.latent_dim}, eps_rng);

        model_.zero_grad();
        if (branch_) branch_->zero_grad();
        vae::BranchCallback<float> callback;
        if (branch_) {
            callback = [&](const Tensor& z, float scale) {
                branches::BranchStep<float> step = branch_->train_step(z, batch.labels, batch.weights, scale);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto row = step.probs.row(i);
                    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
                    correct += static_cast<std::size_t>(best) == batch.labels[i];
                }
                seen += n;
                return vae::BranchTerm<float>{step.loss, std::move(step.grad_z)};
            };
        }
        const vae::StepResult<float> result = vae::compute_loss_and_gradients(
            model_, batch.images, target, eps, std::span<const float>(batch.weights), settings,
            branch_ ? &callback : nullptr);
        const vae::LossBreakdown& l = result.loss;
        if (!std::isfinite(l.total) || !std::isfinite(l.recon) || !std::isfinite(l.kl) || !std::isfinite(l.branch)) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) + ", batch " + std::to_string(b) +
                               ": recon " + std::to_string(l.recon) + ", kl " + std::to_string(l.kl) + ", branch " +
                               std::to_string(l.branch) + ", total " + std::to_string(l.total));
        }
        nn::adam_step<float>(params, adam_);
        if (b == 0) record.first_batch = l;
        accumulate(record.loss, l, static_cast<double>(n));
        record.clamped_pixels += result.clamped_pixels;
    }
    const double total = static_cast<double>(ds.size());
    record.loss.recon /= total;
    record.loss.kl /= total;
    record.loss.branch /= total;
    record.loss.total /= total;
    if (seen > 0) record.branch_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    record.exact_accuracy = exact_diagnostic();
    ++epoch_;
    history_.push_back(record);
    return record;
}

std::optional<double> Trainer::exact_diagnostic() const {
    if (!config_.branch) return std::nullopt;
    const branches::BranchKind kind = config_.branch->kind;
    if (kind != branches::BranchKind::exact_knn && kind != branches::BranchKind::random_forest) return std::nullopt;
    const data::LabeledDataset subset = data::take_prefix(*train_, std::min(train_->size(), diagnostic_samples));
    const std::size_t n = subset.size();
    const std::size_t fit_n = n - n / 10;
    if (fit_n == 0 || fit_n == n) return std::nullopt;
    const Tensor codes = vae::encode_means(model_, subset.images);
    const std::size_t k = config_.latent_dim;
    Tensor fit_codes({fit_n, k}, std::vector<float>(codes.values().begin(), codes.values().begin() + fit_n * k));
    Tensor eval_codes({n - fit_n, k}, std::vector<float>(codes.values().begin() + fit_n * k, codes.values().end()));
    const std::span<const std::uint8_t> fit_labels(subset.labels.data(), fit_n);
    std::vector<std::uint8_t> predicted;
    if (kind == branches::BranchKind::exact_knn) {
        branches::KnnClassifier knn(std::min(config_.branch->neighbors, fit_n));
        knn.fit(fit_codes, fit_labels);
        predicted = knn.predict(eval_codes);
    } else {
        branches::RandomForest forest({config_.branch->n_estimators, config_.branch->max_depth, 2});
        forest.fit(fit_codes, fit_labels, derive_seed(config_.seed, Stream::forest, epoch_));
        predicted = forest.predict(eval_codes);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == subset.labels[fit_n + i];
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void Trainer::run(const std::function<void(const EpochRecord&)>& on_epoch) {
    while (!finished()) {
        const EpochRecord r = run_epoch();
        if (on_epoch) on_epoch(r);
    }
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.config = config_;
    c.architecture = model_.architecture();
    c.epoch = epoch_;
    c.history = history_;
    c.adam_config = adam_.config;
    c.adam_step = adam_.step;
    for (const auto* p : model_.parameters()) c.parameters.push_back({p->name, p->value});
    if (branch_) {
        for (const auto* p : branch_->parameters()) c.parameters.push_back({p->name, p->value});
        if (branch_->kind() == branches::BranchKind::class_mean) {
            c.centroids = branch_->centroids();
            c.centroid_seen = branch_->seen();
        }
    }
    c.first_moment = adam_.first_moment;
    c.second_moment = adam_.second_moment;
    c.train_fingerprint = fingerprint_;
    return c;
}

Trainer Trainer::resume(const Checkpoint& c, const data::LabeledDataset& train, const data::TargetSet* targets) {
    Trainer t(c.config, train, targets, c.architecture);
    if (t.fingerprint_ != c.train_fingerprint) {
        throw ConsistencyError("checkpoint was trained on a different training set (fingerprint " +
                               c.train_fingerprint.substr(0, 16) + ", got " + t.fingerprint_.substr(0, 16) + ")");
    }
    if (!(t.model_.architecture() == c.architecture)) throw ConsistencyError("checkpoint architecture mismatch");
    auto params = t.all_parameters();
    if (params.size() != c.parameters.size() || c.first_moment.size() != params.size() ||
        c.second_moment.size() != params.size()) {
        throw ConsistencyError("checkpoint holds " + std::to_string(c.parameters.size()) + " parameters, model has " +
                               std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const NamedTensor& src = c.parameters[i];
        if (src.name != params[i]->name || src.value.shape() != params[i]->value.shape() ||
            c.first_moment[i].shape() != src.value.shape() || c.second_moment[i].shape() != src.value.shape()) {
            throw ConsistencyError("checkpoint parameter '" + src.name + "' does not match model parameter '" +
                                   params[i]->name + "'");
        }
        params[i]->value = src.value;
    }
    t.adam_.config = c.adam_config;
    t.adam_.step = c.adam_step;
    t.adam_.first_moment = c.first_moment;
    t.adam_.second_moment = c.second_moment;
    if (c.centroids) {
        if (!t.branch_ || t.branch_->kind() != branches::BranchKind::class_mean) {
            throw ConsistencyError("checkpoint has centroids but the branch is not class_mean");
        }
        t.branch_->set_centroids(*c.centroids, c.centroid_seen);
    }
    t.epoch_ = c.epoch;
    t.history_ = c.history;
    return t;
}

} // namespace bvae::train
