// Acceptance checks: one PASS/FAIL line per criterion.
//
// Property criteria always run. Desk-scale criteria read finished runs from
// the results directory (first argument, else BVAE_RESULTS_DIR, else "runs")
// and only count runs whose config is exactly a full-scale preset config.
//
// Exit status: 1 if any evaluated criterion fails, 77 if everything evaluated
// passed but some desk-scale criteria had no runs to judge, 0 otherwise.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bvae/experiments/presets.hpp"
#include "bvae/experiments/runner.hpp"
#include "bvae/experiments/selftest.hpp"
#include "bvae/metrics/kmeans.hpp"
#include "bvae/nn/ops.hpp"
#include "bvae/train/checkpoint.hpp"
#include "bvae/train/trainer.hpp"
#include "bvae/vae/loss.hpp"
#include "support/kl_oracle.hpp"
#include "support/reference_kernels.hpp"
#include "support/synthetic.hpp"

using namespace bvae;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, not_run };

struct Tally {
    int failed = 0;
    int not_run = 0;

    void report(const std::string& name, Outcome o, const std::string& detail) {
        const char* tag = o == Outcome::pass ? "PASS" : "FAIL";
        if (o == Outcome::fail) ++failed;
        if (o == Outcome::not_run) ++not_run;
        std::printf("%s %s: %s%s\n", tag, name.c_str(), o == Outcome::not_run ? "not run; " : "", detail.c_str());
        std::fflush(stdout);
    }
    void report(const std::string& name, bool ok, const std::string& detail) {
        report(name, ok ? Outcome::pass : Outcome::fail, detail);
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---- property tier ----

void gradient_checks(Tally& t) {
    bool ok = true;
    std::string worst;
    for (const auto& line : experiments::run_grad_checks(1)) {
        if (!line.pass) {
            ok = false;
            worst += line.name + " (" + line.detail + "); ";
        }
    }
    t.report("gradient checks (layers 1e-4, end-to-end 1e-3, float64)", ok, ok ? "all layers and both objectives" : worst);
}

void kl_oracle(Tally& t) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> mu_d(-2.0, 2.0), lv_d(-3.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> mu(2), lv(2);
        for (std::size_t j = 0; j < 2; ++j) {
            mu[j] = mu_d(rng);
            lv[j] = lv_d(rng);
        }
        const double closed = vae::kl_divergence(TensorD({1, 2}, mu), TensorD({1, 2}, lv));
        const double mc = oracle::monte_carlo_kl(mu, lv, 1'000'000, 100 + trial);
        worst = std::max(worst, std::abs(closed - mc) / std::abs(closed));
    }
    t.report("closed-form KL vs Monte-Carlo (20 draws, 1e6 samples, 1%)", worst <= 0.01,
             fmt("max relative error %.3g", worst));
}

void metric_oracles(Tally& t) {
    bool ok = true;
    std::string detail;
    for (const auto& line : experiments::run_metric_selftests(3)) {
        ok = ok && line.pass;
        if (!line.pass) detail += line.name + " (" + line.detail + "); ";
    }
    t.report("metric oracles (Hungarian, pair-counting ARI, NMI edges, relabeling)", ok,
             ok ? "all oracle comparisons exact to 1e-12" : detail);
}

vae::VaeArchitecture reduced_arch() {
    vae::VaeArchitecture a;
    a.conv1_filters = 4;
    a.conv2_filters = 8;
    a.hidden_units = 8;
    return a;
}

train::TrainConfig reduced_config() {
    train::TrainConfig c;
    c.epochs = 3;
    c.batch_size = 64;
    c.seed = 11;
    return c;
}

std::vector<float> flat_values(const vae::VaeModel<float>& m) {
    std::vector<float> out;
    for (const auto* p : m.parameters()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
    return out;
}

void structural_invariants(Tally& t) {
    std::string detail;
    bool ok = true;

    // k-means: WCSS never rises across Lloyd iterations.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TensorD pts({600, 2});
        for (std::size_t i = 0; i < 600; ++i) {
            pts[2 * i] = 3.0 * static_cast<double>(i % 7) + n(rng);
            pts[2 * i + 1] = n(rng);
        }
        const auto p = metrics::kmeans(pts, {.clusters = 10, .restarts = 3, .seed = seed});
        for (std::size_t i = 1; i < p.wcss_history.size(); ++i) {
            if (p.wcss_history[i] > p.wcss_history[i - 1] * (1 + 1e-12)) {
                ok = false;
                detail += "k-means WCSS rose; ";
            }
        }
    }

    // <conv(x), y> == <x, conv^T(y)>
    double adj = 0.0;
    unsigned s = 7;
    for (auto [hw, c, f, stride] : std::vector<std::array<std::size_t, 4>>{{28, 1, 32, 2}, {14, 32, 64, 2}, {7, 3, 5, 1}}) {
        const TensorD x = oracle::random_tensor({2, hw, hw, c}, s++);
        const TensorD k = oracle::random_tensor({3, 3, c, f}, s++);
        const TensorD cx = nn::conv2d_forward(x, k, TensorD(), stride);
        const TensorD y = oracle::random_tensor(cx.shape(), s++);
        const TensorD cty = nn::conv2d_transpose_forward(y, k, TensorD(), stride);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * cty[i];
        adj = std::max(adj, std::abs(lhs - rhs) / std::abs(lhs));
    }
    if (adj > 1e-10) {
        ok = false;
        detail += fmt("adjoint identity off by %.3g; ", adj);
    }

    // Resume from an epoch-1 checkpoint reproduces the uninterrupted run.
    const data::LabeledDataset ds = oracle::synthetic_digits(300, 5);
    train::TrainConfig rc = reduced_config();
    rc.branch = branches::BranchConfig{.kind = branches::BranchKind::mlp};
    rc.lambda = 2;
    train::Trainer whole(rc, ds, nullptr, reduced_arch());
    whole.run();
    train::Trainer first(rc, ds, nullptr, reduced_arch());
    first.run_epoch();
    const auto bytes = train::encode_checkpoint(first.checkpoint());
    train::Trainer resumed = train::Trainer::resume(train::decode_checkpoint(bytes), ds);
    resumed.run();
    if (train::encode_checkpoint(resumed.checkpoint()) != train::encode_checkpoint(whole.checkpoint())) {
        ok = false;
        detail += "resumed checkpoint differs; ";
    }

    // lambda = 0 with a branch attached trains exactly the branch-free VAE.
    train::TrainConfig plain = reduced_config();
    train::TrainConfig zero = plain;
    zero.branch = branches::BranchConfig{.kind = branches::BranchKind::mlp};
    train::Trainer a(plain, ds, nullptr, reduced_arch());
    train::Trainer b(zero, ds, nullptr, reduced_arch());
    a.run();
    b.run();
    bool same = flat_values(a.model()) == flat_values(b.model());
    for (std::size_t e = 0; e < a.history().size(); ++e) {
        same = same && a.history()[e].loss.total == b.history()[e].loss.total;
    }
    if (!same) {
        ok = false;
        detail += "lambda=0 run diverges from plain VAE; ";
    }
    t.report("k-means WCSS monotone, conv adjoint 1e-10, bit-exact resume, bit-exact lambda=0", ok,
             ok ? fmt("adjoint max relative error %.3g", adj) : detail);
}

// ---- desk tier ----

struct VariantRuns {
    std::vector<experiments::RunResult> runs;
    double probe = 0, nmi = 0, acc = 0, ari = 0;
    metrics::ConfusionMatrix confusion{};
    std::size_t n() const { return runs.size(); }
};

class Results {
public:
    explicit Results(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    // Finished runs of `variant` whose config equals the full-scale preset config for their seed.
    const VariantRuns& get(const std::string& spec_name, const std::string& variant) {
        const std::string key = spec_name + "/" + variant;
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        VariantRuns v;
        const fs::path dir = root_ / spec_name / variant;
        std::error_code ec;
        if (fs::is_directory(dir, ec)) {
            std::vector<fs::path> seeds;
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.is_directory() && fs::exists(e.path() / "metrics.json")) seeds.push_back(e.path());
            }
            std::sort(seeds.begin(), seeds.end());
            for (const fs::path& s : seeds) {
                try {
                    experiments::RunResult r = experiments::read_run_result(s);
                    if (r.config_hash == preset_hash(spec_name, variant, r.seed)) v.runs.push_back(std::move(r));
                } catch (const std::exception& ex) {
                    std::fprintf(stderr, "skipping %s: %s\n", s.string().c_str(), ex.what());
                }
            }
        }
        for (const auto& r : v.runs) {
            const double w = 1.0 / static_cast<double>(v.runs.size());
            v.probe += w * r.metrics.probe_accuracy;
            v.nmi += w * r.metrics.nmi;
            v.acc += w * r.metrics.acc;
            v.ari += w * r.metrics.ari;
            for (std::size_t i = 0; i < 10; ++i)
                for (std::size_t j = 0; j < 10; ++j) v.confusion[i][j] += r.metrics.confusion[i][j];
        }
        return cache_.emplace(key, std::move(v)).first->second;
    }

private:
    static std::string preset_hash(const std::string& spec_name, const std::string& variant, std::uint64_t seed) {
        for (const auto& v : experiments::make_preset(spec_name, seed, false).variants) {
            if (v.name == variant) return train::config_hash(v.config);
        }
        return {};
    }

    fs::path root_;
    std::map<std::string, VariantRuns> cache_;
};

// Reports not_run unless every listed variant has at least one run.
bool have(Tally& t, const std::string& name, Results& res,
          const std::vector<std::pair<std::string, std::string>>& needed) {
    std::string missing;
    for (const auto& [spec, variant] : needed) {
        if (res.get(spec, variant).n() == 0) missing += spec + "/" + variant + " ";
    }
    if (missing.empty()) return true;
    t.report(name, Outcome::not_run, "no full-scale runs for " + missing + "under " + res.root().string());
    return false;
}

std::string seeds_note(const VariantRuns& v) {
    return " [" + std::to_string(v.n()) + (v.n() == 1 ? " seed]" : " seeds]");
}

void desk_tier(Tally& t, Results& res) {
    {
        const std::string name = "table1 VAE probe accuracy 0.672 +/- 0.08";
        if (have(t, name, res, {{"table1", "vae"}})) {
            const auto& v = res.get("table1", "vae");
            t.report(name, std::abs(v.probe - 0.672) <= 0.08, fmt("probe %.4f", v.probe) + seeds_note(v));
        }
    }
    {
        const std::string name = "table1 BVAE lambda=100 probe >= 0.94 and NMI/ACC/ARI >= VAE + 0.15";
        if (have(t, name, res, {{"table1", "vae"}, {"table1", "bvae_l100"}})) {
            const auto& b = res.get("table1", "bvae_l100");
            const auto& v = res.get("table1", "vae");
            const bool ok = b.probe >= 0.94 && b.nmi - v.nmi >= 0.15 && b.acc - v.acc >= 0.15 && b.ari - v.ari >= 0.15;
            t.report(name, ok,
                     fmt("probe %.4f, deltas NMI %+.4f ACC %+.4f ARI %+.4f", b.probe, b.nmi - v.nmi, b.acc - v.acc,
                         b.ari - v.ari) +
                         seeds_note(b));
        }
    }
    {
        const std::string name = "table1 NMI(alpha=0.01) - NMI(lambda=100) >= 0.05";
        if (have(t, name, res, {{"table1", "bvae_a001"}, {"table1", "bvae_l100"}})) {
            const auto& a = res.get("table1", "bvae_a001");
            const auto& b = res.get("table1", "bvae_l100");
            t.report(name, a.nmi - b.nmi >= 0.05, fmt("NMI %.4f vs %.4f", a.nmi, b.nmi) + seeds_note(a));
        }
    }
    {
        const std::string name = "fixed exemplar output probe >= 0.93; synthetic targets >= 0.92 each";
        if (have(t, name, res,
                 {{"table1", "vae_fixed"}, {"table2", "fixed_gaussian"}, {"table2", "fixed_square"},
                  {"table2", "fixed_wavelet"}})) {
            const auto& e = res.get("table1", "vae_fixed");
            const auto& g = res.get("table2", "fixed_gaussian");
            const auto& s = res.get("table2", "fixed_square");
            const auto& w = res.get("table2", "fixed_wavelet");
            const bool ok = e.probe >= 0.93 && g.probe >= 0.92 && s.probe >= 0.92 && w.probe >= 0.92;
            t.report(name, ok,
                     fmt("exemplar %.4f gaussian %.4f square %.4f wavelet %.4f", e.probe, g.probe, s.probe, w.probe) +
                         seeds_note(e));
        }
    }
    {
        const std::string name = "table3 VAE 0.31 +/- 0.08, BVAE >= 0.75, {6,9}+{3,8} >= 50% of off-diagonal";
        if (have(t, name, res, {{"table3", "vae"}, {"table3", "bvae_l100"}})) {
            const auto& v = res.get("table3", "vae");
            const auto& b = res.get("table3", "bvae_l100");
            double off = 0, pairs = 0;
            for (std::size_t i = 0; i < 10; ++i) {
                for (std::size_t j = 0; j < 10; ++j) {
                    if (i == j) continue;
                    off += static_cast<double>(b.confusion[i][j]);
                    const bool six_nine = (i == 6 && j == 9) || (i == 9 && j == 6);
                    const bool three_eight = (i == 3 && j == 8) || (i == 8 && j == 3);
                    if (six_nine || three_eight) pairs += static_cast<double>(b.confusion[i][j]);
                }
            }
            const double share = off > 0 ? pairs / off : 0.0;
            const bool ok = std::abs(v.probe - 0.31) <= 0.08 && b.probe >= 0.75 && share >= 0.5;
            t.report(name, ok, fmt("VAE %.4f BVAE %.4f pair share %.3f", v.probe, b.probe, share) + seeds_note(b));
        }
    }
    {
        const std::string name = "table4 probe non-decreasing in k (0.02 slack); BVAE k=2 > VAE k=10 - 0.02";
        std::vector<std::pair<std::string, std::string>> needed;
        for (const char* f : {"vae", "vae_fixed", "bvae"})
            for (int k : {2, 3, 5, 10}) needed.emplace_back("table4", std::string(f) + "_k" + std::to_string(k));
        if (have(t, name, res, needed)) {
            bool ok = true;
            std::string detail;
            for (const char* f : {"vae", "vae_fixed", "bvae"}) {
                detail += std::string(f) + ":";
                double prev = -1;
                for (int k : {2, 3, 5, 10}) {
                    const double p = res.get("table4", std::string(f) + "_k" + std::to_string(k)).probe;
                    detail += fmt(" %.3f", p);
                    if (prev >= 0 && p < prev - 0.02) ok = false;
                    prev = p;
                }
                detail += "; ";
            }
            const double b2 = res.get("table4", "bvae_k2").probe;
            const double v10 = res.get("table4", "vae_k10").probe;
            ok = ok && b2 > v10 - 0.02;
            t.report(name, ok, detail + fmt("BVAE k=2 %.4f vs VAE k=10 %.4f", b2, v10));
        }
    }
    {
        const std::string name = "kNN branch (n=40, lambda=10) weight preset improves probe by >= 0.05";
        if (have(t, name, res, {{"knn_weights", "knn_uniform"}, {"knn_weights", "knn_knn10"}})) {
            const auto& u = res.get("knn_weights", "knn_uniform");
            const auto& w = res.get("knn_weights", "knn_knn10");
            t.report(name, w.probe - u.probe >= 0.05, fmt("uniform %.4f weighted %.4f", u.probe, w.probe) + seeds_note(w));
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    fs::path root = "runs";
    if (argc > 1) {
        root = argv[1];
    } else if (const char* env = std::getenv("BVAE_RESULTS_DIR"); env != nullptr && *env != '\0') {
        root = env;
    }
    Tally t;
    gradient_checks(t);
    kl_oracle(t);
    metric_oracles(t);
    structural_invariants(t);
    Results res(root);
    desk_tier(t, res);
    std::printf("%d failed, %d not run\n", t.failed, t.not_run);
    if (t.failed > 0) return 1;
    return t.not_run > 0 ? 77 : 0;
}
