#include "bvae/metrics/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace bvae::metrics {

std::vector<std::size_t> hungarian(const TensorD& cost) {
    if (cost.rank() != 2 || cost.extent(0) != cost.extent(1)) {
        throw DimensionError("hungarian needs a square cost matrix, got " + shape_string(cost.shape()));
    }
    if (!cost.all_finite()) throw ValidationError("hungarian: cost entries must be finite");
    // Shortest augmenting path with row/column potentials; 1-based internally.
    const std::size_t n = cost.extent(0);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[col0] = true;
            const std::size_t r = match[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= n; ++c) {
                if (used[c]) continue;
                const double reduced = cost.at(r - 1, c - 1) - u[r] - v[c];
                if (reduced < minv[c]) {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if (minv[c] < delta) {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for (std::size_t c = 0; c <= n; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<std::size_t> result(n);
    for (std::size_t c = 1; c <= n; ++c) result[match[c] - 1] = c - 1;
    return result;
}

namespace {

std::vector<std::size_t> compact(std::span<const int> ids, std::size_t& count) {
    std::map<int, std::size_t> remap;
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(remap.try_emplace(id, remap.size()).first->second);
    count = remap.size();
    return out;
}

void check_lengths(std::span<const int> a, std::span<const int> b, const char* what) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(what) + ": " + std::to_string(a.size()) + " labels vs " +
                             std::to_string(b.size()) + " cluster ids");
    }
    if (a.empty()) throw ValidationError(std::string(what) + ": empty input");
}

double entropy(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts) {
        if (c > 0) h -= (c / n) * std::log(c / n);
    }
    return h;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

} // namespace

std::vector<std::vector<std::size_t>> contingency(std::span<const int> a, std::span<const int> b) {
    check_lengths(a, b, "contingency");
    std::size_t na = 0, nb = 0;
    const auto ca = compact(a, na);
    const auto cb = compact(b, nb);
    std::vector<std::vector<std::size_t>> table(na, std::vector<std::size_t>(nb, 0));
    for (std::size_t i = 0; i < ca.size(); ++i) ++table[ca[i]][cb[i]];
    return table;
}

double clustering_accuracy(std::span<const int> labels, std::span<const int> clusters) {
    const auto table = contingency(labels, clusters);
    const std::size_t k = std::max(table.size(), table[0].size());
    TensorD cost({k, k});
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t c = 0; c < table[r].size(); ++c) cost.at(c, r) = -static_cast<double>(table[r][c]);
    }
    const auto mapping = hungarian(cost); // cluster -> label
    double hits = 0.0;
    for (std::size_t c = 0; c < k; ++c) hits -= cost.at(c, mapping[c]);
    return hits / static_cast<double>(labels.size());
}

double normalized_mutual_information(std::span<const int> labels, std::span<const int> clusters) {
    const auto table = contingency(labels, clusters);
    const double n = static_cast<double>(labels.size());
    std::vector<double> rows(table.size(), 0.0), cols(table[0].size(), 0.0);
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            rows[r] += static_cast<double>(table[r][c]);
            cols[c] += static_cast<double>(table[r][c]);
        }
    }
    const double h_labels = entropy(rows, n);
    const double h_clusters = entropy(cols, n);
    // Both partitions constant: they are identical.
    if (rows.size() == 1 && cols.size() == 1) return 1.0;
    const double denom = std::max(h_labels, h_clusters);
    double mi = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const double nij = static_cast<double>(table[r][c]);
            if (nij > 0) mi += (nij / n) * std::log(n * nij / (rows[r] * cols[c]));
        }
    }
    return std::clamp(mi / denom, 0.0, 1.0);
}

AriResult adjusted_rand_index(std::span<const int> labels, std::span<const int> clusters) {
    if (labels.size() < 2) throw ValidationError("adjusted_rand_index needs at least two points");
    const auto table = contingency(labels, clusters);
    const double n = static_cast<double>(labels.size());
    std::vector<double> rows(table.size(), 0.0), cols(table[0].size(), 0.0);
    double sum_cells = 0.0;
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const double nij = static_cast<double>(table[r][c]);
            rows[r] += nij;
            cols[c] += nij;
            sum_cells += choose2(nij);
        }
    }
    double sum_rows = 0.0, sum_cols = 0.0;
    for (double a : rows) sum_rows += choose2(a);
    for (double b : cols) sum_cols += choose2(b);
    const double total = choose2(n);

    AriResult out;
    out.total_pairs = static_cast<std::uint64_t>(total);
    out.same_same = static_cast<std::uint64_t>(sum_cells);
    out.different_different = static_cast<std::uint64_t>(total - sum_rows - sum_cols + sum_cells);
    out.rand_index = static_cast<double>(out.same_same + out.different_different) / total;

    const double expected = sum_rows * sum_cols / total;
    const double maximum = 0.5 * (sum_rows + sum_cols);
    // Both partitions trivial (all one cluster, or all singletons) and thus identical.
    out.ari = maximum == expected ? 1.0 : (sum_cells - expected) / (maximum - expected);
    return out;
}

ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted) {
    if (truth.size() != predicted.size()) throw DimensionError("confusion_matrix: length mismatch");
    ConfusionMatrix m{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= 10 || predicted[i] >= 10) {
            throw ValidationError("confusion_matrix: label out of 0..9 at index " + std::to_string(i));
        }
        ++m[truth[i]][predicted[i]];
    }
    return m;
}

double confusion_accuracy(const ConfusionMatrix& m) {
    std::size_t trace = 0, total = 0;
    for (std::size_t r = 0; r < 10; ++r) {
        trace += m[r][r];
        for (std::size_t c = 0; c < 10; ++c) total += m[r][c];
    }
    return total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(total);
}

std::vector<int> to_ints(std::span<const std::uint8_t> labels) { return {labels.begin(), labels.end()}; }

} // namespace bvae::metrics
