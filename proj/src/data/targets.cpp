#include "bvae/data/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bvae::data {

std::string_view to_string(TargetKind kind) {
    switch (kind) {
    case TargetKind::exemplar: return "exemplar";
    case TargetKind::gaussian: return "gaussian";
    case TargetKind::square: return "square";
    case TargetKind::wavelet: return "wavelet";
    }
    return "?";
}

TargetKind target_kind_from_string(std::string_view name) {
    for (TargetKind k : {TargetKind::exemplar, TargetKind::gaussian, TargetKind::square, TargetKind::wavelet}) {
        if (name == to_string(k)) return k;
    }
    throw ConfigError("unknown target kind '" + std::string(name) +
                      "' (expected exemplar, gaussian, square or wavelet)");
}

std::array<std::pair<int, int>, num_classes> class_centers() {
    const double mid = (static_cast<double>(image_side) - 1.0) / 2.0;
    std::array<std::pair<int, int>, num_classes> centers{};
    for (std::size_t d = 0; d < num_classes; ++d) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(d) / num_classes;
        centers[d] = {static_cast<int>(std::lround(mid - target_center_radius * std::cos(a))),
                      static_cast<int>(std::lround(mid + target_center_radius * std::sin(a)))};
    }
    return centers;
}

namespace {

template <typename F>
void paint(std::span<float> image, F value_at) {
    for (int r = 0; r < static_cast<int>(image_side); ++r) {
        for (int c = 0; c < static_cast<int>(image_side); ++c) {
            image[static_cast<std::size_t>(r) * image_side + static_cast<std::size_t>(c)] =
                static_cast<float>(value_at(r, c));
        }
    }
}

// Half-open window [center - side/2, center + side/2) along one axis.
bool inside(int v, int center, int side) { return v >= center - side / 2 && v < center + side / 2; }

} // namespace

TargetSet make_target_set(TargetKind kind, const LabeledDataset& train, std::uint64_t /*seed*/) {
    TargetSet set;
    set.kind = kind;
    set.targets = Tensor({num_classes, image_side, image_side, 1});
    set.source_index.fill(0);
    const auto centers = class_centers();

    for (std::size_t d = 0; d < num_classes; ++d) {
        std::span<float> img = set.targets.row(d);
        const auto [cr, cc] = centers[d];
        switch (kind) {
        case TargetKind::exemplar: {
            const auto it = std::find(train.labels.begin(), train.labels.end(), static_cast<std::uint8_t>(d));
            if (it == train.labels.end()) {
                throw ValidationError("exemplar targets: class " + std::to_string(d) + " absent from training data");
            }
            const auto idx = static_cast<std::size_t>(it - train.labels.begin());
            set.source_index[d] = idx;
            std::ranges::copy(train.image(idx), img.begin());
            break;
        }
        case TargetKind::gaussian:
            paint(img, [&](int r, int c) {
                const double d2 = static_cast<double>((r - cr) * (r - cr) + (c - cc) * (c - cc));
                return std::exp(-d2 / (2.0 * gaussian_sigma * gaussian_sigma));
            });
            break;
        case TargetKind::square:
            paint(img, [&](int r, int c) {
                return inside(r, cr, square_side) && inside(c, cc, square_side) ? 1.0 : 0.0;
            });
            break;
        case TargetKind::wavelet:
            paint(img, [&](int r, int c) {
                if (!inside(r, cr, wavelet_side) || !inside(c, cc, wavelet_side)) return 0.0;
                const double hr = r < cr ? 1.0 : -1.0;
                const double hc = c < cc ? 1.0 : -1.0;
                return 0.5 + 0.5 * hr * hc;
            });
            break;
        }
    }
    const auto [lo, hi] = std::ranges::minmax(set.targets.values());
    set.min_value = lo;
    set.max_value = hi;
    return set;
}

} // namespace bvae::data
