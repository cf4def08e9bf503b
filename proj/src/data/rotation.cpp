#include "bvae/data/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bvae/random.hpp"

namespace bvae::data {

namespace {

// Snap coordinates that are integers up to rounding so that quarter turns
// map the pixel grid onto itself exactly.
double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

} // namespace

std::vector<float> rotate_image(std::span<const float> image, double angle, std::size_t side) {
    if (image.size() != side * side) {
        throw DimensionError("rotate_image: expected " + std::to_string(side * side) + " pixels, got " +
                             std::to_string(image.size()));
    }
    const double center = (static_cast<double>(side) - 1.0) / 2.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const auto n = static_cast<long>(side);
    auto at = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= n || x >= n) return 0.0;
        return image[static_cast<std::size_t>(y * n + x)];
    };

    std::vector<float> out(image.size());
    for (long r = 0; r < n; ++r) {
        for (long col = 0; col < n; ++col) {
            const double dy = static_cast<double>(r) - center;
            const double dx = static_cast<double>(col) - center;
            // Counter-clockwise as displayed (rows grow downward).
            const double sx = snap(c * dx - s * dy + center);
            const double sy = snap(s * dx + c * dy + center);
            const double x0 = std::floor(sx);
            const double y0 = std::floor(sy);
            const double fx = sx - x0;
            const double fy = sy - y0;
            const auto xi = static_cast<long>(x0);
            const auto yi = static_cast<long>(y0);
            const double top = (1.0 - fx) * at(yi, xi) + fx * at(yi, xi + 1);
            const double bottom = (1.0 - fx) * at(yi + 1, xi) + fx * at(yi + 1, xi + 1);
            const double v = (1.0 - fy) * top + fy * bottom;
            out[static_cast<std::size_t>(r * n + col)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

std::vector<double> rotation_angles(std::size_t count, std::uint64_t seed, Split split) {
    std::mt19937_64 rng = make_rng(seed, Stream::rotation, split == Split::train ? 0 : 1);
    std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
    std::vector<double> angles(count);
    for (double& a : angles) a = dist(rng);
    return angles;
}

LabeledDataset make_rotated_dataset(const LabeledDataset& ds, std::uint64_t seed) {
    const std::vector<double> angles = rotation_angles(ds.size(), seed, ds.split);
    LabeledDataset out;
    out.split = ds.split;
    out.labels = ds.labels;
    out.kind = ds.kind + "_rotated";
    out.seed = seed;
    out.images = Tensor(ds.images.shape());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::vector<float> rotated = rotate_image(ds.image(i), angles[i]);
        std::copy(rotated.begin(), rotated.end(), out.images.row(i).begin());
    }
    return out;
}

} // namespace bvae::data
