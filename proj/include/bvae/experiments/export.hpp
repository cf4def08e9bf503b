#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bvae/data/dataset.hpp"
#include "bvae/metrics/scores.hpp"
#include "bvae/vae/model.hpp"

namespace bvae::experiments {

// Provenance written as `# key=value` comment lines at the top of CSV
// exports and in PGM headers.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
};

std::string_view code_version();

// Binary 8-bit PGM (P5); each comment becomes a `# ...` header line.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels, const std::vector<std::string>& comments = {});

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<std::string> comments;
};
GrayImage read_pgm(const std::filesystem::path& path);

// Values clamped to [0, 1] and scaled to 0..255 with rounding.
std::uint8_t to_gray(float v);

// Columns z1, z2, label; one row per sample. For k > 2 the first two latent
// dimensions are written and the header says so.
void export_latent_scatter(const vae::VaeModel<float>& model, const data::LabeledDataset& ds,
                           const std::filesystem::path& path, const Provenance& provenance);

// 30 x 30 decoded patches over [-3, 3]^2 tiled into one 840 x 840 image;
// the top-left patch decodes z = (-3, +3). Requires k = 2.
void export_decoder_grid(const vae::VaeModel<float>& model, const std::filesystem::path& path,
                         const Provenance& provenance);

// 10 x 10 counts (rows true class, columns predicted) as CSV, and a PGM
// with 28-pixel cells shaded by count relative to the largest entry.
void export_confusion(const metrics::ConfusionMatrix& confusion, const std::filesystem::path& csv_path,
                      const std::filesystem::path& pgm_path, const Provenance& provenance);

// Decodes a single latent point into a 28 x 28 PGM.
void export_reconstruction(const vae::VaeModel<float>& model, std::span<const float> z,
                           const std::filesystem::path& path, const Provenance& provenance);

} // namespace bvae::experiments
