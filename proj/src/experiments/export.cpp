#include "bvae/experiments/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bvae/binary_io.hpp"

#ifndef BVAE_VERSION_STRING
#define BVAE_VERSION_STRING "unknown"
#endif

namespace bvae::experiments {

namespace {

std::vector<std::string> provenance_lines(const Provenance& p) {
    return {"config_hash=" + p.config_hash, "seed=" + std::to_string(p.seed), "version=" + p.version};
}

std::ofstream open_text(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace

std::string_view code_version() { return BVAE_VERSION_STRING; }

std::uint8_t to_gray(float v) {
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels, const std::vector<std::string>& comments) {
    if (pixels.size() != width * height) throw DimensionError("write_pgm: pixel count does not match dimensions");
    std::string header = "P5\n";
    for (const std::string& c : comments) header += "# " + c + "\n";
    header += std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file_bytes(path.string(), bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file_bytes(path.string());
    GrayImage img;
    std::size_t pos = 0;
    auto line = [&]() {
        const std::size_t end = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), '\n') - bytes.begin();
        if (end >= bytes.size()) throw FormatError(path.string() + ": truncated PGM header");
        std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(end));
        pos = end + 1;
        return s;
    };
    if (line() != "P5") throw FormatError(path.string() + ": not a binary PGM");
    std::string s = line();
    while (s.starts_with("#")) {
        img.comments.push_back(s.size() > 2 ? s.substr(2) : "");
        s = line();
    }
    std::istringstream dims(s);
    if (!(dims >> img.width >> img.height)) throw FormatError(path.string() + ": bad PGM dimensions");
    if (line() != "255") throw FormatError(path.string() + ": only 8-bit PGM is supported");
    if (bytes.size() - pos != img.width * img.height) throw FormatError(path.string() + ": PGM pixel data size mismatch");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return img;
}

void export_latent_scatter(const vae::VaeModel<float>& model, const data::LabeledDataset& ds,
                           const std::filesystem::path& path, const Provenance& provenance) {
    const Tensor mu = vae::encode_means(model, ds.images);
    const std::size_t k = mu.extent(1);
    std::ofstream out = open_text(path);
    for (const std::string& l : provenance_lines(provenance)) out << "# " << l << "\n";
    out << "# latent_dim=" << k << (k > 2 ? " (first two dimensions exported)" : "") << "\n";
    out << "# split=" << data::to_string(ds.split) << " kind=" << ds.kind << "\n";
    out << (k == 1 ? "z1,label\n" : "z1,z2,label\n");
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(mu.at(i, 0)));
        out << buf;
        if (k > 1) {
            std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(mu.at(i, 1)));
            out << buf;
        }
        out << "," << static_cast<int>(ds.labels[i]) << "\n";
    }
    finish(out, path);
}

void export_decoder_grid(const vae::VaeModel<float>& model, const std::filesystem::path& path,
                         const Provenance& provenance) {
    constexpr std::size_t steps = 30;
    const Tensor grid = vae::decoder_grid(model, -3.0, 3.0, steps);
    const std::size_t side = model.architecture().image_side;
    const std::size_t width = steps * side;
    std::vector<std::uint8_t> pixels(width * width);
    for (std::size_t gi = 0; gi < steps; ++gi) {
        for (std::size_t gj = 0; gj < steps; ++gj) {
            const auto patch = grid.row(gi * steps + gj);
            for (std::size_t r = 0; r < side; ++r) {
                for (std::size_t c = 0; c < side; ++c) {
                    pixels[(gi * side + r) * width + gj * side + c] = to_gray(patch[r * side + c]);
                }
            }
        }
    }
    std::vector<std::string> comments = provenance_lines(provenance);
    comments.push_back("decoder grid 30x30 over [-3,3]^2; patch (row i, col j) decodes z1=-3+6j/29, z2=3-6i/29");
    comments.push_back("top-left patch z=(-3,+3)");
    write_pgm(path, width, width, pixels, comments);
}

void export_confusion(const metrics::ConfusionMatrix& confusion, const std::filesystem::path& csv_path,
                      const std::filesystem::path& pgm_path, const Provenance& provenance) {
    std::ofstream out = open_text(csv_path);
    for (const std::string& l : provenance_lines(provenance)) out << "# " << l << "\n";
    out << "# rows are true classes, columns predicted classes\n";
    out << "true";
    for (std::size_t j = 0; j < confusion.size(); ++j) out << "," << j;
    out << "\n";
    std::size_t largest = 1;
    for (std::size_t i = 0; i < confusion.size(); ++i) {
        out << i;
        for (std::size_t j = 0; j < confusion.size(); ++j) {
            out << "," << confusion[i][j];
            largest = std::max(largest, confusion[i][j]);
        }
        out << "\n";
    }
    finish(out, csv_path);

    constexpr std::size_t cell = 28;
    const std::size_t width = cell * confusion.size();
    std::vector<std::uint8_t> pixels(width * width);
    for (std::size_t i = 0; i < confusion.size(); ++i) {
        for (std::size_t j = 0; j < confusion.size(); ++j) {
            const auto v = to_gray(static_cast<float>(confusion[i][j]) / static_cast<float>(largest));
            for (std::size_t r = 0; r < cell; ++r) {
                for (std::size_t c = 0; c < cell; ++c) pixels[(i * cell + r) * width + j * cell + c] = v;
            }
        }
    }
    std::vector<std::string> comments = provenance_lines(provenance);
    comments.push_back("confusion matrix, 28-pixel cells, white = " + std::to_string(largest) + " counts");
    write_pgm(pgm_path, width, width, pixels, comments);
}

void export_reconstruction(const vae::VaeModel<float>& model, std::span<const float> z,
                           const std::filesystem::path& path, const Provenance& provenance) {
    if (z.size() != model.latent_dim()) {
        throw ConfigError("latent point has " + std::to_string(z.size()) + " coordinates, model expects " +
                          std::to_string(model.latent_dim()));
    }
    const Tensor out = model.decode(Tensor({1, z.size()}, std::vector<float>(z.begin(), z.end())));
    const std::size_t side = model.architecture().image_side;
    std::vector<std::uint8_t> pixels(side * side);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_gray(out[i]);
    std::vector<std::string> comments = provenance_lines(provenance);
    std::string point = "z=(";
    char buf[32];
    for (std::size_t i = 0; i < z.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.9g", i == 0 ? "" : ",", static_cast<double>(z[i]));
        point += buf;
    }
    comments.push_back(point + ")");
    write_pgm(path, side, side, pixels, comments);
}

} // namespace bvae::experiments
