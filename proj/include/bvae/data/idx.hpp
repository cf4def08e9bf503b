#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bvae/data/dataset.hpp"

namespace bvae::data {

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

// An unsigned-byte IDX array.
struct IdxArray {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> bytes;
};

// Whole file contents, gunzipped when the file starts with 0x1f 0x8b.
std::vector<unsigned char> read_maybe_gzip(const std::filesystem::path& path);

// Parses an IDX buffer, requiring `expected_magic`. Wrong magic is a
// FormatError, a short payload an IoError.
IdxArray parse_idx(std::span<const unsigned char> buffer, std::uint32_t expected_magic, const std::string& source);
std::vector<unsigned char> encode_idx(const IdxArray& array);

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        Split split = Split::train);

// Writes pixels quantized back to bytes; exact inverse of load_idx for data
// that came from IDX files.
void save_idx(const LabeledDataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

struct MnistFiles {
    std::filesystem::path images;
    std::filesystem::path labels;
};

// Finds the standard MNIST file names in `dir`, with or without a .gz
// suffix. Throws IoError listing the expected names when missing.
MnistFiles locate_mnist(const std::filesystem::path& dir, Split split);

// Loads a split and, when `verify` is set, checks the SHA-256 of the
// decompressed files against the published MNIST payloads.
LabeledDataset load_mnist(const std::filesystem::path& dir, Split split, bool verify = true);

} // namespace bvae::data
