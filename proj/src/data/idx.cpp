#include "bvae/data/idx.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <memory>

#include "bvae/binary_io.hpp"
#include "bvae/hash.hpp"

namespace bvae::data {

namespace {

struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
};

std::vector<unsigned char> gunzip_file(const std::filesystem::path& path) {
    std::unique_ptr<gzFile_s, GzCloser> f(gzopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> out;
    std::array<unsigned char, 1 << 16> chunk{};
    for (;;) {
        const int n = gzread(f.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int code = 0;
            throw IoError("gzip read of '" + path.string() + "' failed: " + gzerror(f.get(), &code));
        }
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    return out;
}

struct MnistName {
    const char* images;
    const char* labels;
    const char* images_sha256;
    const char* labels_sha256;
};

constexpr MnistName train_names{"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
                                "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5"};
constexpr MnistName test_names{"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
                               "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
                               "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2"};

const MnistName& names_for(Split split) { return split == Split::train ? train_names : test_names; }

std::filesystem::path find_variant(const std::filesystem::path& dir, const std::string& base) {
    for (const std::string& candidate : {base, base + ".gz"}) {
        if (std::filesystem::is_regular_file(dir / candidate)) return dir / candidate;
    }
    return {};
}

LabeledDataset assemble(const IdxArray& images, const IdxArray& labels, Split split, const std::string& source) {
    if (images.dims.size() != 3 || images.dims[1] != image_side || images.dims[2] != image_side) {
        throw FormatError(source + ": expected N x 28 x 28 images");
    }
    if (labels.dims.size() != 1) throw FormatError(source + ": labels file must be one-dimensional");
    if (images.dims[0] != labels.dims[0]) {
        throw ConsistencyError(source + ": " + std::to_string(images.dims[0]) + " images but " +
                               std::to_string(labels.dims[0]) + " labels");
    }
    const std::size_t n = images.dims[0];
    LabeledDataset ds;
    ds.split = split;
    std::vector<float> pixels(images.bytes.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<float>(images.bytes[i]) / 255.0f;
    ds.images = Tensor({n, image_side, image_side, 1}, std::move(pixels));
    ds.labels = labels.bytes;
    validate(ds);
    return ds;
}

} // namespace

std::vector<unsigned char> read_maybe_gzip(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_file_bytes(path.string());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip_file(path);
    return bytes;
}

IdxArray parse_idx(std::span<const unsigned char> buffer, std::uint32_t expected_magic, const std::string& source) {
    if (buffer.size() < 4) throw IoError(source + ": truncated IDX header");
    IdxArray out;
    out.magic = get_u32_be(buffer.data());
    if (out.magic != expected_magic) {
        char got[11];
        char want[11];
        std::snprintf(got, sizeof got, "0x%08x", out.magic);
        std::snprintf(want, sizeof want, "0x%08x", expected_magic);
        throw FormatError(source + ": IDX magic " + got + ", expected " + want);
    }
    const std::size_t rank = out.magic & 0xff;
    if (buffer.size() < 4 + 4 * rank) throw IoError(source + ": truncated IDX header");
    std::size_t count = 1;
    for (std::size_t d = 0; d < rank; ++d) {
        out.dims.push_back(get_u32_be(buffer.data() + 4 + 4 * d));
        count *= out.dims.back();
    }
    const std::size_t offset = 4 + 4 * rank;
    if (buffer.size() - offset < count) {
        throw IoError(source + ": truncated IDX payload (" + std::to_string(buffer.size() - offset) + " of " +
                      std::to_string(count) + " bytes)");
    }
    out.bytes.assign(buffer.begin() + static_cast<std::ptrdiff_t>(offset),
                     buffer.begin() + static_cast<std::ptrdiff_t>(offset + count));
    return out;
}

std::vector<unsigned char> encode_idx(const IdxArray& array) {
    std::vector<unsigned char> out;
    auto put_be = [&](std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
    };
    put_be(array.magic);
    for (std::uint32_t d : array.dims) put_be(d);
    out.insert(out.end(), array.bytes.begin(), array.bytes.end());
    return out;
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        Split split) {
    const IdxArray images = parse_idx(read_maybe_gzip(images_path), idx_images_magic, images_path.string());
    const IdxArray labels = parse_idx(read_maybe_gzip(labels_path), idx_labels_magic, labels_path.string());
    return assemble(images, labels, split, images_path.string());
}

void save_idx(const LabeledDataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
    validate(ds);
    IdxArray images{idx_images_magic, {static_cast<std::uint32_t>(ds.size()), image_side, image_side}, {}};
    images.bytes.reserve(ds.images.size());
    for (float v : ds.images.values()) images.bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    IdxArray labels{idx_labels_magic, {static_cast<std::uint32_t>(ds.size())}, ds.labels};
    write_file_bytes(images_path.string(), encode_idx(images));
    write_file_bytes(labels_path.string(), encode_idx(labels));
}

MnistFiles locate_mnist(const std::filesystem::path& dir, Split split) {
    const MnistName& names = names_for(split);
    MnistFiles files{find_variant(dir, names.images), find_variant(dir, names.labels)};
    if (files.images.empty() || files.labels.empty()) {
        throw IoError("MNIST " + std::string(to_string(split)) + " split not found in '" + dir.string() +
                      "': expected " + names.images + " and " + names.labels +
                      " (optionally .gz); set BVAE_DATA_DIR or pass --data");
    }
    return files;
}

LabeledDataset load_mnist(const std::filesystem::path& dir, Split split, bool verify) {
    const MnistFiles files = locate_mnist(dir, split);
    const MnistName& names = names_for(split);
    const std::vector<unsigned char> image_bytes = read_maybe_gzip(files.images);
    const std::vector<unsigned char> label_bytes = read_maybe_gzip(files.labels);
    if (verify) {
        if (sha256_hex(image_bytes) != names.images_sha256) {
            throw ChecksumError(files.images.string() + ": SHA-256 does not match the published MNIST file");
        }
        if (sha256_hex(label_bytes) != names.labels_sha256) {
            throw ChecksumError(files.labels.string() + ": SHA-256 does not match the published MNIST file");
        }
    }
    const IdxArray images = parse_idx(image_bytes, idx_images_magic, files.images.string());
    const IdxArray labels = parse_idx(label_bytes, idx_labels_magic, files.labels.string());
    return assemble(images, labels, split, files.images.string());
}

} // namespace bvae::data
