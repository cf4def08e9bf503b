#include "bvae/data/dataset.hpp"

#include <json.hpp>

#include <fstream>

#include "bvae/binary_io.hpp"

namespace bvae::data {

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(name) + "' (expected train or test)");
}

void validate(const LabeledDataset& ds) {
    const Shape& s = ds.images.shape();
    if (s.size() != 4 || s[1] != image_side || s[2] != image_side || s[3] != 1) {
        throw DimensionError("dataset images must be N x 28 x 28 x 1, got " + shape_string(s));
    }
    if (s[0] != ds.labels.size()) {
        throw ConsistencyError("dataset has " + std::to_string(s[0]) + " images but " +
                               std::to_string(ds.labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        const float v = ds.images[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw ValidationError("pixel " + std::to_string(i) + " out of [0,1]: " + std::to_string(v));
        }
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] >= num_classes) {
            throw ValidationError("label " + std::to_string(i) + " out of 0..9: " + std::to_string(ds.labels[i]));
        }
    }
}

LabeledDataset take_prefix(const LabeledDataset& ds, std::size_t count) {
    if (count >= ds.size()) return ds;
    if (count == 0) throw ConfigError("take_prefix: count must be positive");
    LabeledDataset out;
    out.split = ds.split;
    out.kind = ds.kind;
    out.seed = ds.seed;
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
    std::vector<float> pixels(ds.images.data(), ds.images.data() + count * image_pixels);
    out.images = Tensor({count, image_side, image_side, 1}, std::move(pixels));
    return out;
}

void save_dataset_cache(const LabeledDataset& ds, const std::filesystem::path& prefix) {
    validate(ds);
    std::vector<unsigned char> raw;
    raw.reserve(ds.images.size() * 4);
    put_f32_le(raw, ds.images.values());
    write_file_bytes(prefix.string() + ".f32", raw);

    nlohmann::json meta;
    meta["format"] = "bvae-dataset-cache";
    meta["version"] = 1;
    meta["shape"] = ds.images.shape();
    meta["dtype"] = "f32le";
    meta["split"] = to_string(ds.split);
    meta["kind"] = ds.kind;
    meta["seed"] = ds.seed;
    meta["labels"] = ds.labels;
    std::ofstream out(prefix.string() + ".json");
    if (!out) throw IoError("cannot write " + prefix.string() + ".json");
    out << meta.dump() << '\n';
}

LabeledDataset load_dataset_cache(const std::filesystem::path& prefix) {
    const std::string json_path = prefix.string() + ".json";
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open dataset cache sidecar '" + json_path + "'");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed dataset cache sidecar '" + json_path + "': " + e.what());
    }
    if (meta.value("format", "") != "bvae-dataset-cache" || meta.value("version", 0) != 1) {
        throw FormatError("'" + json_path + "' is not a version 1 dataset cache");
    }
    LabeledDataset ds;
    try {
        const Shape shape = meta.at("shape").get<Shape>();
        const std::vector<unsigned char> raw = read_file_bytes(prefix.string() + ".f32");
        if (raw.size() != shape_size(shape) * 4) {
            throw IoError("dataset cache payload has " + std::to_string(raw.size()) + " bytes, expected " +
                          std::to_string(shape_size(shape) * 4));
        }
        ds.images = Tensor(shape);
        get_f32_le(raw.data(), ds.images.values());
        ds.labels = meta.at("labels").get<std::vector<std::uint8_t>>();
        ds.split = split_from_string(meta.at("split").get<std::string>());
        ds.kind = meta.at("kind").get<std::string>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed dataset cache sidecar '" + json_path + "': " + e.what());
    }
    validate(ds);
    return ds;
}

} // namespace bvae::data
