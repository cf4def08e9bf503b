#include "bvae/train/checkpoint.hpp"

#include <cstring>

#include "bvae/binary_io.hpp"
#include "bvae/hash.hpp"

namespace bvae::train {

using nlohmann::json;

namespace {

constexpr std::size_t prefix_bytes = 8 + 4 + 8 + 8;

json breakdown_json(const vae::LossBreakdown& l) {
    return {{"recon", l.recon}, {"kl", l.kl}, {"branch", l.branch}, {"total", l.total}};
}

vae::LossBreakdown breakdown_from_json(const json& j) {
    return {j.at("recon").get<double>(), j.at("kl").get<double>(), j.at("branch").get<double>(),
            j.at("total").get<double>()};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json shape_json(const Shape& s) { return json(s); }

} // namespace

json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"loss", breakdown_json(r.loss)},
            {"first_batch", breakdown_json(r.first_batch)},
            {"clamped_pixels", r.clamped_pixels},
            {"branch_accuracy", optional_json(r.branch_accuracy)},
            {"exact_accuracy", optional_json(r.exact_accuracy)}};
}

EpochRecord epoch_record_from_json(const json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.loss = breakdown_from_json(j.at("loss"));
    r.first_batch = breakdown_from_json(j.at("first_batch"));
    r.clamped_pixels = j.at("clamped_pixels").get<std::size_t>();
    r.branch_accuracy = optional_from_json(j.at("branch_accuracy"));
    r.exact_accuracy = optional_from_json(j.at("exact_accuracy"));
    return r;
}

json to_json(const vae::VaeArchitecture& a) {
    return {{"image_side", a.image_side},     {"conv1_filters", a.conv1_filters},
            {"conv2_filters", a.conv2_filters}, {"hidden_units", a.hidden_units},
            {"latent_dim", a.latent_dim},     {"kernel", a.kernel},
            {"output", nn::to_string(a.output)}};
}

vae::VaeArchitecture architecture_from_json(const json& j) {
    vae::VaeArchitecture a;
    a.image_side = j.at("image_side").get<std::size_t>();
    a.conv1_filters = j.at("conv1_filters").get<std::size_t>();
    a.conv2_filters = j.at("conv2_filters").get<std::size_t>();
    a.hidden_units = j.at("hidden_units").get<std::size_t>();
    a.latent_dim = j.at("latent_dim").get<std::size_t>();
    a.kernel = j.at("kernel").get<std::size_t>();
    a.output = nn::activation_from_string(j.at("output").get<std::string>());
    return a;
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
    if (c.first_moment.size() != c.parameters.size() || c.second_moment.size() != c.parameters.size()) {
        throw ConsistencyError("checkpoint: optimizer moments do not match the parameter list");
    }
    json header;
    header["format"] = "bvae-checkpoint";
    header["config"] = to_json(c.config);
    header["config_hash"] = config_hash(c.config);
    header["architecture"] = to_json(c.architecture);
    header["epoch"] = c.epoch;
    header["rng"] = {{"master_seed", c.config.seed}, {"next_epoch", c.epoch}};
    header["adam"] = {{"learning_rate", c.adam_config.learning_rate},
                      {"beta1", c.adam_config.beta1},
                      {"beta2", c.adam_config.beta2},
                      {"epsilon", c.adam_config.epsilon},
                      {"step", c.adam_step}};
    json history = json::array();
    for (const EpochRecord& r : c.history) history.push_back(to_json(r));
    header["history"] = history;
    header["train_fingerprint"] = c.train_fingerprint;
    header["centroid_seen"] = c.centroid_seen;

    // Block order: parameters, first moments, second moments, centroids.
    std::vector<std::pair<std::string, const Tensor*>> blocks;
    for (const NamedTensor& p : c.parameters) blocks.emplace_back("param:" + p.name, &p.value);
    for (std::size_t i = 0; i < c.parameters.size(); ++i) blocks.emplace_back("adam_m:" + c.parameters[i].name, &c.first_moment[i]);
    for (std::size_t i = 0; i < c.parameters.size(); ++i) blocks.emplace_back("adam_v:" + c.parameters[i].name, &c.second_moment[i]);
    if (c.centroids) blocks.emplace_back("centroids", &*c.centroids);
    json tensors = json::array();
    std::size_t payload = 0;
    for (const auto& [name, t] : blocks) {
        tensors.push_back({{"name", name}, {"shape", shape_json(t->shape())}});
        payload += t->size() * 4;
    }
    header["tensors"] = tensors;
    const std::string text = header.dump();

    std::vector<unsigned char> out(checkpoint_magic, checkpoint_magic + 8);
    put_u32_le(out, checkpoint_version);
    put_u64_le(out, text.size());
    put_u64_le(out, payload);
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + payload + 8);
    for (const auto& [_, t] : blocks) put_f32_le(out, t->values());
    put_u64_le(out, sha256_prefix64(out));
    return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    if (bytes.size() < prefix_bytes) {
        throw IoError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes, header needs " +
                      std::to_string(prefix_bytes));
    }
    if (std::memcmp(bytes.data(), checkpoint_magic, 8) != 0) throw FormatError("not a checkpoint file (bad magic)");
    const std::uint32_t version = get_u32_le(bytes.data() + 8);
    if (version != checkpoint_version) {
        throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(checkpoint_version) + ")");
    }
    const std::uint64_t header_len = get_u64_le(bytes.data() + 12);
    const std::uint64_t payload_len = get_u64_le(bytes.data() + 20);
    if (header_len > bytes.size() || payload_len > bytes.size() ||
        prefix_bytes + header_len + payload_len + 8 > bytes.size()) {
        throw IoError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes, layout needs " +
                      std::to_string(prefix_bytes + header_len + payload_len + 8));
    }
    const std::size_t body = prefix_bytes + header_len + payload_len;
    if (body + 8 != bytes.size()) throw FormatError("checkpoint has trailing bytes after the checksum");
    if (sha256_prefix64(bytes.first(body)) != get_u64_le(bytes.data() + body)) {
        throw ChecksumError("checkpoint checksum mismatch; the file is corrupted");
    }

    json header;
    try {
        header = json::parse(bytes.begin() + prefix_bytes, bytes.begin() + prefix_bytes + header_len);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    Checkpoint c;
    try {
        c.config = config_from_json(header.at("config"));
        c.architecture = architecture_from_json(header.at("architecture"));
        c.epoch = header.at("epoch").get<std::size_t>();
        const json& adam = header.at("adam");
        c.adam_config = {adam.at("learning_rate").get<double>(), adam.at("beta1").get<double>(),
                         adam.at("beta2").get<double>(), adam.at("epsilon").get<double>()};
        c.adam_step = adam.at("step").get<std::uint64_t>();
        for (const json& r : header.at("history")) c.history.push_back(epoch_record_from_json(r));
        c.train_fingerprint = header.at("train_fingerprint").get<std::string>();
        c.centroid_seen = header.at("centroid_seen").get<std::array<bool, 10>>();

        const unsigned char* p = bytes.data() + prefix_bytes + header_len;
        const unsigned char* end = p + payload_len;
        for (const json& t : header.at("tensors")) {
            const std::string name = t.at("name").get<std::string>();
            Tensor value(t.at("shape").get<Shape>());
            if (static_cast<std::size_t>(end - p) < value.size() * 4) throw FormatError("tensor blocks overrun the payload");
            get_f32_le(p, value.values());
            p += value.size() * 4;
            if (name.starts_with("param:")) {
                c.parameters.push_back({name.substr(6), std::move(value)});
            } else if (name.starts_with("adam_m:")) {
                c.first_moment.push_back(std::move(value));
            } else if (name.starts_with("adam_v:")) {
                c.second_moment.push_back(std::move(value));
            } else if (name == "centroids") {
                c.centroids = std::move(value);
            } else {
                throw FormatError("unknown checkpoint block '" + name + "'");
            }
        }
        if (p != end) throw FormatError("checkpoint payload length does not match the tensor list");
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header is malformed: ") + e.what());
    }
    if (c.first_moment.size() != c.parameters.size() || c.second_moment.size() != c.parameters.size()) {
        throw FormatError("checkpoint optimizer moments do not match the parameter list");
    }
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = encode_checkpoint(checkpoint);
    std::filesystem::path tmp = path;
    tmp += ".partial";
    write_file_bytes(tmp.string(), bytes);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file_bytes(path.string());
    try {
        return decode_checkpoint(bytes);
    } catch (const Error& e) {
        // Rethrow with the file name, keeping the error category.
        const std::string what = path.string() + ": " + e.what();
        if (dynamic_cast<const ChecksumError*>(&e)) throw ChecksumError(what);
        if (dynamic_cast<const IoError*>(&e)) throw IoError(what);
        if (dynamic_cast<const FormatError*>(&e)) throw FormatError(what);
        throw;
    }
}

vae::VaeModel<float> model_from_checkpoint(const Checkpoint& c) {
    vae::VaeModel<float> model(c.architecture);
    auto params = model.parameters();
    if (c.parameters.size() < params.size()) throw ConsistencyError("checkpoint has too few parameters for the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (c.parameters[i].name != params[i]->name || c.parameters[i].value.shape() != params[i]->value.shape()) {
            throw ConsistencyError("checkpoint parameter '" + c.parameters[i].name + "' does not match '" +
                                   params[i]->name + "'");
        }
        params[i]->value = c.parameters[i].value;
    }
    return model;
}

} // namespace bvae::train
