#include "gridflow/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>

#include "gridflow/case_io.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'G', 'F', 'L', 'O', 'W', 'C', 'K', 'P'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

}  // namespace

std::string encode_checkpoint(Model const& model, CheckpointMetadata const& metadata) {
    ordered_json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["config"] = ordered_json::parse(model_config_to_json(model.config()));
    auto& params = manifest["parameters"] = ordered_json::array();
    for (auto const* p : model.parameters()) {
        params.push_back({{"name", p->name}, {"shape", {p->value.rows, p->value.cols}}});
    }
    manifest["metadata"] = {{"seed", metadata.seed},
                            {"epochs_run", metadata.epochs_run},
                            {"best_epoch", metadata.best_epoch},
                            {"best_val_loss", metadata.best_val_loss},
                            {"dataset_hash", metadata.dataset_hash},
                            {"metrics", ordered_json::parse(metadata.metrics_json)}};
    std::string const text = manifest.dump();

    std::string out(kMagic, sizeof kMagic);
    put_u64(out, text.size());
    out += text;
    for (auto const* p : model.parameters()) {
        for (double d : p->value.data) put_u64(out, std::bit_cast<std::uint64_t>(d));
    }
    return out;
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorKind::IoError, "not a checkpoint file");
    }
    std::uint64_t const length = get_u64(bytes, 8);
    if (length > bytes.size() - 16) throw Error(ErrorKind::IoError, "truncated checkpoint manifest");
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(bytes.substr(16, length));
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::IoError, std::string("bad checkpoint manifest: ") + e.what());
    }

    LoadedCheckpoint out;
    try {
        int const version = manifest.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                                        ", expected " + std::to_string(kCheckpointVersion));
        }
        ModelConfig const config = model_config_from_json(manifest.at("config").dump());
        out.model = make_model(config, 0);
        auto const& meta = manifest.at("metadata");
        out.metadata.seed = meta.at("seed").get<std::uint64_t>();
        out.metadata.epochs_run = meta.at("epochs_run").get<int>();
        out.metadata.best_epoch = meta.at("best_epoch").get<int>();
        out.metadata.best_val_loss = meta.at("best_val_loss").get<double>();
        out.metadata.dataset_hash = meta.at("dataset_hash").get<std::string>();
        out.metadata.metrics_json = meta.at("metrics").dump();

        auto params = out.model->parameters();
        auto const& listed = manifest.at("parameters");
        if (listed.size() != params.size()) throw Error(ErrorKind::ConfigMismatch, "parameter count differs");
        std::size_t pos = 16 + length;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            auto const shape = listed[i].at("shape").get<std::vector<std::size_t>>();
            if (listed[i].at("name").get<std::string>() != p.name || shape.size() != 2 || shape[0] != p.value.rows ||
                shape[1] != p.value.cols) {
                throw Error(ErrorKind::ConfigMismatch, "parameter '" + p.name + "' does not match its config");
            }
            if (bytes.size() - pos < 8 * p.value.size()) throw Error(ErrorKind::IoError, "truncated parameter data");
            for (auto& d : p.value.data) {
                d = std::bit_cast<double>(get_u64(bytes, pos));
                pos += 8;
            }
        }
        if (pos != bytes.size()) throw Error(ErrorKind::IoError, "trailing bytes after parameter data");
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::IoError, std::string("bad checkpoint manifest: ") + e.what());
    }
    return out;
}

void save_checkpoint(std::filesystem::path const& path, Model const& model, CheckpointMetadata const& metadata) {
    write_text_file_atomic(path, encode_checkpoint(model, metadata));
}

LoadedCheckpoint load_checkpoint(std::filesystem::path const& path) {
    return decode_checkpoint(read_text_file(path));
}

LoadedCheckpoint load_checkpoint(std::filesystem::path const& path, ModelConfig const& expected) {
    auto loaded = load_checkpoint(path);
    if (!(loaded.model->config() == expected)) {
        throw Error(ErrorKind::ConfigMismatch, "checkpoint holds a " + std::string(to_string(loaded.model->config().kind)) +
                                                   " model, expected " + std::string(to_string(expected.kind)));
    }
    return loaded;
}

}  // namespace gridflow
