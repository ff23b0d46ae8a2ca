#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "gridflow/models.hpp"

namespace gridflow {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMetadata {
    std::uint64_t seed = 0;
    int epochs_run = 0;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::string dataset_hash;
    std::string metrics_json = "{}";  // free-form JSON object

    friend bool operator==(CheckpointMetadata const&, CheckpointMetadata const&) = default;
};

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    CheckpointMetadata metadata;
};

/// Layout: 8-byte magic, u64 LE manifest length, manifest JSON, then every
/// parameter as raw little-endian doubles in manifest order.
std::string encode_checkpoint(Model const& model, CheckpointMetadata const& metadata);
LoadedCheckpoint decode_checkpoint(std::string_view bytes);

/// Atomic write. Throws Error(IoError).
void save_checkpoint(std::filesystem::path const& path, Model const& model, CheckpointMetadata const& metadata);

/// Throws Error(IoError) for unreadable or truncated files,
/// Error(VersionMismatch) for another container version.
LoadedCheckpoint load_checkpoint(std::filesystem::path const& path);

/// As above, and additionally throws Error(ConfigMismatch) when the stored
/// configuration differs from `expected`.
LoadedCheckpoint load_checkpoint(std::filesystem::path const& path, ModelConfig const& expected);

}  // namespace gridflow
