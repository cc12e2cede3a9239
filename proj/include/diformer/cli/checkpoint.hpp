#pragma once

#include <filesystem>

#include "diformer/cli/config_file.hpp"
#include "diformer/corpus/vocabulary.hpp"
#include "diformer/model/model.hpp"

namespace diformer {

/// Binary checkpoint: "DIFM", u32 version 1, u64-length-prefixed config text
/// (render_config plus a `vocab = ...` line), u64 tensor count, then per
/// tensor in name order a u64-length-prefixed name, u64 rank, u64 extents and
/// f32 values row-major. All integers and floats little-endian.
struct Checkpoint {
  Config config;
  Vocabulary vocab;
  Model<float> model;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const Config& config,
                     const Vocabulary& vocab);

/// Throws CheckpointError: "corrupt checkpoint: ..." for a bad magic,
/// truncation or inconsistent tensors, "unsupported version N" otherwise.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace diformer
