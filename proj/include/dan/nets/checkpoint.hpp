#pragma once

// Binary parameter checkpoints.
//
// Layout (all little-endian):
//   8 bytes   magic "GNAVCKPT"
//   uint32    format version
//   uint64    ModelConfig digest
//   double[]  every tensor of the parameter store, declaration order
//
// A text manifest "<path>.manifest" lists one "name shape" line per tensor.

#include <cstdint>
#include <filesystem>

#include "dan/nets/model.hpp"

namespace dan::nets {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'A', 'V', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParamStore& params);

// Throws std::runtime_error on missing files, bad magic/version, a digest
// that differs from `config`, or a truncated payload.
ParamStore load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);

std::uint64_t read_checkpoint_digest(const std::filesystem::path& path);

}  // namespace dan::nets
