// Flat binary parameter checkpoint: header (magic, version, config digest)
// followed by named arrays in the fixed parameter order. Save -> load is
// bit-exact; a digest or version mismatch refuses to load.
#pragma once

#include <cstdint>
#include <string>

#include "setdet/model.hpp"

namespace setdet {

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'T', 'D', 'E', 'T', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, uint64_t config_digest, const std::string& path);

// Rebuilds parameters for `cfg` and fills them from the file. Throws
// std::runtime_error on I/O problems, corrupted headers, version or digest
// mismatches, and layout differences.
ModelParams load_checkpoint(const ModelConfig& cfg, uint64_t expected_digest,
                            const std::string& path);

}  // namespace setdet
