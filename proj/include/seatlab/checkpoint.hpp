#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "seatlab/training.hpp"

namespace seatlab {

// Binary container:
//   "SEATLAB\0" | u32 version | u64 config hash | u64 iteration | u32 blob count
//   per blob: u32 name length, name, u8 kind (0 = f64 array, 1 = bytes),
//             u32 rank, u64 extents[rank], u64 payload length (elements or
//             bytes), payload
// All integers and floats are little-endian. Blob order is fixed, so
// load followed by save reproduces the file byte for byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint32_t version = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t iteration = 0;
  TrainConfig config;  // embedded at save time
};

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state, const TrainConfig& config);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);
// Restores into an existing state. Every tensor must be present with the
// shape the constructed networks expect; extra or missing blobs are errors.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, TrainingState& state);
// Builds the networks from the embedded config, then restores them.
std::unique_ptr<TrainingState> load_checkpoint(const std::filesystem::path& path, TrainConfig* config = nullptr);

}  // namespace seatlab
