#pragma once

#include <cstdint>
#include <filesystem>

#include "krd/models.hpp"

namespace krd {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

// meta.json (architecture, seed, epoch) + weights.bin (little-endian float64,
// layer order, row-major; biases follow the weights when enabled).
void save_checkpoint(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& dir);
Network load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

}  // namespace krd
