#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echopipe/network.hpp"

namespace echopipe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string task = "severity";
  std::string view;
};

// Layout, little-endian:
//   "ECKP" | version u32 | header length u64 | JSON header | float32 tensors
// The header holds the model config, the metadata and the name and shape of every
// tensor, in the order they follow. Output is a pure function of model state.
std::vector<std::uint8_t> encode_checkpoint(Model<float>& model, const CheckpointMeta& meta);
void save_checkpoint(Model<float>& model, const CheckpointMeta& meta, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<Model<float>> model;
  CheckpointMeta meta;
};

/// Rebuilds the model and restores its state. With `expected_num_classes`, a
/// checkpoint for a different class count is rejected.
LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                   std::optional<int> expected_num_classes = std::nullopt);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<int> expected_num_classes = std::nullopt);

}  // namespace echopipe
