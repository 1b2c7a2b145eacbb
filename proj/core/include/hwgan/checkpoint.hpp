#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwgan/nn.hpp"

namespace hwgan {

// Checkpoint file layout: magic "HWGN", little-endian u32 version,
// little-endian u32 manifest length, UTF-8 JSON manifest, then contiguous
// little-endian f32 tensor payloads in manifest order. Matrices are stored
// column-major. The manifest records name, shape, dtype and byte offset of
// every tensor plus the step counter, a config snapshot and rng states.

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  long step = 0;
  nlohmann::json config;  // may be null
  std::map<std::string, std::string> rng_states;
};

struct CheckpointEntry {
  std::string name;
  long rows = 0;
  long cols = 0;
  const float* data = nullptr;  // rows * cols values, column-major
};

struct LoadedTensor {
  long rows = 0;
  long cols = 0;
  std::vector<float> data;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::map<std::string, LoadedTensor> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  const LoadedTensor& require(const std::string& name) const;

  // Copies a tensor into an existing matrix; shape mismatch is a
  // CheckpointError.
  void load_into(const std::string& name, nn::Mat<float>& dst) const;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<CheckpointEntry>& entries);

Checkpoint load_checkpoint(const std::string& path);

// Convenience: entries for a parameter list (values only).
std::vector<CheckpointEntry> checkpoint_entries(
    const std::vector<nn::Param<float>*>& params);

// Restores every parameter by name; missing tensors or shape mismatches are
// CheckpointErrors.
void restore_params(const Checkpoint& ckpt,
                    const std::vector<nn::Param<float>*>& params);

}  // namespace hwgan
