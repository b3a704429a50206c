#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoothsinger/network/config.hpp"
#include "smoothsinger/network/model.hpp"
#include "smoothsinger/training/optimizer.hpp"

namespace smoothsinger::training {

// Layout (little endian): magic "SSCKPT01", u32 version, config text, u64
// training step, u64 optimizer update count, u64 tensor count, then per
// tensor its name, shape, values and both optimizer moments as f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Tensor value, first_moment, second_moment;
};

struct Checkpoint {
  network::ModelConfig config;
  std::uint64_t step = 0;  // number of completed training steps
  std::uint64_t optimizer_updates = 0;
  std::vector<CheckpointTensor> tensors;
};

Checkpoint capture(const network::Model& model, const AdamW& optimizer, std::uint64_t step);
std::string encode(const Checkpoint& ck);
// Rejects bad magic, unknown versions and truncated or trailing bytes.
Checkpoint decode(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const network::Model& model, const AdamW& optimizer,
                     std::uint64_t step);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies the checkpoint into model and optimizer after checking every field
// against them; on any mismatch nothing is modified and a ValidationError
// names the field. optimizer may be null.
void restore(const Checkpoint& ck, network::Model& model, AdamW* optimizer);

// Model built from the stored config with the stored weights.
network::Model load_model(const std::filesystem::path& path);

}  // namespace smoothsinger::training
