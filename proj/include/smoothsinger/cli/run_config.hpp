#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smoothsinger/network/condition.hpp"
#include "smoothsinger/network/config.hpp"
#include "smoothsinger/training/train.hpp"

namespace smoothsinger::cli {

inline constexpr int kSchemaVersion = 1;

// Merged run configuration. Text form is one `section.key = value` per line
// plus top-level `schema_version` and `seed`.
struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  network::ModelConfig model;
  // training.seed and training.diffusion_steps are not keys of their own:
  // they come from `seed` and `schedule.training_steps`.
  training::TrainConfig train;
  int inference_steps = 4;
  std::vector<std::string> metrics{"snr", "lsd", "stoi"};
  std::vector<int> ablation_steps{4, 24, 100};

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws ConfigError listing every problem found (unknown keys, bad values,
// duplicates, missing or unsupported schema_version), then cross-checks.
RunConfig parse_run_config(const std::string& text);
std::string to_text(const RunConfig& config);
void validate(const RunConfig& config);

// Number of samples the condition track is regulated to: frames * hop
// rounded to the nearest multiple (at least one multiple).
std::size_t regulated_length(std::size_t frames, std::size_t frame_hop, std::size_t multiple);

// Trims the track, or pads it with silent frames appended as one extra
// phoneme, to `frames` frames. Durations are kept consistent.
network::ConditionFeatures fit_condition(const network::ConditionFeatures& c, std::size_t frames);

}  // namespace smoothsinger::cli
