#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smoothsinger/network/model.hpp"
#include "smoothsinger/training/dataset.hpp"
#include "smoothsinger/training/optimizer.hpp"

namespace smoothsinger::training {

struct TrainConfig {
  std::int64_t total_steps = 5000;
  std::int64_t phase1_steps = 3750;
  double degraded_probability = 0.5;
  std::size_t crop_min = 25600;
  std::size_t crop_max = 51200;
  std::size_t batch_size = 1;
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  int diffusion_steps = 100;
  // Standard deviation of the additive noise used when degrading targets.
  double degrade_noise_scale = 0.05;
  std::int64_t checkpoint_every = 1000;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Throws ConfigError naming the field.
void validate(const TrainConfig& config);
void set_train_field(TrainConfig& config, const std::string& key, const std::string& value);
std::string to_text(const TrainConfig& config);

struct LossRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool degraded_reference = false;  // any item of the batch
};

// Header "step\tloss\tlr", one row per step.
std::string format_loss_log(const std::vector<LossRecord>& log);
std::vector<LossRecord> parse_loss_log(const std::string& text);

struct TrainOptions {
  // Checkpoints and loss.tsv go here; empty keeps everything in memory.
  std::filesystem::path out_dir;
  // Continue from this checkpoint; earlier rows of out_dir/loss.tsv are kept.
  std::optional<std::filesystem::path> resume_from;
  // Stop (with a checkpoint) after this many completed steps.
  std::optional<std::int64_t> stop_after;
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  std::vector<LossRecord> log;  // every step of this run, after any resume point
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> checkpoints;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::int64_t step);

// Step s uses stream derive_stream(seed, s) for utterance choice, crop,
// reference choice and diffusion noise, so a resumed run replays exactly.
// A non-finite loss throws RuntimeError naming the step; checkpoints already
// written stay in place.
TrainResult train(const TrainConfig& config, const std::vector<UtteranceRecord>& dataset, network::Model& model,
                  const TrainOptions& options = {});

}  // namespace smoothsinger::training
