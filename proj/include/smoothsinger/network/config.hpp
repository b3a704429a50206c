#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smoothsinger::network {

// Stage i (0-based) runs at cumulative stride strides[0] * ... * strides[i]
// with channels[i] features. Z_1 at full resolution has top_channels.
struct ModelConfig {
  std::vector<std::size_t> strides{8, 8, 4};
  std::vector<std::size_t> channels{32, 64, 128};
  std::size_t top_channels = 16;
  std::size_t lowf_channels = 16;
  std::size_t attention_window = 32;
  std::size_t attention_heads = 2;
  std::size_t lvc_kernel = 3;
  std::size_t embed_dim = 16;
  std::size_t step_embed_dim = 16;
  std::size_t step_hidden = 64;
  std::size_t phoneme_vocab = 64;
  std::size_t pitch_bins = 128;
  double pitch_min_hz = 50.0;
  double pitch_max_hz = 1100.0;
  std::size_t speakers = 1;
  std::size_t frame_hop = 128;  // samples per condition frame
  std::uint64_t init_seed = 1234;

  std::size_t stages() const { return strides.size(); }
  std::size_t stride_product() const;
  // Product of strides[0..stage].
  std::size_t cumulative_stride(std::size_t stage) const;
  // Every input length must be a multiple of this.
  std::size_t length_multiple() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws ConfigError naming the offending field.
void validate(const ModelConfig& config);

// Sets one field from its text form ("strides" = "8,8,4"). Unknown keys and
// malformed values throw ConfigError.
void set_model_field(ModelConfig& config, const std::string& key, const std::string& value);
// "key = value" lines covering every field, in a fixed order.
std::string to_text(const ModelConfig& config);
ModelConfig model_config_from_text(const std::string& text);

// The stride sets of the stride ablation, each with per-stage channels.
std::vector<ModelConfig> ablation_stride_configs(const ModelConfig& base = {});

}  // namespace smoothsinger::network
