#include "smoothsinger/network/config.hpp"

#include <numeric>
#include <sstream>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/text.hpp"

namespace smoothsinger::network {

std::size_t ModelConfig::stride_product() const { return cumulative_stride(stages() - 1); }

std::size_t ModelConfig::cumulative_stride(std::size_t stage) const {
  std::size_t p = 1;
  for (std::size_t i = 0; i <= stage && i < strides.size(); ++i) p *= strides[i];
  return p;
}

std::size_t ModelConfig::length_multiple() const { return std::lcm(stride_product(), frame_hop); }

void validate(const ModelConfig& c) {
  if (c.strides.empty()) throw ConfigError("strides: at least one stage required");
  if (c.channels.size() != c.strides.size())
    throw ConfigError("channels: " + std::to_string(c.channels.size()) + " entries for " +
                      std::to_string(c.strides.size()) + " strides");
  for (std::size_t i = 0; i < c.strides.size(); ++i) {
    if (c.strides[i] < 2) throw ConfigError("strides[" + std::to_string(i) + "] must be >= 2");
    if (c.channels[i] < 1) throw ConfigError("channels[" + std::to_string(i) + "] must be >= 1");
    const std::size_t s = c.cumulative_stride(i);
    if (c.frame_hop == 0 || (s <= c.frame_hop ? c.frame_hop % s : s % c.frame_hop) != 0)
      throw ConfigError("cumulative stride " + std::to_string(s) + " of stage " + std::to_string(i) +
                        " and frame_hop " + std::to_string(c.frame_hop) + " must divide one another");
  }
  if (c.top_channels < 1) throw ConfigError("top_channels must be >= 1");
  if (c.lowf_channels < 1 || c.attention_heads < 1 || c.lowf_channels % c.attention_heads != 0)
    throw ConfigError("lowf_channels must be a positive multiple of attention_heads");
  if (c.attention_window < 1) throw ConfigError("attention_window must be >= 1");
  if (c.lvc_kernel < 1 || c.lvc_kernel % 2 == 0) throw ConfigError("lvc_kernel must be odd");
  if (c.embed_dim < 1 || c.step_hidden < 1) throw ConfigError("embed_dim and step_hidden must be >= 1");
  if (c.step_embed_dim < 2 || c.step_embed_dim % 2 != 0) throw ConfigError("step_embed_dim must be even and >= 2");
  if (c.phoneme_vocab < 1 || c.speakers < 1) throw ConfigError("phoneme_vocab and speakers must be >= 1");
  if (c.pitch_bins < 2) throw ConfigError("pitch_bins must be >= 2");
  if (!(c.pitch_min_hz > 0 && c.pitch_min_hz < c.pitch_max_hz))
    throw ConfigError("pitch range must satisfy 0 < pitch_min_hz < pitch_max_hz");
}

void set_model_field(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "strides") c.strides = parse_size_list(key, value);
  else if (key == "channels") c.channels = parse_size_list(key, value);
  else if (key == "top_channels") c.top_channels = parse_size(key, value);
  else if (key == "lowf_channels") c.lowf_channels = parse_size(key, value);
  else if (key == "attention_window") c.attention_window = parse_size(key, value);
  else if (key == "attention_heads") c.attention_heads = parse_size(key, value);
  else if (key == "lvc_kernel") c.lvc_kernel = parse_size(key, value);
  else if (key == "embed_dim") c.embed_dim = parse_size(key, value);
  else if (key == "step_embed_dim") c.step_embed_dim = parse_size(key, value);
  else if (key == "step_hidden") c.step_hidden = parse_size(key, value);
  else if (key == "phoneme_vocab") c.phoneme_vocab = parse_size(key, value);
  else if (key == "pitch_bins") c.pitch_bins = parse_size(key, value);
  else if (key == "pitch_min_hz") c.pitch_min_hz = parse_real(key, value);
  else if (key == "pitch_max_hz") c.pitch_max_hz = parse_real(key, value);
  else if (key == "speakers") c.speakers = parse_size(key, value);
  else if (key == "frame_hop") c.frame_hop = parse_size(key, value);
  else if (key == "init_seed") c.init_seed = parse_size(key, value);
  else throw ConfigError("unknown model key '" + key + "'");
}

std::string to_text(const ModelConfig& c) {
  std::ostringstream out;
  out << "strides = " << join(c.strides) << "\n"
      << "channels = " << join(c.channels) << "\n"
      << "top_channels = " << c.top_channels << "\n"
      << "lowf_channels = " << c.lowf_channels << "\n"
      << "attention_window = " << c.attention_window << "\n"
      << "attention_heads = " << c.attention_heads << "\n"
      << "lvc_kernel = " << c.lvc_kernel << "\n"
      << "embed_dim = " << c.embed_dim << "\n"
      << "step_embed_dim = " << c.step_embed_dim << "\n"
      << "step_hidden = " << c.step_hidden << "\n"
      << "phoneme_vocab = " << c.phoneme_vocab << "\n"
      << "pitch_bins = " << c.pitch_bins << "\n"
      << "pitch_min_hz = " << real_text(c.pitch_min_hz) << "\n"
      << "pitch_max_hz = " << real_text(c.pitch_max_hz) << "\n"
      << "speakers = " << c.speakers << "\n"
      << "frame_hop = " << c.frame_hop << "\n"
      << "init_seed = " << c.init_seed << "\n";
  return out.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig c;
  for (const auto& [key, value] : key_value_lines(text, "model config")) set_model_field(c, key, value);
  validate(c);
  return c;
}

std::vector<ModelConfig> ablation_stride_configs(const ModelConfig& base) {
  const std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> sets{
      {{8, 8, 4}, {32, 64, 128}},
      {{8, 8, 8}, {32, 64, 128}},
      {{4, 4, 4, 4}, {16, 32, 64, 128}},
      {{16, 16}, {48, 128}},
  };
  std::vector<ModelConfig> out;
  for (const auto& [strides, channels] : sets) {
    ModelConfig c = base;
    c.strides = strides;
    c.channels = channels;
    out.push_back(c);
  }
  return out;
}

}  // namespace smoothsinger::network
