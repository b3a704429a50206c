#include "smoothsinger/cli/run_config.hpp"

#include <set>
#include <sstream>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/eval/harness.hpp"
#include "smoothsinger/text.hpp"

namespace smoothsinger::cli {
namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) out.push_back(trim(item));
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (auto v : parse_size_list(key, text)) out.push_back(static_cast<int>(v));
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (int s : v) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

void set_field(RunConfig& c, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    if (key == "schema_version") c.schema_version = static_cast<int>(parse_size(key, value));
    else if (key == "seed") c.seed = parse_size(key, value);
    else throw ConfigError("unknown key '" + key + "'");
    return;
  }
  const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
  if (section == "model") {
    network::set_model_field(c.model, name, value);
  } else if (section == "training") {
    if (name == "seed" || name == "diffusion_steps")
      throw ConfigError("unknown key '" + key + "' (use " + (name == "seed" ? "seed" : "schedule.training_steps") + ")");
    training::set_train_field(c.train, name, value);
  } else if (section == "schedule") {
    if (name == "training_steps") c.train.diffusion_steps = static_cast<int>(parse_size(key, value));
    else if (name == "inference_steps") c.inference_steps = static_cast<int>(parse_size(key, value));
    else throw ConfigError("unknown key '" + key + "'");
  } else if (section == "eval") {
    if (name == "metrics") c.metrics = split_list(value);
    else if (name == "ablation_steps") c.ablation_steps = parse_int_list(key, value);
    else throw ConfigError("unknown key '" + key + "'");
  } else {
    throw ConfigError("unknown section '" + section + "' in key '" + key + "'");
  }
}

// Prefixes every "key = value" line of a section's text form.
std::string prefixed(const std::string& section, const std::string& text, const std::set<std::string>& skip = {}) {
  std::string out;
  for (const auto& [k, v] : key_value_lines(text, section))
    if (!skip.count(k)) out += section + "." + k + " = " + v + "\n";
  return out;
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version " + std::to_string(c.schema_version) + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  network::validate(c.model);
  training::TrainConfig t = c.train;
  t.seed = c.seed;
  training::validate(t);
  const std::size_t m = c.model.length_multiple();
  if (c.train.crop_min % m != 0 || c.train.crop_max % m != 0)
    throw ConfigError("training crop bounds must be multiples of the model length multiple " + std::to_string(m));
  if (c.inference_steps < 1) throw ConfigError("schedule.inference_steps must be >= 1");
  eval::check_metrics(c.metrics);
  if (c.ablation_steps.empty()) throw ConfigError("eval.ablation_steps must not be empty");
  for (int s : c.ablation_steps)
    if (s < 1) throw ConfigError("eval.ablation_steps entries must be >= 1");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  bool has_version = false;
  for (const auto& [key, value] : key_value_lines(text, "run config")) {
    if (!seen.insert(key).second) {
      problems.push_back("duplicate key '" + key + "'");
      continue;
    }
    has_version = has_version || key == "schema_version";
    try {
      set_field(c, key, value);
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
    }
  }
  if (!has_version) problems.insert(problems.begin(), "missing schema_version");
  if (problems.empty()) {
    try {
      validate(c);
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  c.train.seed = c.seed;
  return c;
}

std::string to_text(const RunConfig& c) {
  std::string out = "schema_version = " + std::to_string(c.schema_version) + "\nseed = " + std::to_string(c.seed) + "\n";
  out += prefixed("model", network::to_text(c.model));
  out += prefixed("training", training::to_text(c.train), {"seed", "diffusion_steps"});
  out += "schedule.training_steps = " + std::to_string(c.train.diffusion_steps) + "\n";
  out += "schedule.inference_steps = " + std::to_string(c.inference_steps) + "\n";
  out += "eval.metrics = " + join_strings(c.metrics) + "\n";
  out += "eval.ablation_steps = " + join_ints(c.ablation_steps) + "\n";
  return out;
}

std::size_t regulated_length(std::size_t frames, std::size_t frame_hop, std::size_t multiple) {
  if (frames == 0 || frame_hop == 0 || multiple == 0) throw ValidationError("condition track is empty");
  const std::size_t n = frames * frame_hop;
  const std::size_t k = (n + multiple / 2) / multiple;
  return std::max<std::size_t>(k, 1) * multiple;
}

network::ConditionFeatures fit_condition(const network::ConditionFeatures& c, std::size_t frames) {
  const std::size_t have = c.frames();
  if (frames <= have) return network::crop(c, 0, frames);
  network::ConditionFeatures out = c;
  out.phoneme_ids.resize(frames, 0);
  out.pitch_hz.resize(frames, 0.0);
  if (!out.durations.empty()) out.durations.push_back(static_cast<int>(frames - have));
  return out;
}

}  // namespace smoothsinger::cli
