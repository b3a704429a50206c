#include "smoothsinger/eval/harness.hpp"

#include <algorithm>

#include "smoothsinger/errors.hpp"
#include "smoothsinger/eval/metrics.hpp"
#include "smoothsinger/numerics/autograd.hpp"
#include "smoothsinger/text.hpp"

namespace smoothsinger::eval {

diffusion::NoiseSchedule inference_schedule(int steps) {
  if (steps < 1) throw ValidationError("sampling steps must be >= 1, got " + std::to_string(steps));
  return steps == 4 ? diffusion::make_short_schedule() : diffusion::make_default_linear_schedule(steps);
}

Waveform synthesize(const network::Model& model, const Waveform& reference, const network::ConditionFeatures& c,
                    const diffusion::NoiseSchedule& schedule, int training_steps, Rng& rng) {
  const std::size_t L = reference.size();
  const numerics::Tensor ref({1, L}, reference.samples);
  const auto training = diffusion::make_default_linear_schedule(training_steps);
  diffusion::NoisePredictor predictor = [&](const numerics::Tensor& x_t, double t) {
    return model.forward(x_t, ref, c, t).output;
  };
  const auto x = diffusion::sample(predictor, {1, L}, schedule, rng, diffusion::align_steps(schedule, training));
  Waveform out;
  out.sample_rate = reference.sample_rate;
  out.samples.assign(x.data(), x.data() + x.size());
  return out;
}

void check_metrics(const std::vector<std::string>& metrics) {
  if (metrics.empty()) throw ValidationError("no metrics requested");
  const auto& ok = supported_metrics();
  for (const auto& m : metrics)
    if (std::find(ok.begin(), ok.end(), m) == ok.end()) {
      std::string list;
      for (const auto& s : ok) list += (list.empty() ? "" : ", ") + s;
      throw ValidationError("unknown metric '" + m + "'; supported: " + list);
    }
}

std::vector<NamedUtterance> load_set(const std::vector<training::UtteranceRecord>& records, std::size_t frame_hop) {
  std::vector<NamedUtterance> out;
  for (const auto& r : records) out.push_back({r.target.stem().string(), training::load_utterance(r, frame_hop)});
  return out;
}

training::Utterance fit_length(const training::Utterance& u, std::size_t multiple) {
  if (u.condition.frames() == 0 || u.target.size() % u.condition.frames() != 0)
    throw ValidationError("fit_length: condition frames do not divide the target length");
  const std::size_t hop = u.target.size() / u.condition.frames();
  const std::size_t L = u.target.size() / multiple * multiple;
  if (L == 0) throw ValidationError("utterance of " + std::to_string(u.target.size()) + " samples is shorter than " +
                                    std::to_string(multiple));
  training::Utterance out = u;
  out.target.samples.resize(L);
  out.reference.samples.resize(L);
  out.condition = network::crop(u.condition, 0, L / hop);
  return out;
}

MetricReport evaluate(const network::Model& model, const std::vector<NamedUtterance>& set, int steps,
                      const std::vector<std::string>& metrics, std::uint64_t seed, int training_steps) {
  check_metrics(metrics);
  if (set.empty()) throw ValidationError("evaluation set is empty");
  const auto schedule = inference_schedule(steps);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values(metrics.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto u = fit_length(set[i].utterance, model.config().length_multiple());
    Rng rng = derive_stream(seed, i);
    const Waveform y = synthesize(model, u.reference, u.condition, schedule, training_steps, rng);
    ids.push_back(set[i].id);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      if (metrics[m] == "snr") values[m].push_back(snr(u.target, y));
      else if (metrics[m] == "lsd") values[m].push_back(log_spectral_distance(u.target, y));
      else values[m].push_back(stoi(u.target, y));
    }
  }
  MetricReport r;
  r.section = "steps=" + std::to_string(steps);
  r.info["steps"] = std::to_string(steps);
  r.info["utterances"] = std::to_string(set.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) r.metrics.push_back(summarize(metrics[m], ids, values[m]));
  return r;
}

std::vector<MetricReport> step_ablation(const network::Model& model, const std::vector<NamedUtterance>& set,
                                        const std::vector<int>& steps, const std::vector<std::string>& metrics,
                                        std::uint64_t seed, int training_steps) {
  if (steps.empty()) throw ValidationError("step ablation needs at least one step count");
  for (int s : steps) inference_schedule(s);
  check_metrics(metrics);
  std::vector<MetricReport> out;
  for (int s : steps) out.push_back(evaluate(model, set, s, metrics, seed, training_steps));
  return out;
}

std::vector<MetricReport> stride_ablation(const std::vector<network::ModelConfig>& configs,
                                          const std::vector<training::UtteranceRecord>& train_set,
                                          const std::vector<NamedUtterance>& held_out,
                                          const training::TrainConfig& train_config,
                                          const std::vector<std::string>& metrics, int eval_steps) {
  if (configs.empty()) throw ValidationError("stride ablation needs at least one config");
  training::validate(train_config);
  check_metrics(metrics);
  inference_schedule(eval_steps);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::string where = "stride config " + std::to_string(i) + " [" + join(configs[i].strides) + "]: ";
    try {
      network::validate(configs[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    const std::size_t m = configs[i].length_multiple();
    if (train_config.crop_min % m != 0 || train_config.crop_max % m != 0)
      throw ConfigError(where + "stride product does not divide the crop bounds " + std::to_string(train_config.crop_min) +
                        " and " + std::to_string(train_config.crop_max));
  }
  std::vector<MetricReport> out;
  for (const auto& cfg : configs) {
    network::Model model(cfg);
    training::train(train_config, train_set, model);
    MetricReport r = evaluate(model, held_out, eval_steps, metrics, train_config.seed, train_config.diffusion_steps);
    r.section = "strides=" + join(cfg.strides);
    r.info["strides"] = join(cfg.strides);
    r.info["channels"] = join(cfg.channels);
    r.info["parameters"] = std::to_string(model.parameter_count());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace smoothsinger::eval
