#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smoothsinger/diffusion/diffusion.hpp"
#include "smoothsinger/eval/report.hpp"
#include "smoothsinger/network/model.hpp"
#include "smoothsinger/training/dataset.hpp"
#include "smoothsinger/training/train.hpp"

namespace smoothsinger::eval {

using dsp::Waveform;

// 4 steps -> make_short_schedule(), otherwise make_default_linear_schedule(steps).
diffusion::NoiseSchedule inference_schedule(int steps);

// Reverse diffusion from noise with the reference and condition bound in.
// Inference steps are mapped onto the training schedule with align_steps.
Waveform synthesize(const network::Model& model, const Waveform& reference, const network::ConditionFeatures& c,
                    const diffusion::NoiseSchedule& schedule, int training_steps, Rng& rng);

inline const std::vector<std::string>& supported_metrics() {
  static const std::vector<std::string> names{"snr", "lsd", "stoi"};
  return names;
}
// Throws ValidationError listing the supported names.
void check_metrics(const std::vector<std::string>& metrics);

struct NamedUtterance {
  std::string id;
  training::Utterance utterance;
};

// Loads a manifest; ids are target file stems.
std::vector<NamedUtterance> load_set(const std::vector<training::UtteranceRecord>& records, std::size_t frame_hop);

// Trims the utterance to a multiple of the model's length multiple.
training::Utterance fit_length(const training::Utterance& u, std::size_t multiple);

// Synthesizes every utterance with the given schedule (utterance i uses
// derive_stream(seed, i)) and scores the result against its target.
MetricReport evaluate(const network::Model& model, const std::vector<NamedUtterance>& set, int steps,
                      const std::vector<std::string>& metrics, std::uint64_t seed, int training_steps = 100);

// One section per step count.
std::vector<MetricReport> step_ablation(const network::Model& model, const std::vector<NamedUtterance>& set,
                                        const std::vector<int>& steps, const std::vector<std::string>& metrics,
                                        std::uint64_t seed, int training_steps = 100);

// Trains one model per config with the same training config and data, then
// evaluates each with eval_steps sampling steps. All configs are validated
// before any training starts. Sections carry the strides and parameter count.
std::vector<MetricReport> stride_ablation(const std::vector<network::ModelConfig>& configs,
                                          const std::vector<training::UtteranceRecord>& train_set,
                                          const std::vector<NamedUtterance>& held_out,
                                          const training::TrainConfig& train_config,
                                          const std::vector<std::string>& metrics, int eval_steps = 4);

}  // namespace smoothsinger::eval
