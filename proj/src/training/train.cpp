#include "smoothsinger/training/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/diffusion/diffusion.hpp"
#include "smoothsinger/errors.hpp"
#include "smoothsinger/numerics/ops.hpp"
#include "smoothsinger/text.hpp"
#include "smoothsinger/training/checkpoint.hpp"

namespace smoothsinger::training {

namespace fs = std::filesystem;
namespace ops = numerics;
using numerics::Var;

void validate(const TrainConfig& c) {
  if (c.total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (c.phase1_steps < 0 || c.phase1_steps > c.total_steps)
    throw ConfigError("phase1_steps must lie in [0, total_steps]");
  if (!(c.degraded_probability >= 0 && c.degraded_probability <= 1))
    throw ConfigError("degraded_probability must lie in [0, 1]");
  if (c.crop_min == 0 || c.crop_min % 256 != 0 || c.crop_max % 256 != 0 || c.crop_max < c.crop_min)
    throw ConfigError("crop_min and crop_max must be positive multiples of 256 with crop_min <= crop_max");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(c.lr_start > 0) || !(c.lr_end > 0)) throw ConfigError("lr_start and lr_end must be positive");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1))
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  if (!(c.adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (!(c.weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (c.diffusion_steps < 1) throw ConfigError("diffusion_steps must be >= 1");
  if (!(c.degrade_noise_scale >= 0)) throw ConfigError("degrade_noise_scale must be >= 0");
  if (c.checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
}

void set_train_field(TrainConfig& c, const std::string& key, const std::string& value) {
  auto steps = [&] { return static_cast<std::int64_t>(parse_size(key, value)); };
  if (key == "total_steps") c.total_steps = steps();
  else if (key == "phase1_steps") c.phase1_steps = steps();
  else if (key == "degraded_probability") c.degraded_probability = parse_real(key, value);
  else if (key == "crop_min") c.crop_min = parse_size(key, value);
  else if (key == "crop_max") c.crop_max = parse_size(key, value);
  else if (key == "batch_size") c.batch_size = parse_size(key, value);
  else if (key == "lr_start") c.lr_start = parse_real(key, value);
  else if (key == "lr_end") c.lr_end = parse_real(key, value);
  else if (key == "beta1") c.beta1 = parse_real(key, value);
  else if (key == "beta2") c.beta2 = parse_real(key, value);
  else if (key == "adam_eps") c.adam_eps = parse_real(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_real(key, value);
  else if (key == "diffusion_steps") c.diffusion_steps = static_cast<int>(parse_size(key, value));
  else if (key == "degrade_noise_scale") c.degrade_noise_scale = parse_real(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = steps();
  else if (key == "seed") c.seed = parse_size(key, value);
  else throw ConfigError("unknown training key '" + key + "'");
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "total_steps = " << c.total_steps << "\n"
      << "phase1_steps = " << c.phase1_steps << "\n"
      << "degraded_probability = " << real_text(c.degraded_probability) << "\n"
      << "crop_min = " << c.crop_min << "\n"
      << "crop_max = " << c.crop_max << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "lr_start = " << real_text(c.lr_start) << "\n"
      << "lr_end = " << real_text(c.lr_end) << "\n"
      << "beta1 = " << real_text(c.beta1) << "\n"
      << "beta2 = " << real_text(c.beta2) << "\n"
      << "adam_eps = " << real_text(c.adam_eps) << "\n"
      << "weight_decay = " << real_text(c.weight_decay) << "\n"
      << "diffusion_steps = " << c.diffusion_steps << "\n"
      << "degrade_noise_scale = " << real_text(c.degrade_noise_scale) << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n"
      << "seed = " << c.seed << "\n";
  return out.str();
}

std::string format_loss_log(const std::vector<LossRecord>& log) {
  std::string out = "step\tloss\tlr\n";
  for (const auto& r : log) out += std::to_string(r.step) + "\t" + real_text(r.loss) + "\t" + real_text(r.lr) + "\n";
  return out;
}

std::vector<LossRecord> parse_loss_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<LossRecord> out;
  if (!std::getline(in, line) || trim(line) != "step\tloss\tlr") throw ValidationError("loss log: missing header");
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    LossRecord r;
    if (!(row >> r.step >> r.loss >> r.lr)) throw ValidationError("loss log line " + std::to_string(n) + ": malformed");
    out.push_back(r);
  }
  return out;
}

fs::path checkpoint_path(const fs::path& out_dir, std::int64_t step) {
  char name[48];
  std::snprintf(name, sizeof name, "checkpoint-%07lld.ssck", static_cast<long long>(step));
  return out_dir / name;
}

TrainResult train(const TrainConfig& config, const std::vector<UtteranceRecord>& dataset, network::Model& model,
                  const TrainOptions& options) {
  validate(config);
  if (dataset.empty()) throw ValidationError("train: dataset is empty");
  const auto& mc = model.config();
  if (config.crop_min % mc.length_multiple() != 0 || config.crop_max % mc.length_multiple() != 0)
    throw ConfigError("crop bounds must be multiples of the model length multiple " +
                      std::to_string(mc.length_multiple()));

  AdamW optimizer(model.parameters(), {config.beta1, config.beta2, config.adam_eps, config.weight_decay});
  TrainResult result;
  std::vector<LossRecord> history;
  std::int64_t start = 0;
  if (options.resume_from) {
    restore(read_checkpoint(*options.resume_from), model, &optimizer);
    start = static_cast<std::int64_t>(optimizer.updates());
    if (!options.out_dir.empty() && fs::exists(options.out_dir / "loss.tsv"))
      for (const auto& r : parse_loss_log(read_file(options.out_dir / "loss.tsv")))
        if (r.step < start) history.push_back(r);
  }
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  const auto schedule = diffusion::make_default_linear_schedule(config.diffusion_steps);
  const CropConfig crop_config{config.crop_min, config.crop_max, mc.length_multiple(), mc.frame_hop};
  dsp::DegradationConfig degradation;
  degradation.noise_scale = config.degrade_noise_scale;

  auto write_outputs = [&](std::int64_t completed) {
    if (options.out_dir.empty()) return;
    const auto path = checkpoint_path(options.out_dir, completed);
    save_checkpoint(path, model, optimizer, static_cast<std::uint64_t>(completed));
    result.checkpoints.push_back(path);
    std::vector<LossRecord> all = history;
    all.insert(all.end(), result.log.begin(), result.log.end());
    write_file_atomic(options.out_dir / "loss.tsv", format_loss_log(all));
  };

  const std::int64_t end = options.stop_after ? std::min(*options.stop_after, config.total_steps) : config.total_steps;
  for (std::int64_t step = start; step < end; ++step) {
    Rng rng = derive_stream(config.seed, static_cast<std::uint64_t>(step));
    const int phase = step < config.phase1_steps ? 1 : 2;
    LossRecord record;
    record.step = step;
    record.lr = log_linear_lr(step, config.total_steps, config.lr_start, config.lr_end);

    optimizer.zero_grad();
    std::optional<Var> total;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      std::optional<Crop> crop;
      for (int attempt = 0; attempt < 16 && !crop; ++attempt) {
        const auto& rec = dataset[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(dataset.size()) - 1))];
        crop = sample_crop(load_utterance(rec, mc.frame_hop), rng, crop_config, &result.warnings);
      }
      if (!crop) throw ValidationError("train: no utterance is long enough for crop_min " + std::to_string(config.crop_min));
      const auto ref = choose_reference(crop->target, crop->reference, phase, rng, config.degraded_probability, degradation);
      record.degraded_reference = record.degraded_reference || ref.degraded;

      const Tensor x0({1, crop->length}, crop->target.samples);
      const Tensor reference({1, crop->length}, ref.audio.samples);
      const ConditionFeatures& cond = crop->condition;
      diffusion::NoisePredictor predictor = [&](const Tensor& x_t, double t) {
        return model.forward(x_t, reference, cond, t).output;
      };
      Var loss = diffusion::training_loss(predictor, x0, schedule, rng);
      total = total ? ops::add(*total, loss) : loss;
    }
    Var loss = config.batch_size == 1 ? *total : ops::scale(*total, 1.0 / static_cast<double>(config.batch_size));
    record.loss = loss.value()[0];
    if (!std::isfinite(record.loss)) {
      const std::string last = result.checkpoints.empty() ? (options.resume_from ? options.resume_from->string() : "none")
                                                          : result.checkpoints.back().string();
      throw RuntimeError("non-finite loss at step " + std::to_string(step) + "; last checkpoint: " + last);
    }
    numerics::backward(loss);
    optimizer.step(record.lr);
    result.log.push_back(record);
    if (options.on_step) options.on_step(record);

    const std::int64_t completed = step + 1;
    if (completed % config.checkpoint_every == 0 || completed == end) write_outputs(completed);
  }
  if (start >= end) write_outputs(start);
  return result;
}

}  // namespace smoothsinger::training
