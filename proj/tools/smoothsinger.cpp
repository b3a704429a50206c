#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/cli/run_config.hpp"
#include "smoothsinger/diffusion/diffusion.hpp"
#include "smoothsinger/dsp/degrade.hpp"
#include "smoothsinger/dsp/wav_io.hpp"
#include "smoothsinger/errors.hpp"
#include "smoothsinger/eval/harness.hpp"
#include "smoothsinger/text.hpp"
#include "smoothsinger/training/checkpoint.hpp"
#include "smoothsinger/training/dataset.hpp"
#include "smoothsinger/training/train.hpp"

namespace fs = std::filesystem;
using namespace smoothsinger;

namespace {

void log_config(const std::string& command, const std::string& text) {
  std::cerr << "[" << command << "] resolved config:\n";
  for (const auto& [k, v] : key_value_lines(text, command)) std::cerr << "  " << k << " = " << v << "\n";
}

void require_rate(const dsp::Waveform& w, const fs::path& path) {
  if (w.sample_rate != dsp::kDefaultSampleRate)
    throw ValidationError(path.string() + ": sample rate " + real_text(w.sample_rate) + " Hz; expected 24000 Hz");
}

cli::RunConfig load_run_config(const std::string& path) {
  if (path.empty()) {
    cli::RunConfig c;
    c.train.seed = c.seed;
    return c;
  }
  if (!fs::exists(path)) throw ValidationError("config file " + path + " does not exist");
  return cli::parse_run_config(read_file(path));
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

std::vector<training::UtteranceRecord> manifest_in(const fs::path& data_dir, const std::string& name) {
  const fs::path p = data_dir / name;
  if (!fs::exists(p)) throw ValidationError("missing manifest " + p.string());
  return training::read_manifest(p);
}

// make-toy-data --------------------------------------------------------------

struct ToyArgs {
  std::size_t n = 0;
  std::size_t held_out = 4;
  std::string out;
  std::uint64_t seed = 0;
};

int run_make_toy_data(const ToyArgs& a) {
  training::ToyDataConfig c;
  c.utterances = a.n;
  c.held_out = a.held_out;
  c.seed = a.seed;
  if (a.n == 0) throw ValidationError("--n must be at least 1");
  log_config("make-toy-data", "n = " + std::to_string(c.utterances) + "\nheld_out = " + std::to_string(c.held_out) +
                                  "\nseed = " + std::to_string(c.seed) + "\nout = " + a.out + "\n");
  training::make_toy_dataset(a.out, c);
  std::cerr << "wrote " << c.utterances << " training and " << c.held_out << " held-out utterances to " << a.out << "\n";
  return 0;
}

// degrade --------------------------------------------------------------------

struct DegradeArgs {
  std::string in, out, spec_out, replay;
  std::uint64_t seed = 0;
  double noise_scale = 1.0;
};

int run_degrade(const DegradeArgs& a) {
  const dsp::WavFile in = dsp::read_wav(a.in);
  require_rate(in.audio, a.in);
  std::vector<std::string> warnings;
  dsp::Waveform out;
  std::string spec_text;
  if (!a.replay.empty()) {
    const dsp::DegradationSpec spec = dsp::parse_degradation_spec(read_file(a.replay));
    if (spec.signal_length != in.audio.size())
      throw ValidationError("spec was recorded for " + std::to_string(spec.signal_length) + " samples; " + a.in +
                            " has " + std::to_string(in.audio.size()));
    log_config("degrade", "in = " + a.in + "\nout = " + a.out + "\nreplay = " + a.replay + "\n");
    out = dsp::apply_degradation(in.audio, spec, {}, &warnings);
    spec_text = dsp::serialize(spec);
  } else {
    dsp::DegradationConfig cfg;
    cfg.noise_scale = a.noise_scale;
    log_config("degrade", "in = " + a.in + "\nout = " + a.out + "\nseed = " + std::to_string(a.seed) +
                              "\nnoise_scale = " + real_text(a.noise_scale) + "\n");
    Rng rng = derive_stream(a.seed, 0);
    auto r = dsp::degrade(in.audio, rng, cfg);
    out = std::move(r.audio);
    warnings = std::move(r.warnings);
    spec_text = dsp::serialize(r.spec);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  dsp::write_wav(a.out, out, in.encoding);
  if (!a.spec_out.empty()) write_file_atomic(a.spec_out, spec_text);
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, resume;
  std::uint64_t seed = 0;
  std::int64_t stop_after = 0;
  std::int64_t log_every = 50;
};

int run_train(const TrainArgs& a, bool seed_given) {
  cli::RunConfig rc = load_run_config(a.config);
  if (seed_given) rc.seed = rc.train.seed = a.seed;
  const auto records = manifest_in(a.data, "manifest.tsv");
  if (records.empty()) throw ValidationError("training manifest is empty");
  const std::string text = cli::to_text(rc);
  log_config("train", text);
  fs::create_directories(a.out);
  write_file_atomic(fs::path(a.out) / "config.txt", text);

  network::Model model(rc.model);
  training::TrainOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  if (a.stop_after > 0) opts.stop_after = a.stop_after;
  opts.on_step = [&](const training::LossRecord& r) {
    if (a.log_every > 0 && (r.step % a.log_every == 0 || r.step + 1 == rc.train.total_steps))
      std::fprintf(stderr, "step %lld loss %.6f lr %.3g\n", static_cast<long long>(r.step), r.loss, r.lr);
  };
  const auto result = training::train(rc.train, records, model, opts);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& p : result.checkpoints) std::cerr << "checkpoint " << p.string() << "\n";
  return 0;
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string checkpoint, condition, reference, out, config;
  int steps = 4;
  std::uint64_t seed = 0;
  std::string encoding = "float32";
};

int run_synth(const SynthArgs& a) {
  if (a.reference.empty())
    throw ValidationError("--reference is required: the model is conditioned on reference audio");
  const cli::RunConfig rc = load_run_config(a.config);
  const auto schedule = eval::inference_schedule(a.steps);
  const network::Model model = training::load_model(a.checkpoint);
  const auto& mc = model.config();
  auto cond = training::parse_condition(read_file(a.condition));
  network::validate(cond, mc);
  dsp::Waveform reference = dsp::read_wav(a.reference).audio;
  require_rate(reference, a.reference);

  log_config("synth", "checkpoint = " + a.checkpoint + "\ncondition = " + a.condition + "\nreference = " +
                          a.reference + "\nsteps = " + std::to_string(a.steps) + "\nseed = " + std::to_string(a.seed) +
                          "\ntraining_steps = " + std::to_string(rc.train.diffusion_steps) + "\nencoding = " +
                          a.encoding + "\n");
  const std::size_t L = cli::regulated_length(cond.frames(), mc.frame_hop, mc.length_multiple());
  if (L != cond.frames() * mc.frame_hop)
    std::cerr << "condition of " << cond.frames() << " frames regulated to " << L << " samples ("
              << L / mc.frame_hop << " frames)\n";
  cond = cli::fit_condition(cond, L / mc.frame_hop);
  if (reference.size() != L) {
    std::cerr << "reference of " << reference.size() << " samples " << (reference.size() > L ? "trimmed" : "padded")
              << " to " << L << "\n";
    reference.samples.resize(L, 0.0);
  }
  Rng rng = derive_stream(a.seed, 0);
  const dsp::Waveform y = eval::synthesize(model, reference, cond, schedule, rc.train.diffusion_steps, rng);
  dsp::write_wav(a.out, y, a.encoding == "pcm16" ? dsp::WavEncoding::Pcm16 : dsp::WavEncoding::Float32);
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, out, json, config, metrics, ablation_steps;
  int steps = 0;
  bool step_ablation = false, stride_ablation = false;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a, bool seed_given) {
  cli::RunConfig rc = load_run_config(a.config);
  if (seed_given) rc.seed = rc.train.seed = a.seed;
  if (!a.metrics.empty()) rc.metrics = split_names(a.metrics);
  if (a.steps > 0) rc.inference_steps = a.steps;
  if (!a.ablation_steps.empty()) {
    rc.ablation_steps.clear();
    for (auto v : parse_size_list("ablation-steps", a.ablation_steps)) rc.ablation_steps.push_back(static_cast<int>(v));
  }
  cli::validate(rc);
  const network::Model model = training::load_model(a.checkpoint);
  const auto held = eval::load_set(manifest_in(a.data, "heldout.tsv"), model.config().frame_hop);
  if (held.empty()) throw ValidationError("held-out set " + (fs::path(a.data) / "heldout.tsv").string() + " is empty");
  std::vector<network::ModelConfig> stride_configs;
  std::vector<training::UtteranceRecord> train_set;
  if (a.stride_ablation) {
    stride_configs = network::ablation_stride_configs(rc.model);
    train_set = manifest_in(a.data, "manifest.tsv");
  }
  log_config("eval", cli::to_text(rc) + "checkpoint = " + a.checkpoint + "\nstep_ablation = " +
                         (a.step_ablation ? "true" : "false") + "\nstride_ablation = " +
                         (a.stride_ablation ? "true" : "false") + "\n");

  std::vector<eval::MetricReport> reports;
  if (a.step_ablation) {
    reports = eval::step_ablation(model, held, rc.ablation_steps, rc.metrics, rc.seed, rc.train.diffusion_steps);
  } else {
    reports.push_back(eval::evaluate(model, held, rc.inference_steps, rc.metrics, rc.seed, rc.train.diffusion_steps));
  }
  if (a.stride_ablation) {
    auto more = eval::stride_ablation(stride_configs, train_set, held, rc.train, rc.metrics, rc.inference_steps);
    reports.insert(reports.end(), more.begin(), more.end());
  }
  write_file_atomic(a.out, eval::format_tsv(reports));
  if (!a.json.empty()) write_file_atomic(a.json, eval::format_json(reports));
  return 0;
}

// inspect-schedule -----------------------------------------------------------

int run_inspect_schedule(const std::string& kind, int steps, bool steps_given) {
  diffusion::NoiseSchedule s;
  if (kind == "short") {
    if (steps_given && steps != 4) throw ValidationError("the short schedule has 4 steps; got --steps " + std::to_string(steps));
    s = diffusion::make_short_schedule();
  } else {
    if (steps < 1) throw ValidationError("--steps must be >= 1, got " + std::to_string(steps));
    s = diffusion::make_default_linear_schedule(steps);
  }
  log_config("inspect-schedule", "kind = " + kind + "\nsteps = " + std::to_string(s.steps()) + "\n");
  std::cout << diffusion::schedule_table(s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-conditioned waveform diffusion for singing voice"};
  app.require_subcommand(1);

  ToyArgs toy;
  auto* toy_cmd = app.add_subcommand("make-toy-data", "Write the synthetic corpus, manifests and condition files");
  toy_cmd->add_option("--n", toy.n, "Number of training utterances")->required();
  toy_cmd->add_option("--out", toy.out, "Output directory")->required();
  toy_cmd->add_option("--seed", toy.seed, "Random seed");
  toy_cmd->add_option("--held-out", toy.held_out, "Number of held-out utterances");

  DegradeArgs deg;
  auto* deg_cmd = app.add_subcommand("degrade", "Corrupt a WAV file and record a replayable spec");
  deg_cmd->add_option("--in", deg.in, "Input mono WAV")->required();
  deg_cmd->add_option("--out", deg.out, "Output WAV")->required();
  auto* deg_seed = deg_cmd->add_option("--seed", deg.seed, "Random seed");
  deg_cmd->add_option("--spec-out", deg.spec_out, "Where to write the degradation spec");
  deg_cmd->add_option("--replay", deg.replay, "Apply a recorded spec instead of sampling")->excludes(deg_seed);
  deg_cmd->add_option("--noise-scale", deg.noise_scale, "Additive noise standard deviation in sample units");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a model on a manifest");
  tr_cmd->add_option("--config", tr.config, "Run config file")->required();
  tr_cmd->add_option("--data", tr.data, "Dataset directory holding manifest.tsv")->required();
  tr_cmd->add_option("--out", tr.out, "Directory for checkpoints and loss.tsv")->required();
  auto* tr_seed = tr_cmd->add_option("--seed", tr.seed, "Override the config seed");
  tr_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  tr_cmd->add_option("--stop-after", tr.stop_after, "Stop after this many completed steps");
  tr_cmd->add_option("--log-every", tr.log_every, "Print the loss every N steps (0 = never)");

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "Sample a waveform from a condition track and reference audio");
  sy_cmd->add_option("--checkpoint", sy.checkpoint, "Model checkpoint")->required();
  sy_cmd->add_option("--condition", sy.condition, "Condition track (TSV)")->required();
  sy_cmd->add_option("--reference", sy.reference, "Reference WAV");
  sy_cmd->add_option("--steps", sy.steps, "Sampling steps (4 uses the short schedule)");
  sy_cmd->add_option("--out", sy.out, "Output WAV")->required();
  sy_cmd->add_option("--seed", sy.seed, "Random seed");
  sy_cmd->add_option("--config", sy.config, "Run config (for schedule.training_steps)");
  sy_cmd->add_option("--encoding", sy.encoding, "Output encoding")->check(CLI::IsMember({"float32", "pcm16"}));

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score a checkpoint on the held-out set");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  ev_cmd->add_option("--data", ev.data, "Dataset directory holding heldout.tsv")->required();
  ev_cmd->add_option("--metrics", ev.metrics, "Comma-separated metric names");
  ev_cmd->add_option("--out", ev.out, "Report (TSV)")->required();
  ev_cmd->add_option("--json", ev.json, "Also write the report as JSON");
  ev_cmd->add_option("--steps", ev.steps, "Sampling steps");
  ev_cmd->add_flag("--step-ablation", ev.step_ablation, "One section per entry of eval.ablation_steps");
  ev_cmd->add_option("--ablation-steps", ev.ablation_steps, "Override eval.ablation_steps");
  ev_cmd->add_flag("--stride-ablation", ev.stride_ablation, "Train and score each stride set");
  ev_cmd->add_option("--config", ev.config, "Run config file");
  auto* ev_seed = ev_cmd->add_option("--seed", ev.seed, "Override the config seed");

  std::string kind = "linear";
  int sched_steps = 100;
  auto* sc_cmd = app.add_subcommand("inspect-schedule", "Print a noise schedule table");
  sc_cmd->add_option("--kind", kind, "Schedule kind")->check(CLI::IsMember({"linear", "short"}));
  auto* sc_steps = sc_cmd->add_option("--steps", sched_steps, "Number of steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (*toy_cmd) return run_make_toy_data(toy);
    if (*deg_cmd) return run_degrade(deg);
    if (*tr_cmd) return run_train(tr, tr_seed->count() > 0);
    if (*sy_cmd) return run_synth(sy);
    if (*ev_cmd) return run_eval(ev, ev_seed->count() > 0);
    if (*sc_cmd) return run_inspect_schedule(kind, sched_steps, sc_steps->count() > 0);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
