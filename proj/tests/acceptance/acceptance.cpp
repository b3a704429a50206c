// Runs the twelve acceptance criteria and prints one PASS/FAIL line each.
// Usage: acceptance --cli <path to smoothsinger> --work <scratch dir> [--only 1,5,9]

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/diffusion/diffusion.hpp"
#include "smoothsinger/dsp/degrade.hpp"
#include "smoothsinger/dsp/stft.hpp"
#include "smoothsinger/dsp/wav_io.hpp"
#include "smoothsinger/errors.hpp"
#include "smoothsinger/eval/harness.hpp"
#include "smoothsinger/eval/metrics.hpp"
#include "smoothsinger/network/model.hpp"
#include "smoothsinger/numerics/attention.hpp"
#include "smoothsinger/numerics/gradcheck.hpp"
#include "smoothsinger/text.hpp"
#include "smoothsinger/training/checkpoint.hpp"
#include "smoothsinger/training/dataset.hpp"
#include "smoothsinger/training/train.hpp"
#include "test_oracles.hpp"

namespace fs = std::filesystem;
using namespace smoothsinger;
namespace ops = smoothsinger::numerics;
using network::ConditionFeatures;
using network::Model;
using network::ModelConfig;
using numerics::Tensor;
using numerics::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(const ops::Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * standard_normal(rng);
  return t;
}

dsp::Waveform noise_wave(std::size_t n, Rng& rng, double scale = 0.3) {
  dsp::Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(scale * standard_normal(rng));
  return w;
}

double snr_db(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0, e = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += x[i] * x[i];
    e += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return e == 0 ? INFINITY : 10 * std::log10(s / e);
}

ConditionFeatures random_condition(std::size_t frames, std::uint64_t seed, std::size_t vocab) {
  Rng rng(seed);
  ConditionFeatures c;
  while (c.frames() < frames) {
    const int id = static_cast<int>(uniform_int(rng, 0, static_cast<std::int64_t>(vocab) - 1));
    const int d = static_cast<int>(std::min<std::int64_t>(uniform_int(rng, 1, 3), static_cast<std::int64_t>(frames - c.frames())));
    const double f0 = uniform(rng, 0, 1) < 0.2 ? 0.0 : uniform(rng, 100, 600);
    for (int k = 0; k < d; ++k) {
      c.phoneme_ids.push_back(id);
      c.pitch_hz.push_back(f0);
    }
    c.durations.push_back(d);
  }
  return c;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.channels = {4, 8, 8};
  c.top_channels = 4;
  c.lowf_channels = 4;
  c.attention_window = 4;
  c.embed_dim = 4;
  c.step_embed_dim = 4;
  c.step_hidden = 8;
  c.phoneme_vocab = 8;
  c.pitch_bins = 8;
  return c;
}

// 1 -----------------------------------------------------------------------------------------------
Outcome stft_round_trip() {
  Rng rng(1001);
  double worst = INFINITY;
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 25600, 51200));
    const auto x = noise_wave(n, rng);
    const auto y = dsp::istft(dsp::stft(x), n);
    if (y.size() != n) return {false, "istft returned " + std::to_string(y.size()) + " samples for " + std::to_string(n)};
    worst = std::min(worst, snr_db(x.samples, y.samples));
  }
  return {worst > 60.0, "min snr " + fmt("%.1f", worst) + " dB over 100 signals"};
}

// 2 -----------------------------------------------------------------------------------------------
Outcome degradation_containment() {
  Rng src(2002);
  const auto x = noise_wave(26000, src);
  std::array<int, 4> seen{};
  std::size_t outside_checked = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng = derive_stream(2002, seed);
    const auto r = dsp::degrade(x, rng);
    const auto& s = r.spec;
    const std::string at = "draw " + std::to_string(seed) + ": ";
    if (r.audio.size() != x.size()) return {false, at + "length changed"};
    if (s.regions.size() < 3 || s.regions.size() > 10) return {false, at + "region count " + std::to_string(s.regions.size())};
    for (const auto& g : s.regions)
      if (g.length < 500 || g.length > 2000 || g.end() > x.size()) return {false, at + "region length " + std::to_string(g.length)};
    if (s.methods == 0) return {false, at + "no method applied"};
    for (int m = 0; m < 4; ++m) seen[m] += (s.methods >> m) & 1u;
    if (s.has(dsp::DegradationMethod::Noise) && !(s.alpha >= 0.8 && s.alpha <= 1.05)) return {false, at + "alpha " + fmt("%g", s.alpha)};
    if (s.has(dsp::DegradationMethod::Amplitude) && !(s.beta >= 0.8 && s.beta <= 1.05)) return {false, at + "beta " + fmt("%g", s.beta)};
    if (s.has(dsp::DegradationMethod::Distortion) && !(s.gamma >= 0.9 && s.gamma <= 1.2)) return {false, at + "gamma " + fmt("%g", s.gamma)};
    if (s.has(dsp::DegradationMethod::Frequency))
      for (const auto& [bin, sigma] : s.band_scales)
        if (!(sigma >= 0.8 && sigma <= 1.1)) return {false, at + "sigma " + fmt("%g", sigma)};
    // Time-domain methods only: everything outside the regions is untouched.
    if (!s.has(dsp::DegradationMethod::Frequency)) {
      std::vector<char> inside(x.size(), 0);
      for (const auto& g : s.regions) std::fill(inside.begin() + static_cast<long>(g.start), inside.begin() + static_cast<long>(g.end()), 1);
      for (std::size_t t = 0; t < x.size(); ++t)
        if (!inside[t]) {
          ++outside_checked;
          if (std::memcmp(&r.audio.samples[t], &x.samples[t], sizeof(double)) != 0)
            return {false, at + "sample " + std::to_string(t) + " outside every region changed"};
        }
    }
  }
  for (int m = 0; m < 4; ++m)
    if (seen[m] == 0) return {false, "method " + std::to_string(m) + " never drawn"};
  return {true, "10000 draws in range; " + std::to_string(outside_checked) + " out-of-region samples bit-identical"};
}

// 3 -----------------------------------------------------------------------------------------------
Outcome forward_statistics() {
  const auto s = diffusion::make_default_linear_schedule(100);
  // Closed form from the betas alone.
  std::vector<double> abar(101, 1.0);
  for (int t = 1; t <= 100; ++t) abar[t] = abar[t - 1] * (1.0 - s.beta(t));
  double worst = 0;
  for (double x0 : {1.0, -0.5}) {
    Rng rng = derive_stream(3003, static_cast<std::uint64_t>(x0 * 10 + 10));
    Tensor x({10000}, x0);
    for (int t = 1; t <= 100; ++t) {
      x = diffusion::forward_step(x, t, s, rng);
      if (t % 10 != 0) continue;
      double m = 0, v = 0;
      for (std::size_t i = 0; i < x.size(); ++i) m += x[i];
      m /= static_cast<double>(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) v += (x[i] - m) * (x[i] - m);
      v /= static_cast<double>(x.size() - 1);
      const double mean = std::sqrt(abar[t]) * x0, sd = std::sqrt(1 - abar[t]);
      // Mean error relative to the marginal's spread; spread as a ratio.
      worst = std::max({worst, std::abs(m - mean) / sd, std::abs(std::sqrt(v) / sd - 1)});
    }
  }
  return {worst < 0.02, "max moment deviation " + fmt("%.4f", worst) + " (10 checkpoints x 2 starts, 1e4 trials)"};
}

// 4 -----------------------------------------------------------------------------------------------
Outcome exact_inversion() {
  const auto s = diffusion::make_default_linear_schedule(100);
  Rng rng(4004);
  const Tensor x0 = random_tensor({1, 4096}, rng, 0.5), eps = random_tensor({1, 4096}, rng);
  Tensor x = diffusion::forward_marginal(x0, 100, eps, s);
  for (int t = 100; t >= 1; --t) {
    Tensor oracle(x.shape());
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1 - s.alpha_bar(t));
    for (std::size_t i = 0; i < x.size(); ++i) oracle[i] = (x[i] - a * x0[i]) / b;
    x = diffusion::reverse_mean(oracle, x, t, s);
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - x0[i]) * (x[i] - x0[i]);
    den += x0[i] * x0[i];
  }
  const double rel = std::sqrt(num / den);
  return {rel < 1e-6, "relative L2 error " + fmt("%.3g", rel)};
}

// 5 -----------------------------------------------------------------------------------------------
Outcome reference_neutral() {
  Model m(ModelConfig{});
  const std::size_t L = 25600;
  Rng rng(5005);
  const auto c = random_condition(L / 128, 5006, 64);
  ops::NoGradGuard none;
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor x = random_tensor({1, L}, rng);
    const double step = uniform(rng, 1, 100);
    const Tensor a = m.forward(x, random_tensor({1, L}, rng), c, step).output.value();
    const Tensor b = m.forward(x, random_tensor({1, L}, rng, 3.0), c, step).output.value();
    const Tensor z = m.forward(x, Tensor({1, L}), c, step).output.value();
    if (!std::ranges::equal(a.values(), b.values()) || !std::ranges::equal(a.values(), z.values()))
      return {false, "trial " + std::to_string(trial) + ": outputs differ"};
  }
  return {true, "3 trials x 3 references, element-wise identical"};
}

// 6 -----------------------------------------------------------------------------------------------
void randomize(Model& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : m.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += 0.3 * uniform(rng, -1, 1);
}

Var weighted(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return ops::weighted_sum(y, random_tensor(y.shape(), rng));
}

std::vector<ops::Parameter*> with_prefix(Model& m, const std::string& prefix) {
  std::vector<ops::Parameter*> out;
  for (auto* p : m.parameters())
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
  return out;
}

network::ConditionEmbedding frozen(const network::ConditionEmbedding& e) {
  network::ConditionEmbedding out;
  for (const auto& s : e.stages) out.stages.push_back(ops::constant(s.value()));
  out.step = ops::constant(e.step.value());
  return out;
}

Outcome gradient_checks() {
  const std::size_t L = 512;
  Model m(tiny_config());
  const auto& c = m.config();
  randomize(m, 103);
  Rng rng(203);
  const auto cond = random_condition(L / c.frame_hop, 303, c.phoneme_vocab);
  network::ConditionEmbedding emb;
  {
    ops::NoGradGuard none;
    emb = frozen(m.encode_condition(cond, 6.5, L));
  }
  std::vector<std::pair<std::string, double>> results;
  // Five-point differences at h = 1e-3: coordinates with gradients near 1e-7
  // sit below what two-point differences resolve against an O(1) loss.
  auto check = [&](const std::string& name, const std::function<Var()>& loss, std::vector<ops::Parameter*> params) {
    const auto r = ops::finite_difference_check(loss, params, 1e-3, 1, ops::Stencil::FivePoint);
    std::fprintf(stderr, "  [6] %s %.3g at %s analytic %.6g numeric %.6g\n", name.c_str(), r.max_relative_error,
                 r.worst_location.c_str(), r.analytic, r.numeric);
    results.emplace_back(name, r.max_relative_error);
  };
  for (std::size_t i = 0; i < c.stages(); ++i) {
    const std::size_t len = L / c.cumulative_stride(i);
    const std::size_t in_ch = i == 0 ? 1 : c.channels[i - 1];
    const std::size_t in_len = i == 0 ? L : L / c.cumulative_stride(i - 1);
    const Var x = ops::constant(random_tensor({in_ch, in_len}, rng));
    const std::string s = std::to_string(i);
    check("down" + s, [&] { return weighted(m.down_block(network::Branch::Main, i, x), 10 + i); },
          with_prefix(m, "main.down" + s + "."));
    const Var a = ops::constant(random_tensor({c.channels[i], len}, rng)), b = ops::constant(random_tensor({c.channels[i], len}, rng));
    check("fuse" + s, [&] { return weighted(m.fuse(i, a, b), 20 + i); }, with_prefix(m, "fuse" + s + "."));
    std::optional<Var> z_next;
    // The block below hands over its output at this stage's resolution.
    if (i + 1 < c.stages()) z_next = ops::constant(random_tensor({c.channels[i], len}, rng));
    std::optional<Var> skip;
    if (i == 0) skip = ops::constant(random_tensor({c.top_channels, L}, rng));
    check("lvc" + s, [&] { return weighted(m.lvc_up_block(i, z_next, a, emb, skip), 30 + i); },
          with_prefix(m, "lvc" + s + "."));
    check("lowf" + s, [&] { return weighted(m.lowf_block(i, a, emb), 40 + i); }, with_prefix(m, "lowf" + s + "."));
  }
  check("condition", [&] {
    const auto e = m.encode_condition(cond, 6.5, L);
    Var total = weighted(e.stages[0], 50);
    for (std::size_t i = 1; i < e.stages.size(); ++i) total = ops::add(total, weighted(e.stages[i], 50 + i));
    return total;
  }, with_prefix(m, "cond"));
  const Tensor xt = random_tensor({1, L}, rng), ref = random_tensor({1, L}, rng);
  check("end-to-end", [&] { return weighted(m.forward(xt, ref, cond, 6.5).output, 25); }, m.parameters());

  double worst = 0;
  std::string worst_name, detail;
  for (const auto& [name, err] : results) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
  detail = std::to_string(results.size()) + " checks, max relative error " + fmt("%.2g", worst) + " (" + worst_name + ")";
  return {worst < 1e-4, detail};
}

// 7 -----------------------------------------------------------------------------------------------
Outcome attention_linearity() {
  Rng rng(7007);
  double worst = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t len = static_cast<std::size_t>(uniform_int(rng, 1, 96));
    const std::size_t heads = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const std::size_t width = heads * static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const Tensor x = random_tensor({len, width}, rng);
    std::vector<Tensor> w;
    for (int i = 0; i < 4; ++i) {
      w.push_back(random_tensor({width, width}, rng, 0.5));
      w.push_back(random_tensor({width}, rng, 0.1));
    }
    w[3].fill(0.0);  // no key bias
    ops::AttentionWeights aw{ops::constant(w[0]), ops::constant(w[1]), ops::constant(w[2]), ops::constant(w[4]),
                             ops::constant(w[5]), ops::constant(w[6]), ops::constant(w[7])};
    const Var y = ops::local_self_attention(ops::constant(x), aw, len + static_cast<std::size_t>(trial % 3), heads);
    const Tensor expected = oracle::full_self_attention(x, w, heads);
    for (std::size_t i = 0; i < expected.size(); ++i) worst = std::max(worst, std::abs(y.value()[i] - expected[i]));
  }
  // Multiply-adds from the op's counter; wall time as the minimum over
  // interleaved repetitions so that a busy machine inflates both alike.
  const Var small = ops::constant(random_tensor({25600, 16}, rng)), large = ops::constant(random_tensor({51200, 16}, rng));
  ops::NoGradGuard none;
  double t_small = INFINITY, t_large = INFINITY, mac_small = 0, mac_large = 0;
  for (int r = 0; r < 11; ++r) {
    for (const Var* q : {&small, &large}) {
      ops::reset_attention_mac_count();
      const auto t0 = Clock::now();
      ops::windowed_attention(*q, *q, *q, 32, 2);
      const double dt = seconds_since(t0);
      const auto macs = static_cast<double>(ops::attention_mac_count());
      if (q == &small) {
        t_small = std::min(t_small, dt);
        mac_small = macs;
      } else {
        t_large = std::min(t_large, dt);
        mac_large = macs;
      }
    }
  }
  const double mac_ratio = mac_large / mac_small, time_ratio = t_large / t_small;
  return {worst <= 1e-10 && mac_ratio <= 2.2 && time_ratio <= 2.2,
          "max |windowed - full| " + fmt("%.2g", worst) + "; L 25600 -> 51200 cost x" + fmt("%.3f", mac_ratio) +
              " (multiply-adds), x" + fmt("%.3f", time_ratio) + " (wall time)"};
}

// 8 -----------------------------------------------------------------------------------------------
Outcome shape_pyramid() {
  Rng rng(8008);
  int checked = 0;
  for (const auto& cfg : network::ablation_stride_configs(ModelConfig{})) {
    Model m(cfg);
    for (std::size_t L : {25600u, 38400u, 51200u}) {
      ops::NoGradGuard none;
      const auto p = m.forward(random_tensor({1, L}, rng), random_tensor({1, L}, rng),
                               random_condition(L / cfg.frame_hop, L, cfg.phoneme_vocab), 7);
      const std::string at = "strides " + join(cfg.strides) + " L " + std::to_string(L) + ": ";
      if (p.output.shape() != ops::Shape{1, L}) return {false, at + "output shape"};
      for (std::size_t i = 0; i < cfg.stages(); ++i) {
        const ops::Shape stage{cfg.channels[i], L / cfg.cumulative_stride(i)};
        if (p.X[i].shape() != stage || p.Y[i].shape() != stage || p.fused[i].shape() != stage)
          return {false, at + "stage " + std::to_string(i) + " length"};
        if (p.K[i].shape() != ops::Shape{1, L}) return {false, at + "K" + std::to_string(i) + " is not full length"};
      }
      ++checked;
    }
  }
  return {checked == 12, std::to_string(checked) + " (stride set, length) pairs exact"};
}

// 9 and 10 ----------------------------------------------------------------------------------------
struct Trained {
  std::unique_ptr<Model> model;
  std::vector<eval::NamedUtterance> held_out;
  bool ready = false;
};

double window_mean(const std::vector<training::LossRecord>& log, std::size_t from, std::size_t count) {
  double s = 0;
  for (std::size_t i = from; i < from + count; ++i) s += log[i].loss;
  return s / static_cast<double>(count);
}

Outcome toy_convergence(const fs::path& work, Trained& out) {
  const fs::path data = work / "toy500", run = work / "toy500_run";
  fs::remove_all(data);
  fs::remove_all(run);
  training::ToyDataConfig dc;  // 500 utterances, 4 held out
  training::make_toy_dataset(data, dc);
  const auto records = training::read_manifest(data / "manifest.tsv");
  training::TrainConfig tc;  // 5000 steps, 3750 in phase one
  out.model = std::make_unique<Model>(ModelConfig{});
  training::TrainOptions opts;
  opts.out_dir = run;
  opts.on_step = [](const training::LossRecord& r) {
    if (r.step % 250 == 0) std::fprintf(stderr, "  [9] step %lld loss %.4f\n", static_cast<long long>(r.step), r.loss);
  };
  const auto result = training::train(tc, records, *out.model, opts);
  const auto& log = result.log;
  const std::size_t w = 100;
  const double first = window_mean(log, 0, w), last = window_mean(log, log.size() - w, w);
  const double ratio = last / first;

  out.held_out = eval::load_set(training::read_manifest(data / "heldout.tsv"), 128);
  out.ready = true;
  // 24-step sample of the first held-out utterance, scored frame by frame
  // against the conditioned pitch at each analysis frame's centre.
  const auto u = eval::fit_length(out.held_out[0].utterance, out.model->config().length_multiple());
  Rng rng = derive_stream(tc.seed, 0);
  const auto y = eval::synthesize(*out.model, u.reference, u.condition, eval::inference_schedule(24), 100, rng);
  dsp::write_wav(work / "toy500_heldout0_24steps.wav", y);
  const eval::F0Options fo;
  const auto f0 = eval::estimate_f0(y, fo);
  std::size_t voiced = 0, hit = 0;
  for (std::size_t k = 0; k < f0.size(); ++k) {
    const std::size_t frame = (k * fo.hop + fo.frame / 2) / 128;
    if (frame >= u.condition.frames()) break;
    const double want = u.condition.pitch_hz[frame];
    if (want <= 0) continue;
    ++voiced;
    hit += std::abs(f0[k] - want) <= 0.1 * want;
  }
  const double frac = voiced ? static_cast<double>(hit) / static_cast<double>(voiced) : 0.0;
  return {ratio < 0.5 && frac >= 0.7,
          "smoothed loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (ratio " + fmt("%.3f", ratio) +
              "); F0 within 10% on " + fmt("%.1f", 100 * frac) + "% of " + std::to_string(voiced) + " voiced frames"};
}

Outcome step_harness(const fs::path& work, const Trained& t) {
  if (!t.ready) return {false, "no trained model (criterion 9 did not finish)"};
  const auto reports = eval::step_ablation(*t.model, t.held_out, {4, 24, 100}, {"snr", "lsd", "stoi"}, 0);
  write_file_atomic(work / "step_ablation.tsv", eval::format_tsv(reports));
  write_file_atomic(work / "step_ablation.json", eval::format_json(reports));
  std::string detail;
  for (const auto& r : reports) {
    for (const auto& s : r.metrics) {
      for (double v : s.values)
        if (!std::isfinite(v)) return {false, r.section + " " + s.metric + " not finite"};
      if (!s.ci_low || !s.ci_high || !(*s.ci_low <= s.mean && s.mean <= *s.ci_high))
        return {false, r.section + " " + s.metric + " lacks a confidence interval"};
    }
    detail += (detail.empty() ? "" : "; ") + r.section + " stoi " + fmt("%.3f", r.metrics[2].mean);
  }
  return {reports.size() == 3, detail + " (report in " + (work / "step_ablation.tsv").string() + ")"};
}

// 11 ----------------------------------------------------------------------------------------------
Outcome metric_sanity() {
  training::ToyDataConfig dc;
  Rng rng = derive_stream(1111, 0);
  const auto u = training::make_toy_utterance(rng, dc);
  const double self = eval::stoi(u.target, u.target);
  Rng nrng(1112);
  const auto n = noise_wave(u.target.size(), nrng, 1.0);
  std::vector<double> snrs, lsds;
  for (double scale : {0.003, 0.01, 0.03, 0.1, 0.3}) {
    dsp::Waveform y = u.target;
    for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += scale * n.samples[i];
    snrs.push_back(eval::snr(u.target, y));
    lsds.push_back(eval::log_spectral_distance(u.target, y));
  }
  bool mono = true;
  for (std::size_t i = 1; i < snrs.size(); ++i) mono = mono && snrs[i] < snrs[i - 1] && lsds[i] > lsds[i - 1];
  std::string s = "stoi(x,x) " + fmt("%.9f", self) + "; snr";
  for (double v : snrs) s += " " + fmt("%.1f", v);
  s += "; lsd";
  for (double v : lsds) s += " " + fmt("%.2f", v);
  return {std::abs(self - 1) <= 1e-6 && mono, s};
}

// 12 ----------------------------------------------------------------------------------------------
int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every regular file under dir, relative path -> bytes.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

Outcome cli_determinism(const fs::path& work, const std::string& cli) {
  const char* config =
      "schema_version = 1\nseed = 12\nmodel.channels = 4,8,8\nmodel.top_channels = 4\nmodel.lowf_channels = 4\n"
      "model.embed_dim = 4\nmodel.step_embed_dim = 4\nmodel.step_hidden = 8\ntraining.total_steps = 4\n"
      "training.phase1_steps = 2\ntraining.crop_min = 2048\ntraining.crop_max = 4096\ntraining.checkpoint_every = 2\n";
  std::vector<std::map<std::string, std::string>> runs;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = work / ("cli_run" + std::to_string(rep));
    fs::remove_all(d);
    fs::create_directories(d);
    write_file_atomic(d / "config.txt", config);
    const std::string D = d.string();
    const std::string quiet = " 2> " + D + "/stderr_" ;
    const std::vector<std::pair<std::string, std::string>> steps{
        {"make-toy-data", "make-toy-data --n 3 --held-out 2 --seed 12 --out " + D + "/data"},
        {"degrade", "degrade --in " + D + "/data/audio/train_0000.wav --out " + D + "/degraded.wav --seed 12 --spec-out " + D + "/degraded.spec"},
        {"degrade-replay", "degrade --in " + D + "/data/audio/train_0000.wav --out " + D + "/replayed.wav --replay " + D + "/degraded.spec"},
        {"train", "train --config " + D + "/config.txt --data " + D + "/data --out " + D + "/run"},
        {"synth", "synth --checkpoint " + D + "/run/checkpoint-0000004.ssck --condition " + D +
                      "/data/condition/heldout_0000.tsv --reference " + D + "/data/audio/heldout_0000_ref.wav --steps 24 --seed 12 --out " + D + "/synth.wav"},
        {"eval", "eval --checkpoint " + D + "/run/checkpoint-0000004.ssck --data " + D + "/data --config " + D +
                     "/config.txt --step-ablation --ablation-steps 4,24 --out " + D + "/report.tsv --json " + D + "/report.json"},
        {"inspect-schedule", "inspect-schedule --kind linear --steps 24 > " + D + "/schedule.tsv"},
    };
    for (const auto& [name, args] : steps) {
      const int code = shell(cli + " " + args + quiet + name + ".log");
      if (code != 0) return {false, name + " exited with " + std::to_string(code)};
    }
    auto snap = snapshot(d);
    for (auto it = snap.begin(); it != snap.end();)
      it = it->first.rfind("stderr_", 0) == 0 ? snap.erase(it) : std::next(it);
    runs.push_back(std::move(snap));
  }
  if (runs[0].size() != runs[1].size()) return {false, "runs produced different file sets"};
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) return {false, name + " differs between runs"};
  }
  if (runs[0].at("degraded.wav") != runs[0].at("replayed.wav")) return {false, "spec replay differs from the original"};
  return {true, std::to_string(runs[0].size()) + " output files byte-identical across 2 runs of 6 subcommands"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli, work = (fs::temp_directory_path() / "smoothsinger_acceptance").string(), only;
  app.add_option("--cli", cli, "Path to the smoothsinger binary")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Comma-separated criterion numbers");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  if (!only.empty())
    for (auto v : parse_size_list("only", only)) selected.insert(static_cast<int>(v));
  fs::create_directories(work);
  Trained trained;

  struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "STFT/ISTFT round trip", 10, stft_round_trip},
      {2, "degradation containment", 60, degradation_containment},
      {3, "forward-process statistics", 30, forward_statistics},
      {4, "exact inversion", 5, exact_inversion},
      {5, "reference-neutral initialization", 5, reference_neutral},
      {6, "gradient correctness", 300, gradient_checks},
      {7, "attention equivalence and linear cost", 60, attention_linearity},
      {8, "shape pyramid", 60, shape_pyramid},
      {9, "toy training convergence", 7200, [&] { return toy_convergence(work, trained); }},
      {10, "step-count harness", 900, [&] { return step_harness(work, trained); }},
      {11, "metric sanity", 60, metric_sanity},
      {12, "CLI determinism", 600, [&] { return cli_determinism(work, cli); }},
  };

  // ctest hides the output of passing tests, so keep a copy next to the artifacts.
  std::ofstream summary(fs::path(work) / "summary.txt");
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(t0);
    if (elapsed > c.limit_s) {
      o.pass = false;
      o.detail += "; exceeded runtime limit " + fmt("%.0f", c.limit_s) + " s";
    }
    failed += !o.pass;
    const std::string line = std::string(o.pass ? "PASS" : "FAIL") + " criterion " + (c.id < 10 ? " " : "") +
                             std::to_string(c.id) + " " + c.name + ": " + o.detail + " [" + fmt("%.1f", elapsed) + " s]";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary << line << '\n' << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
