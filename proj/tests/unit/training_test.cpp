#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/errors.hpp"
#include "smoothsinger/eval/metrics.hpp"
#include "smoothsinger/training/checkpoint.hpp"
#include "smoothsinger/training/dataset.hpp"
#include "smoothsinger/training/optimizer.hpp"
#include "smoothsinger/training/train.hpp"

using namespace smoothsinger;
using namespace smoothsinger::training;
namespace fs = std::filesystem;

namespace {

network::ModelConfig tiny_model() {
  network::ModelConfig c;
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

ToyDataConfig tiny_data(std::size_t n, std::uint64_t seed) {
  ToyDataConfig c;
  c.utterances = n;
  c.held_out = 2;
  c.seed = seed;
  c.min_blocks = 10;
  c.max_blocks = 14;
  c.phoneme_vocab = 8;
  return c;
}

TrainConfig tiny_train(std::int64_t steps) {
  TrainConfig c;
  c.total_steps = steps;
  c.phase1_steps = steps / 2;
  c.crop_min = 1024;
  c.crop_max = 2048;
  c.checkpoint_every = 2;
  c.seed = 5;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ss_training_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Utterance ramp_utterance(std::size_t length, std::size_t hop = 128) {
  Utterance u;
  for (std::size_t i = 0; i < length; ++i) {
    u.target.samples.push_back(static_cast<double>(i));
    u.reference.samples.push_back(-static_cast<double>(i));
  }
  for (std::size_t f = 0; f < length / hop; ++f) {
    u.condition.phoneme_ids.push_back(1);
    u.condition.pitch_hz.push_back(static_cast<double>(f));
  }
  return u;
}

}  // namespace

TEST(AdamW, MatchesHandComputedSteps) {
  // f(p) = p0^2 / 2 + 3 p1, so grad = (p0, 3).
  numerics::Parameter a("a", numerics::Tensor::from({1.5})), b("b", numerics::Tensor::from({-2.0}));
  AdamWConfig cfg{0.9, 0.98, 1e-8, 0.01};
  AdamW opt({&a, &b}, cfg);
  const double lr = 0.1;
  long double p0 = 1.5L, p1 = -2.0L, m0 = 0, m1 = 0, v0 = 0, v1 = 0;
  for (int t = 1; t <= 3; ++t) {
    a.grad[0] = a.value[0];
    b.grad[0] = 3.0;
    opt.step(lr);
    const long double g0 = p0, g1 = 3.0L;
    m0 = 0.9L * m0 + 0.1L * g0;
    m1 = 0.9L * m1 + 0.1L * g1;
    v0 = 0.98L * v0 + 0.02L * g0 * g0;
    v1 = 0.98L * v1 + 0.02L * g1 * g1;
    const long double c1 = 1 - std::pow(0.9L, t), c2 = 1 - std::pow(0.98L, t);
    p0 = p0 - lr * 0.01L * p0 - lr * (m0 / c1) / (std::sqrt(v0 / c2) + 1e-8L);
    p1 = p1 - lr * 0.01L * p1 - lr * (m1 / c1) / (std::sqrt(v1 / c2) + 1e-8L);
    EXPECT_NEAR(a.value[0], static_cast<double>(p0), 1e-14) << "step " << t;
    EXPECT_NEAR(b.value[0], static_cast<double>(p1), 1e-14) << "step " << t;
  }
  EXPECT_EQ(opt.updates(), 3u);
}

TEST(AdamW, RejectsBadConfig) {
  numerics::Parameter a("a", numerics::Tensor::from({1.0}));
  EXPECT_THROW(AdamW({&a}, {1.0, 0.98, 1e-8, 0.01}), ConfigError);
  EXPECT_THROW(AdamW({&a}, {0.9, 0.98, 0.0, 0.01}), ConfigError);
}

TEST(LearningRate, EndpointsAndMonotone) {
  EXPECT_EQ(log_linear_lr(0, 5000, 1e-4, 1e-6), 1e-4);
  const double last = log_linear_lr(4999, 5000, 1e-4, 1e-6);
  EXPECT_GE(last, std::nextafter(1e-6, 0.0));
  EXPECT_LE(last, std::nextafter(1e-6, 1.0));
  double prev = 1.0;
  for (std::int64_t s = 0; s < 5000; s += 7) {
    const double lr = log_linear_lr(s, 5000, 1e-4, 1e-6);
    EXPECT_LT(lr, prev);
    prev = lr;
  }
  // Geometric midpoint.
  EXPECT_NEAR(log_linear_lr(50, 101, 1e-4, 1e-6), 1e-5, 1e-18);
  EXPECT_EQ(log_linear_lr(0, 1, 1e-4, 1e-6), 1e-4);
  EXPECT_THROW(log_linear_lr(5000, 5000, 1e-4, 1e-6), ValidationError);
}

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.total_steps, 5000);
  EXPECT_EQ(c.phase1_steps, 3750);
  EXPECT_EQ(c.crop_min % 256, 0u);
  EXPECT_EQ(c.crop_max % 256, 0u);
  EXPECT_NO_THROW(validate(c));
  auto bad = c;
  bad.phase1_steps = 6000;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.crop_min = 25700;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.degraded_probability = 1.5;
  EXPECT_THROW(validate(bad), ConfigError);
  TrainConfig parsed;
  for (const auto& line : {std::pair{"total_steps", "12"}, {"lr_start", "0.001"}, {"seed", "9"}})
    set_train_field(parsed, line.first, line.second);
  EXPECT_EQ(parsed.total_steps, 12);
  EXPECT_EQ(parsed.lr_start, 0.001);
  EXPECT_EQ(parsed.seed, 9u);
  EXPECT_THROW(set_train_field(parsed, "learning_rate", "1"), ConfigError);
  EXPECT_THROW(set_train_field(parsed, "total_steps", "-3"), ConfigError);
}

TEST(Crop, LengthsOnGridAndAligned) {
  const Utterance u = ramp_utterance(40960);
  Rng rng(3);
  CropConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const auto c = sample_crop(u, rng, cfg);
    ASSERT_TRUE(c);
    EXPECT_EQ(c->length % 256, 0u);
    EXPECT_GE(c->length, 25600u);
    EXPECT_LE(c->length, 40960u);
    EXPECT_LE(c->offset + c->length, 40960u);
    ASSERT_EQ(c->target.size(), c->length);
    ASSERT_EQ(c->reference.size(), c->length);
    EXPECT_EQ(c->target.samples.front(), static_cast<double>(c->offset));
    EXPECT_EQ(c->reference.samples.back(), -static_cast<double>(c->offset + c->length - 1));
    ASSERT_EQ(c->condition.frames() * 128, c->length);
    EXPECT_EQ(c->condition.pitch_hz.front(), static_cast<double>(c->offset / 128));
  }
}

TEST(Crop, LengthsUniformOverGrid) {
  const Utterance u = ramp_utterance(51200);
  Rng rng(11);
  const std::size_t cells = (51200 - 25600) / 256 + 1;
  std::vector<double> counts(cells, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[(sample_crop(u, rng)->length - 25600) / 256] += 1;
  const double expected = static_cast<double>(draws) / static_cast<double>(cells);
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(cells - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2 " << chi2;
  EXPECT_GT(counts.front(), 0);
  EXPECT_GT(counts.back(), 0);
}

TEST(Crop, ShortUtteranceSkippedWithWarning) {
  const Utterance u = ramp_utterance(12800);
  Rng rng(1);
  std::vector<std::string> warnings;
  EXPECT_FALSE(sample_crop(u, rng, {}, &warnings));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("12800"), std::string::npos);
  CropConfig bad;
  bad.min_length = 25700;
  EXPECT_THROW(sample_crop(ramp_utterance(51200), rng, bad), ConfigError);
}

TEST(Reference, PhaseOneAlwaysExternal) {
  dsp::Waveform target, external;
  target.samples.assign(4096, 0.25);
  external.samples.assign(4096, -0.5);
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const auto r = choose_reference(target, external, 1, rng);
    ASSERT_FALSE(r.degraded);
    ASSERT_EQ(r.audio, external);
  }
  EXPECT_THROW(choose_reference(target, external, 3, rng), ValidationError);
}

TEST(Reference, PhaseTwoDegradedFraction) {
  dsp::Waveform target, external;
  Rng gen(8);
  for (int i = 0; i < 4096; ++i) target.samples.push_back(0.3 * std::sin(0.05 * i) + 0.01 * standard_normal(gen));
  external.samples.assign(4096, 0.0);
  Rng rng(9);
  int degraded = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto r = choose_reference(target, external, 2, rng);
    if (r.degraded) {
      ++degraded;
      ASSERT_EQ(r.audio.size(), target.size());
    } else {
      ASSERT_EQ(r.audio, external);
    }
  }
  const double frac = degraded / 10000.0;
  EXPECT_GE(frac, 0.48);
  EXPECT_LE(frac, 0.52);
}

TEST(ToyData, ToneAt220HzMeasuresAs220) {
  ConditionFeatures c;
  c.phoneme_ids.assign(300, 3);
  c.pitch_hz.assign(300, 220.0);
  c.durations = {300};
  const auto x = synthesize_tones(c, {0.5}, 128);
  auto f0 = eval::estimate_f0(x);
  std::vector<double> voiced;
  for (double f : f0)
    if (f > 0) voiced.push_back(f);
  ASSERT_FALSE(voiced.empty());
  std::nth_element(voiced.begin(), voiced.begin() + static_cast<long>(voiced.size() / 2), voiced.end());
  EXPECT_NEAR(voiced[voiced.size() / 2], 220.0, 0.03 * 220.0);
}

TEST(ToyData, ConditionFollowsGridAndReferenceIsLossy) {
  const auto grid = pentatonic_grid();
  ToyDataConfig cfg;
  for (std::uint64_t s = 0; s < 4; ++s) {
    Rng rng = derive_stream(77, s);
    const Utterance u = make_toy_utterance(rng, cfg);
    ASSERT_EQ(u.target.size() % 256, 0u);
    ASSERT_EQ(u.condition.frames() * 128, u.target.size());
    EXPECT_NO_THROW(network::validate(u.condition, network::ModelConfig{}));
    for (std::size_t f = 0; f < u.condition.frames(); ++f) {
      const double p = u.condition.pitch_hz[f];
      if (u.condition.phoneme_ids[f] == 0) {
        EXPECT_EQ(p, 0.0);
      } else {
        EXPECT_TRUE(std::find(grid.begin(), grid.end(), p) != grid.end()) << p;
      }
    }
    double e = 0, d = 0, xy = 0, yy = 0;
    for (std::size_t i = 0; i < u.target.size(); ++i) {
      const double a = u.target.samples[i], b = u.reference.samples[i];
      e += a * a;
      d += (a - b) * (a - b);
      xy += a * b;
      yy += b * b;
    }
    EXPECT_LT(10 * std::log10(e / d), 40.0);
    EXPECT_GT(xy / std::sqrt(e * yy), 0.5);
  }
}

TEST(ToyData, DatasetFilesAndDeterminism) {
  const auto a = temp_dir("toy_a"), b = temp_dir("toy_b");
  make_toy_dataset(a, tiny_data(3, 21));
  make_toy_dataset(b, tiny_data(3, 21));
  const auto recs = read_manifest(a / "manifest.tsv");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(read_manifest(a / "heldout.tsv").size(), 2u);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    EXPECT_EQ(read_file(entry.path()), read_file(b / rel)) << rel;
  }
  const auto u = load_utterance(recs[0], 128);
  EXPECT_EQ(u.target.size(), u.reference.size());
  EXPECT_THROW(make_toy_dataset(temp_dir("toy_c"), tiny_data(0, 1)), ValidationError);
}

TEST(Condition, FormatParseRoundTrip) {
  ConditionFeatures c;
  c.phoneme_ids = {0, 0, 5, 5, 5, 2};
  c.pitch_hz = {0, 0, 261.6255653005986, 261.6255653005986, 261.6255653005986, 0.1};
  c.durations = {2, 3, 1};
  const std::string text = format_condition(c);
  EXPECT_EQ(text.substr(0, text.find('\n')), kConditionHeader);
  EXPECT_EQ(parse_condition(text), c);
  EXPECT_THROW(parse_condition("phoneme_id\tf0_hz\n1\t2\n"), ValidationError);
  EXPECT_THROW(parse_condition(std::string(kConditionHeader) + "\nx\t1\t-\n"), ValidationError);
  EXPECT_THROW(parse_condition(""), ValidationError);
}

TEST(Manifest, RejectsMalformedLines) {
  const auto dir = temp_dir("manifest");
  write_file_atomic(dir / "m.tsv", "a.wav\tb.wav\n");
  EXPECT_THROW(read_manifest(dir / "m.tsv"), ValidationError);
  write_file_atomic(dir / "m.tsv", "# comment\n\na.wav\tb.wav\tc.tsv\n");
  const auto recs = read_manifest(dir / "m.tsv");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].condition, dir / "c.tsv");
}

TEST(Checkpoint, ResaveIsByteIdentical) {
  network::Model m(tiny_model());
  AdamW opt(m.parameters());
  for (auto* p : m.parameters())
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] = 0.01 * static_cast<double>(i % 7) - 0.02;
  opt.step(1e-3);
  const auto dir = temp_dir("ckpt");
  save_checkpoint(dir / "a.ssck", m, opt, 1);

  network::Model m2(tiny_model());
  AdamW opt2(m2.parameters());
  restore(read_checkpoint(dir / "a.ssck"), m2, &opt2);
  save_checkpoint(dir / "b.ssck", m2, opt2, 1);
  EXPECT_EQ(read_file(dir / "a.ssck"), read_file(dir / "b.ssck"));
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(m.parameters()[i]->value, m2.parameters()[i]->value);
    EXPECT_EQ(opt.second_moments()[i], opt2.second_moments()[i]);
  }
  EXPECT_EQ(opt2.updates(), 1u);
  EXPECT_EQ(load_model(dir / "a.ssck").config(), tiny_model());
}

TEST(Checkpoint, RejectsStrideMismatch) {
  network::Model m(tiny_model());
  AdamW opt(m.parameters());
  const auto dir = temp_dir("ckpt_stride");
  save_checkpoint(dir / "a.ssck", m, opt, 0);
  auto other = tiny_model();
  other.strides = {8, 8, 8};
  network::Model m2(other);
  try {
    restore(read_checkpoint(dir / "a.ssck"), m2, nullptr);
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("strides"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, TruncatedFileLeavesModelUntouched) {
  network::Model m(tiny_model());
  AdamW opt(m.parameters());
  const auto dir = temp_dir("ckpt_trunc");
  save_checkpoint(dir / "a.ssck", m, opt, 0);
  const std::string bytes = read_file(dir / "a.ssck");

  network::Model target(tiny_model());
  for (auto* p : target.parameters()) p->value.fill(0.125);
  std::vector<numerics::Tensor> before;
  for (auto* p : target.parameters()) before.push_back(p->value);

  for (std::size_t cut : {std::size_t{4}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    write_file_atomic(dir / "t.ssck", bytes.substr(0, cut));
    EXPECT_THROW(restore(read_checkpoint(dir / "t.ssck"), target, nullptr), ValidationError) << cut;
  }
  write_file_atomic(dir / "t.ssck", bytes + "x");
  EXPECT_THROW(read_checkpoint(dir / "t.ssck"), ValidationError);
  std::string bumped = bytes;
  bumped[8] = 2;
  write_file_atomic(dir / "t.ssck", bumped);
  EXPECT_THROW(read_checkpoint(dir / "t.ssck"), ValidationError);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(target.parameters()[i]->value, before[i]);
}

TEST(Train, DeterministicAndPhaseOrdered) {
  const auto data = temp_dir("train_data");
  make_toy_dataset(data, tiny_data(4, 3));
  const auto recs = read_manifest(data / "manifest.tsv");
  const auto cfg = tiny_train(8);
  network::Model a(tiny_model()), b(tiny_model());
  const auto ra = train(cfg, recs, a), rb = train(cfg, recs, b);
  ASSERT_EQ(ra.log.size(), 8u);
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
    EXPECT_TRUE(std::isfinite(ra.log[i].loss));
    EXPECT_EQ(ra.log[i].lr, log_linear_lr(static_cast<std::int64_t>(i), 8, 1e-4, 1e-6));
    if (ra.log[i].step < cfg.phase1_steps) {
      EXPECT_FALSE(ra.log[i].degraded_reference);
    }
  }
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    EXPECT_EQ(a.parameters()[i]->value, b.parameters()[i]->value);
}

TEST(Train, ResumeReplaysTheSameLosses) {
  const auto data = temp_dir("resume_data");
  make_toy_dataset(data, tiny_data(4, 4));
  const auto recs = read_manifest(data / "manifest.tsv");
  const auto cfg = tiny_train(6);

  const auto full_dir = temp_dir("resume_full");
  network::Model full(tiny_model());
  TrainOptions o1;
  o1.out_dir = full_dir;
  const auto whole = train(cfg, recs, full, o1);
  EXPECT_EQ(whole.checkpoints.size(), 3u);

  const auto part_dir = temp_dir("resume_part");
  network::Model part(tiny_model());
  TrainOptions o2;
  o2.out_dir = part_dir;
  o2.stop_after = 4;
  train(cfg, recs, part, o2);
  network::Model resumed(tiny_model());
  TrainOptions o3;
  o3.out_dir = part_dir;
  o3.resume_from = checkpoint_path(part_dir, 4);
  const auto rest = train(cfg, recs, resumed, o3);
  ASSERT_EQ(rest.log.size(), 2u);
  EXPECT_EQ(rest.log[0].step, 4);
  EXPECT_EQ(read_file(full_dir / "loss.tsv"), read_file(part_dir / "loss.tsv"));
  EXPECT_EQ(read_file(checkpoint_path(full_dir, 6)), read_file(checkpoint_path(part_dir, 6)));
  EXPECT_EQ(parse_loss_log(read_file(full_dir / "loss.tsv")).size(), 6u);
}

TEST(Train, NonFiniteLossAbortsWithStep) {
  const auto data = temp_dir("nan_data");
  make_toy_dataset(data, tiny_data(2, 5));
  const auto recs = read_manifest(data / "manifest.tsv");
  network::Model m(tiny_model());
  m.parameter("head.bias").value[0] = std::nan("");
  try {
    train(tiny_train(4), recs, m);
    FAIL() << "expected abort";
  } catch (const RuntimeError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(train(tiny_train(4), {}, m), ValidationError);
}
