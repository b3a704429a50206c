#include "smoothsinger/training/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/dsp/stft.hpp"
#include "smoothsinger/dsp/wav_io.hpp"
#include "smoothsinger/errors.hpp"

namespace smoothsinger::training {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

long parse_long(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(what + ": expected an integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(what + ": expected a number, got '" + s + "'");
  return v;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<UtteranceRecord> read_manifest(const fs::path& manifest) {
  std::istringstream in(read_file(manifest));
  const fs::path base = manifest.parent_path();
  std::vector<UtteranceRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
      throw ValidationError(manifest.string() + ":" + std::to_string(n) +
                            ": expected target<TAB>reference<TAB>condition");
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    out.push_back({resolve(f[0]), resolve(f[1]), resolve(f[2])});
  }
  return out;
}

std::string format_manifest(const std::vector<UtteranceRecord>& records) {
  std::string out;
  for (const auto& r : records)
    out += r.target.generic_string() + "\t" + r.reference.generic_string() + "\t" + r.condition.generic_string() + "\n";
  return out;
}

std::string format_condition(const ConditionFeatures& c) {
  std::string out = std::string(kConditionHeader) + "\n";
  std::vector<int> durations = c.durations;
  std::vector<char> starts(c.frames(), 0);
  std::size_t frame = 0;
  for (int d : durations) {
    if (frame < starts.size()) starts[frame] = 1;
    frame += static_cast<std::size_t>(std::max(d, 0));
  }
  std::size_t p = 0;
  for (std::size_t f = 0; f < c.frames(); ++f) {
    out += std::to_string(c.phoneme_ids[f]) + "\t" + fmt17(c.pitch_hz[f]) + "\t";
    out += starts[f] && p < durations.size() ? std::to_string(durations[p++]) : "-";
    out += "\n";
  }
  return out;
}

ConditionFeatures parse_condition(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ConditionFeatures c;
  bool header = false;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kConditionHeader)
        throw ValidationError("condition line " + std::to_string(n) + ": expected header '" + kConditionHeader + "'");
      header = true;
      continue;
    }
    const auto f = split_tabs(line);
    const std::string where = "condition line " + std::to_string(n);
    if (f.size() != 3) throw ValidationError(where + ": expected 3 tab-separated columns");
    c.phoneme_ids.push_back(static_cast<int>(parse_long(f[0], where + " phoneme_id")));
    c.pitch_hz.push_back(parse_double(f[1], where + " f0_hz"));
    if (f[2] != "-") c.durations.push_back(static_cast<int>(parse_long(f[2], where + " duration_frames")));
  }
  if (!header) throw ValidationError("condition file is empty");
  return c;
}

Utterance load_utterance(const UtteranceRecord& record, std::size_t frame_hop) {
  Utterance u;
  u.target = dsp::read_wav(record.target).audio;
  u.reference = dsp::read_wav(record.reference).audio;
  u.condition = parse_condition(read_file(record.condition));
  const std::string name = record.target.string();
  if (u.target.sample_rate != u.reference.sample_rate)
    throw ValidationError(name + ": target and reference sample rates differ");
  if (u.target.size() != u.reference.size())
    throw ValidationError(name + ": target has " + std::to_string(u.target.size()) + " samples, reference " +
                          std::to_string(u.reference.size()));
  if (u.condition.frames() * frame_hop != u.target.size())
    throw ValidationError(name + ": " + std::to_string(u.condition.frames()) + " condition frames * hop " +
                          std::to_string(frame_hop) + " != " + std::to_string(u.target.size()) + " samples");
  return u;
}

std::vector<double> pentatonic_grid() {
  std::vector<double> out;
  for (int semis : {0, 2, 4, 7, 9, 12, 14, 16, 19, 21}) out.push_back(196.0 * std::pow(2.0, semis / 12.0));
  return out;
}

Waveform synthesize_tones(const ConditionFeatures& c, const std::vector<double>& levels, std::size_t frame_hop,
                          double sample_rate) {
  std::vector<int> durations = c.durations;
  if (durations.empty()) durations.push_back(static_cast<int>(c.frames()));
  if (levels.size() != durations.size())
    throw ValidationError("synthesize_tones: " + std::to_string(levels.size()) + " levels for " +
                          std::to_string(durations.size()) + " phonemes");
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(c.frames() * frame_hop, 0.0);
  const auto ramp = static_cast<std::size_t>(std::lround(0.01 * sample_rate));
  double phase = 0.0;
  std::size_t frame = 0;
  for (std::size_t p = 0; p < durations.size(); ++p) {
    const std::size_t begin = frame * frame_hop;
    const std::size_t end = std::min(out.size(), (frame + static_cast<std::size_t>(durations[p])) * frame_hop);
    const int id = c.phoneme_ids.at(frame);
    frame += static_cast<std::size_t>(durations[p]);
    if (id == 0) continue;
    const double r = 0.35 + 0.4 * ((id * 7) % 10) / 9.0;
    const double norm = 1.0 + r + r * r;
    const std::size_t n = end - begin;
    for (std::size_t i = begin; i < end; ++i) {
      const double f0 = c.pitch_hz[i / frame_hop];
      phase += 2.0 * std::numbers::pi * f0 / sample_rate;
      const std::size_t k = i - begin;
      const std::size_t edge = std::min(k, n - 1 - k);
      const double env =
          edge >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) / static_cast<double>(ramp));
      const double tone = std::sin(phase) + r * std::sin(2 * phase) + r * r * std::sin(3 * phase);
      out.samples[i] = levels[p] * env * tone / norm;
    }
    phase = std::fmod(phase, 2.0 * std::numbers::pi);
  }
  return out;
}

Waveform lossy_reconstruction(const Waveform& x, int iterations, const dsp::MelConfig& mel) {
  if (iterations < 0) throw ValidationError("lossy_reconstruction: negative iteration count");
  dsp::Spectrogram s = dsp::stft(x, mel.stft);
  const std::size_t bins = s.bin_count(), frames = s.frames;
  std::vector<double> mags(s.bins.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(s.bins[i]);
  const auto m = dsp::mel_from_magnitudes(mags, frames, mel);

  // Transposed filterbank, normalised so that a flat spectrum maps back to itself.
  const auto fb = dsp::mel_filterbank(mel);
  std::vector<double> row_sum(mel.bands, 0.0), norm(bins, 0.0);
  for (std::size_t b = 0; b < mel.bands; ++b)
    for (std::size_t k = 0; k < bins; ++k) row_sum[b] += fb[b * bins + k];
  for (std::size_t k = 0; k < bins; ++k)
    for (std::size_t b = 0; b < mel.bands; ++b) norm[k] += fb[b * bins + k] * row_sum[b];
  std::vector<double> approx(bins * frames, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    if (norm[k] <= 0) continue;
    for (std::size_t b = 0; b < mel.bands; ++b) {
      const double w = fb[b * bins + k];
      if (w == 0) continue;
      for (std::size_t t = 0; t < frames; ++t) approx[k * frames + t] += w * m.at(b, t) / norm[k];
    }
  }

  auto impose = [&](dsp::Spectrogram& spec) {
    for (std::size_t i = 0; i < spec.bins.size(); ++i) {
      const double a = std::abs(spec.bins[i]);
      spec.bins[i] = a > 0 ? spec.bins[i] * (approx[i] / a) : std::complex<double>(approx[i], 0.0);
    }
  };
  impose(s);
  Waveform y = dsp::istft(s, x.size(), mel.stft, x.sample_rate);
  for (int it = 0; it < iterations; ++it) {
    s = dsp::stft(y, mel.stft);
    impose(s);
    y = dsp::istft(s, x.size(), mel.stft, x.sample_rate);
  }
  return y;
}

Utterance make_toy_utterance(Rng& rng, const ToyDataConfig& config) {
  if (config.min_blocks == 0 || config.max_blocks < config.min_blocks)
    throw ConfigError("toy data: need 0 < min_blocks <= max_blocks");
  if (256 % config.frame_hop != 0) throw ConfigError("toy data: frame_hop must divide 256");
  if (config.min_phoneme_frames < 1 || config.max_phoneme_frames < config.min_phoneme_frames)
    throw ConfigError("toy data: need 1 <= min_phoneme_frames <= max_phoneme_frames");
  if (config.phoneme_vocab < 2) throw ConfigError("toy data: phoneme_vocab must be >= 2");
  const auto blocks = static_cast<std::size_t>(
      uniform_int(rng, static_cast<std::int64_t>(config.min_blocks), static_cast<std::int64_t>(config.max_blocks)));
  const std::size_t length = blocks * 256, frames = length / config.frame_hop;
  const auto grid = pentatonic_grid();

  Utterance u;
  std::vector<double> levels;
  std::size_t frame = 0;
  while (frame < frames) {
    auto d = static_cast<std::size_t>(uniform_int(rng, config.min_phoneme_frames, config.max_phoneme_frames));
    d = std::min(d, frames - frame);
    const bool rest = frame > 0 && uniform(rng, 0, 1) < config.rest_probability;
    const int id = rest ? 0 : static_cast<int>(uniform_int(rng, 1, static_cast<std::int64_t>(config.phoneme_vocab) - 1));
    const double f0 = rest ? 0.0 : grid[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(grid.size()) - 1))];
    levels.push_back(rest ? 0.0 : uniform(rng, 0.3, 0.6));
    u.condition.durations.push_back(static_cast<int>(d));
    u.condition.phoneme_ids.insert(u.condition.phoneme_ids.end(), d, id);
    u.condition.pitch_hz.insert(u.condition.pitch_hz.end(), d, f0);
    frame += d;
  }
  u.target = synthesize_tones(u.condition, levels, config.frame_hop, config.sample_rate);
  dsp::MelConfig mel;
  mel.sample_rate = config.sample_rate;
  mel.max_hz = config.sample_rate / 2;
  u.reference = lossy_reconstruction(u.target, config.reconstruction_iterations, mel);
  return u;
}

void make_toy_dataset(const fs::path& dir, const ToyDataConfig& config) {
  if (config.utterances < 1) throw ValidationError("toy data: need at least one utterance");
  fs::create_directories(dir / "audio");
  fs::create_directories(dir / "condition");
  auto write_set = [&](const std::string& prefix, std::size_t count, std::size_t first_index) {
    std::vector<UtteranceRecord> records;
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = derive_stream(config.seed, first_index + i);
      const Utterance u = make_toy_utterance(rng, config);
      char stem[64];
      std::snprintf(stem, sizeof stem, "%s_%04zu", prefix.c_str(), i);
      UtteranceRecord rec{fs::path("audio") / (std::string(stem) + ".wav"),
                          fs::path("audio") / (std::string(stem) + "_ref.wav"),
                          fs::path("condition") / (std::string(stem) + ".tsv")};
      dsp::write_wav(dir / rec.target, u.target);
      dsp::write_wav(dir / rec.reference, u.reference);
      write_file_atomic(dir / rec.condition, format_condition(u.condition));
      records.push_back(rec);
    }
    return records;
  };
  const auto train = write_set("train", config.utterances, 0);
  const auto held = write_set("heldout", config.held_out, config.utterances);
  write_file_atomic(dir / "manifest.tsv", format_manifest(train));
  write_file_atomic(dir / "heldout.tsv", format_manifest(held));
}

std::optional<Crop> sample_crop(const Utterance& u, Rng& rng, const CropConfig& config,
                                std::vector<std::string>* warnings) {
  if (config.multiple == 0 || config.frame_hop == 0 || config.min_length % config.multiple != 0 ||
      config.max_length % config.multiple != 0 || config.min_length == 0 || config.max_length < config.min_length)
    throw ConfigError("crop bounds must be positive multiples of " + std::to_string(config.multiple) +
                      " with min <= max");
  const std::size_t length = u.target.size();
  if (u.reference.size() != length || u.condition.frames() * config.frame_hop != length)
    throw ValidationError("sample_crop: target, reference and condition lengths disagree");
  if (length < config.min_length) {
    if (warnings)
      warnings->push_back("utterance of " + std::to_string(length) + " samples is shorter than the minimum crop " +
                          std::to_string(config.min_length) + "; skipped");
    return std::nullopt;
  }
  const auto lo = static_cast<std::int64_t>(config.min_length / config.multiple);
  const auto hi = static_cast<std::int64_t>(std::min(config.max_length, length) / config.multiple);
  Crop c;
  c.length = static_cast<std::size_t>(uniform_int(rng, lo, hi)) * config.multiple;
  const auto slots = static_cast<std::int64_t>((length - c.length) / config.frame_hop);
  c.offset = static_cast<std::size_t>(uniform_int(rng, 0, slots)) * config.frame_hop;
  auto cut = [&](const Waveform& w) {
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(w.samples.begin() + static_cast<long>(c.offset),
                       w.samples.begin() + static_cast<long>(c.offset + c.length));
    return out;
  };
  c.target = cut(u.target);
  c.reference = cut(u.reference);
  c.condition = network::crop(u.condition, c.offset / config.frame_hop, c.length / config.frame_hop);
  return c;
}

ReferenceChoice choose_reference(const Waveform& target, const Waveform& external, int phase, Rng& rng,
                                 double degraded_probability, const dsp::DegradationConfig& degradation) {
  if (phase != 1 && phase != 2) throw ValidationError("choose_reference: phase must be 1 or 2");
  if (!(degraded_probability >= 0 && degraded_probability <= 1))
    throw ConfigError("degraded_probability must lie in [0, 1]");
  if (phase == 1) return {external, false};
  if (uniform(rng, 0, 1) < degraded_probability) return {dsp::degrade(target, rng, degradation).audio, true};
  return {external, false};
}

}  // namespace smoothsinger::training
