#include "smoothsinger/dsp/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

namespace {

constexpr DegradationMethod kAllMethods[] = {DegradationMethod::Noise, DegradationMethod::Amplitude,
                                             DegradationMethod::Distortion, DegradationMethod::Frequency};

void check_regions(const Waveform& x, const std::vector<Region>& regions) {
  for (const auto& r : regions)
    if (r.end() > x.samples.size())
      throw ValidationError("region [" + std::to_string(r.start) + ", " + std::to_string(r.end()) +
                            ") exceeds signal length " + std::to_string(x.samples.size()));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string method_name(DegradationMethod m) {
  switch (m) {
    case DegradationMethod::Noise: return "noise";
    case DegradationMethod::Amplitude: return "amplitude";
    case DegradationMethod::Distortion: return "distortion";
    case DegradationMethod::Frequency: return "frequency";
  }
  return "unknown";
}

std::vector<Region> select_regions(std::size_t length, Rng& rng, const DegradationConfig& config,
                                   std::vector<std::string>* warnings) {
  if (length == 0) throw ValidationError("select_regions: empty signal");
  std::size_t lo = config.min_region_length, hi = config.max_region_length;
  if (length < config.max_region_length) {
    hi = std::max<std::size_t>(1, std::min(hi, length / 2));
    lo = std::min(lo, hi);
    if (warnings)
      warnings->push_back("signal of " + std::to_string(length) + " samples is shorter than " +
                          std::to_string(config.max_region_length) + "; region lengths clamped to [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const auto count = uniform_int(rng, config.min_regions, config.max_regions);
  std::vector<Region> regions;
  regions.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const auto len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    const auto start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(length - len)));
    regions.push_back({start, len});
  }
  return regions;
}

Waveform degrade_add_noise(const Waveform& x, const std::vector<Region>& regions, double alpha, Rng& rng,
                           double noise_scale) {
  if (alpha < 0.0) throw ValidationError("degrade_add_noise: alpha must be >= 0");
  check_regions(x, regions);
  Waveform out = x;
  for (const auto& r : regions)
    for (std::size_t t = r.start; t < r.end(); ++t) out.samples[t] += alpha * noise_scale * standard_normal(rng);
  return out;
}

Waveform degrade_amplitude(const Waveform& x, const std::vector<Region>& regions, double beta) {
  if (!(beta > 0.0)) throw ValidationError("degrade_amplitude: beta must be > 0");
  check_regions(x, regions);
  Waveform out = x;
  for (const auto& r : regions)
    for (std::size_t t = r.start; t < r.end(); ++t) out.samples[t] *= beta;
  return out;
}

Waveform degrade_distort(const Waveform& x, const std::vector<Region>& regions, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("degrade_distort: gamma must be > 0");
  check_regions(x, regions);
  Waveform out = x;
  for (const auto& r : regions)
    for (std::size_t t = r.start; t < r.end(); ++t) {
      const double v = out.samples[t];
      out.samples[t] = v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(v), gamma), v);
    }
  return out;
}

Waveform degrade_frequency(const Waveform& x, const std::vector<Region>& regions,
                           const std::map<std::size_t, double>& band_scales, const StftConfig& stft_config,
                           std::vector<std::string>* warnings) {
  check_regions(x, regions);
  const std::size_t length = x.samples.size();
  const std::size_t hop = stft_config.hop, frame = stft_config.frame_size, half = frame / 2;
  for (const auto& [bin, sigma] : band_scales)
    if (bin >= stft_config.bins())
      throw ValidationError("degrade_frequency: bin " + std::to_string(bin) + " outside [0, " +
                            std::to_string(stft_config.bins()) + ")");
  if (length < frame) {
    if (warnings && !regions.empty())
      warnings->push_back("signal shorter than one STFT frame; frequency degradation skipped");
    return x;
  }

  const std::size_t frames = 1 + length / hop;
  std::vector<int> multiplicity(frames, 0);
  std::vector<std::pair<std::size_t, std::size_t>> touched;  // sample spans reached by modified frames
  for (const auto& r : regions) {
    const std::size_t a = r.start / hop * hop;
    const std::size_t b = std::min(length, (r.end() + hop - 1) / hop * hop);
    if (b - a < frame) {
      if (warnings)
        warnings->push_back("region [" + std::to_string(r.start) + ", " + std::to_string(r.end()) +
                            ") shorter than one frame after hop alignment; skipped");
      continue;
    }
    const std::size_t first = a / hop;
    const std::size_t last = std::min(frames - 1, (b - 1) / hop);
    for (std::size_t t = first; t <= last; ++t) ++multiplicity[t];
    const std::size_t lo = first * hop > half ? first * hop - half : 0;
    const std::size_t hi = std::min(length, last * hop + half);
    touched.emplace_back(lo, hi);
  }
  if (touched.empty() || band_scales.empty()) return x;

  Spectrogram s = stft(x, stft_config);
  for (std::size_t t = 0; t < frames; ++t) {
    if (multiplicity[t] == 0) continue;
    for (const auto& [bin, sigma] : band_scales) s.at(bin, t) *= std::pow(sigma, multiplicity[t]);
  }
  const Waveform y = istft(s, length, stft_config, x.sample_rate);
  Waveform out = x;
  for (const auto& [lo, hi] : touched)
    for (std::size_t n = lo; n < hi; ++n) out.samples[n] = y.samples[n];
  return out;
}

std::map<std::size_t, double> sample_band_scales(Rng& rng, const DegradationConfig& config) {
  const std::size_t bins = config.stft.bins();
  const auto count = uniform_int(rng, 1, std::min<std::int64_t>(config.max_bands, static_cast<std::int64_t>(bins)));
  std::map<std::size_t, double> scales;
  while (scales.size() < static_cast<std::size_t>(count)) {
    const auto bin = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(bins) - 1));
    if (scales.count(bin)) continue;
    scales[bin] = uniform(rng, config.sigma_min, config.sigma_max);
  }
  return scales;
}

Waveform apply_degradation(const Waveform& x, const DegradationSpec& spec, const StftConfig& stft,
                           std::vector<std::string>* warnings) {
  if (spec.signal_length != x.samples.size())
    throw ValidationError("degradation spec recorded for " + std::to_string(spec.signal_length) +
                          " samples, signal has " + std::to_string(x.samples.size()));
  Waveform out = x;
  if (spec.has(DegradationMethod::Noise)) {
    Rng noise(spec.seed);
    out = degrade_add_noise(out, spec.regions, spec.alpha, noise, spec.noise_scale);
  }
  if (spec.has(DegradationMethod::Amplitude)) out = degrade_amplitude(out, spec.regions, spec.beta);
  if (spec.has(DegradationMethod::Distortion)) out = degrade_distort(out, spec.regions, spec.gamma);
  if (spec.has(DegradationMethod::Frequency)) out = degrade_frequency(out, spec.regions, spec.band_scales, stft, warnings);
  return out;
}

DegradationResult degrade(const Waveform& x, Rng& rng, const DegradationConfig& config) {
  validate(x);
  DegradationResult result;
  DegradationSpec& spec = result.spec;
  spec.signal_length = x.samples.size();
  spec.seed = rng();
  spec.noise_scale = config.noise_scale;
  spec.regions = select_regions(x.samples.size(), rng, config, &result.warnings);
  spec.methods = static_cast<unsigned>(uniform_int(rng, 1, 15));
  if (spec.has(DegradationMethod::Noise)) spec.alpha = uniform(rng, config.alpha_min, config.alpha_max);
  if (spec.has(DegradationMethod::Amplitude)) spec.beta = uniform(rng, config.beta_min, config.beta_max);
  if (spec.has(DegradationMethod::Distortion)) spec.gamma = uniform(rng, config.gamma_min, config.gamma_max);
  if (spec.has(DegradationMethod::Frequency)) spec.band_scales = sample_band_scales(rng, config);
  result.audio = apply_degradation(x, spec, config.stft, &result.warnings);
  return result;
}

std::string serialize(const DegradationSpec& spec) {
  std::ostringstream out;
  out << "# degradation spec v1\n";
  out << "length = " << spec.signal_length << "\n";
  out << "seed = " << spec.seed << "\n";
  out << "methods =";
  bool first = true;
  for (auto m : kAllMethods)
    if (spec.has(m)) {
      out << (first ? " " : ",") << method_name(m);
      first = false;
    }
  out << "\n";
  out << "alpha = " << format_double(spec.alpha) << "\n";
  out << "beta = " << format_double(spec.beta) << "\n";
  out << "gamma = " << format_double(spec.gamma) << "\n";
  out << "noise_scale = " << format_double(spec.noise_scale) << "\n";
  for (const auto& r : spec.regions) out << "region = " << r.start << " " << r.length << "\n";
  for (const auto& [bin, sigma] : spec.band_scales) out << "band = " << bin << " " << format_double(sigma) << "\n";
  return out.str();
}

DegradationSpec parse_degradation_spec(const std::string& text) {
  DegradationSpec spec;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_length = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("degradation spec line " + std::to_string(line_no) + ": missing '='");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::istringstream value(line.substr(eq + 1));
    auto fail = [&] { throw ValidationError("degradation spec line " + std::to_string(line_no) + ": bad value for " + key); };
    if (key == "length") {
      if (!(value >> spec.signal_length)) fail();
      have_length = true;
    } else if (key == "seed") {
      if (!(value >> spec.seed)) fail();
    } else if (key == "methods") {
      std::string list;
      value >> list;
      std::istringstream items(list);
      std::string item;
      while (std::getline(items, item, ',')) {
        bool known = false;
        for (auto m : kAllMethods)
          if (item == method_name(m)) {
            spec.methods |= static_cast<unsigned>(m);
            known = true;
          }
        if (!known) throw ValidationError("degradation spec: unknown method '" + item + "'");
      }
    } else if (key == "alpha") {
      if (!(value >> spec.alpha)) fail();
    } else if (key == "beta") {
      if (!(value >> spec.beta)) fail();
    } else if (key == "gamma") {
      if (!(value >> spec.gamma)) fail();
    } else if (key == "noise_scale") {
      if (!(value >> spec.noise_scale)) fail();
    } else if (key == "region") {
      Region r;
      if (!(value >> r.start >> r.length)) fail();
      spec.regions.push_back(r);
    } else if (key == "band") {
      std::size_t bin;
      double sigma;
      if (!(value >> bin >> sigma)) fail();
      spec.band_scales[bin] = sigma;
    } else {
      throw ValidationError("degradation spec: unknown key '" + key + "'");
    }
  }
  if (!have_length) throw ValidationError("degradation spec: missing length");
  return spec;
}

}  // namespace smoothsinger::dsp
