#include "smoothsinger/dsp/stft.hpp"

#include <cmath>
#include <numbers>

#include "smoothsinger/dsp/fft.hpp"
#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

namespace {

void check_config(const StftConfig& c) {
  if (c.frame_size < 2 || c.frame_size % 2 != 0) throw ConfigError("stft: frame size must be even and >= 2");
  if (c.hop < 1 || c.hop > c.frame_size) throw ConfigError("stft: hop must lie in [1, frame size]");
}

}  // namespace

std::vector<double> hann_window(std::size_t size) {
  std::vector<double> w(size);
  for (std::size_t n = 0; n < size; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
  return w;
}

Spectrogram stft(const Waveform& x, const StftConfig& config) {
  check_config(config);
  const std::size_t length = x.samples.size();
  const std::size_t frame = config.frame_size, half = frame / 2;
  if (length < frame)
    throw ValidationError("stft: signal of " + std::to_string(length) + " samples is shorter than one frame (" +
                          std::to_string(frame) + ")");

  std::vector<double> padded(length + frame);
  for (std::size_t i = 0; i < half; ++i) {
    padded[half - 1 - i] = x.samples[i + 1];
    padded[half + length + i] = x.samples[length - 2 - i];
  }
  std::copy(x.samples.begin(), x.samples.end(), padded.begin() + static_cast<long>(half));

  Spectrogram s;
  s.config = config;
  s.frames = 1 + length / config.hop;
  const std::size_t bins = config.bins();
  s.bins.assign(bins * s.frames, {});
  const auto window = hann_window(frame);
  std::vector<double> buffer(frame);
  std::vector<std::complex<double>> spectrum(bins);
  for (std::size_t t = 0; t < s.frames; ++t) {
    const double* src = padded.data() + t * config.hop;
    for (std::size_t n = 0; n < frame; ++n) buffer[n] = src[n] * window[n];
    real_fft(buffer, spectrum);
    for (std::size_t f = 0; f < bins; ++f) s.at(f, t) = spectrum[f];
  }
  return s;
}

Waveform istft(const Spectrogram& s, std::size_t target_length, const StftConfig& expected, double sample_rate) {
  check_config(expected);
  if (!(s.config == expected))
    throw ValidationError("istft: spectrogram analysed with frame " + std::to_string(s.config.frame_size) +
                          "/hop " + std::to_string(s.config.hop) + ", expected frame " +
                          std::to_string(expected.frame_size) + "/hop " + std::to_string(expected.hop));
  const std::size_t bins = s.config.bins();
  if (s.frames == 0 || s.bins.size() != bins * s.frames) throw ValidationError("istft: malformed spectrogram");

  const std::size_t frame = s.config.frame_size, hop = s.config.hop, half = frame / 2;
  const std::size_t span = (s.frames - 1) * hop + frame;
  std::vector<double> sum(span, 0.0), weight(span, 0.0);
  const auto window = hann_window(frame);
  std::vector<std::complex<double>> spectrum(bins);
  std::vector<double> buffer(frame);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) spectrum[f] = s.at(f, t);
    inverse_real_fft(spectrum, buffer);
    double* dst = sum.data() + t * hop;
    double* wdst = weight.data() + t * hop;
    for (std::size_t n = 0; n < frame; ++n) {
      dst[n] += buffer[n] * window[n];
      wdst[n] += window[n] * window[n];
    }
  }

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(target_length, 0.0);
  for (std::size_t i = 0; i < target_length && i + half < span; ++i) {
    const double w = weight[i + half];
    out.samples[i] = w > 1e-10 ? sum[i + half] / w : 0.0;
  }
  return out;
}

}  // namespace smoothsinger::dsp
