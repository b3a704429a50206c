#include "smoothsinger/dsp/mel.hpp"

#include <cmath>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const MelConfig& config) {
  const std::size_t bins = config.stft.bins();
  if (config.bands < 1 || !(config.max_hz > config.min_hz))
    throw ConfigError("mel_filterbank: need at least one band and max_hz > min_hz");
  const double lo = hz_to_mel(config.min_hz), hi = hz_to_mel(config.max_hz);
  std::vector<double> edges(config.bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(config.bands + 1));

  std::vector<double> fb(config.bands * bins, 0.0);
  const double bin_hz = config.sample_rate / static_cast<double>(config.stft.frame_size);
  for (std::size_t b = 0; b < config.bands; ++b) {
    const double left = edges[b], centre = edges[b + 1], right = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > left && f <= centre)
        w = (f - left) / (centre - left);
      else if (f > centre && f < right)
        w = (right - f) / (right - centre);
      fb[b * bins + k] = w;
    }
  }
  return fb;
}

MelSpectrogram mel_from_magnitudes(const std::vector<double>& magnitudes, std::size_t frames, const MelConfig& config) {
  const std::size_t bins = config.stft.bins();
  if (magnitudes.size() != bins * frames) throw ShapeError("mel_from_magnitudes: expected [bins, frames] magnitudes");
  static thread_local std::vector<double> cached_fb;
  static thread_local MelConfig cached_config{0};
  if (cached_fb.empty() || cached_config.bands != config.bands || cached_config.min_hz != config.min_hz ||
      cached_config.max_hz != config.max_hz || cached_config.sample_rate != config.sample_rate ||
      !(cached_config.stft == config.stft)) {
    cached_fb = mel_filterbank(config);
    cached_config = config;
  }
  MelSpectrogram mel;
  mel.bands = config.bands;
  mel.frames = frames;
  mel.magnitudes.assign(config.bands * frames, 0.0);
  for (std::size_t b = 0; b < config.bands; ++b)
    for (std::size_t k = 0; k < bins; ++k) {
      const double w = cached_fb[b * bins + k];
      if (w == 0.0) continue;
      for (std::size_t t = 0; t < frames; ++t) mel.magnitudes[b * frames + t] += w * magnitudes[k * frames + t];
    }
  return mel;
}

MelSpectrogram mel_spectrogram(const Waveform& x, const MelConfig& config) {
  const Spectrogram s = stft(x, config.stft);
  std::vector<double> mags(s.bins.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(s.bins[i]);
  return mel_from_magnitudes(mags, s.frames, config);
}

}  // namespace smoothsinger::dsp
