#pragma once

#include <vector>

#include "smoothsinger/dsp/stft.hpp"

namespace smoothsinger::dsp {

struct MelConfig {
  std::size_t bands = 80;
  double min_hz = 0.0;
  double max_hz = 12000.0;
  double sample_rate = kDefaultSampleRate;
  StftConfig stft{};
};

// Non-negative magnitudes laid out [band, frame].
struct MelSpectrogram {
  std::size_t bands = 0;
  std::size_t frames = 0;
  std::vector<double> magnitudes;

  double at(std::size_t band, std::size_t frame) const { return magnitudes[band * frames + frame]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters on the HTK mel scale, laid out [band, stft bin].
std::vector<double> mel_filterbank(const MelConfig& config = {});

// Filterbank applied to STFT magnitudes (not power), so the transform is
// positively homogeneous of degree one.
MelSpectrogram mel_spectrogram(const Waveform& x, const MelConfig& config = {});
MelSpectrogram mel_from_magnitudes(const std::vector<double>& magnitudes, std::size_t frames, const MelConfig& config);

}  // namespace smoothsinger::dsp
