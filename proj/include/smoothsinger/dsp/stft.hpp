#pragma once

#include <complex>
#include <vector>

#include "smoothsinger/dsp/waveform.hpp"

namespace smoothsinger::dsp {

struct StftConfig {
  std::size_t frame_size = 512;
  std::size_t hop = 128;

  std::size_t bins() const { return frame_size / 2 + 1; }
  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// Complex bins laid out [bin, frame].
struct Spectrogram {
  StftConfig config;
  std::size_t frames = 0;
  std::vector<std::complex<double>> bins;

  std::size_t bin_count() const { return config.bins(); }
  std::complex<double>& at(std::size_t bin, std::size_t frame) { return bins[bin * frames + frame]; }
  const std::complex<double>& at(std::size_t bin, std::size_t frame) const { return bins[bin * frames + frame]; }
};

// Periodic Hann window.
std::vector<double> hann_window(std::size_t size);

// Frames are centred: the signal is reflection-padded by frame/2 on both
// sides, giving 1 + length/hop frames. Requires length >= frame_size.
Spectrogram stft(const Waveform& x, const StftConfig& config = {});

// Weighted overlap-add with window-sum normalisation, trimmed or zero-padded
// to target_length. Rejects spectrograms whose parameters differ from `expected`.
Waveform istft(const Spectrogram& s, std::size_t target_length, const StftConfig& expected = {},
               double sample_rate = kDefaultSampleRate);

}  // namespace smoothsinger::dsp
