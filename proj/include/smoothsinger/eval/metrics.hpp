#pragma once

#include <vector>

#include "smoothsinger/dsp/mel.hpp"
#include "smoothsinger/dsp/waveform.hpp"

namespace smoothsinger::eval {

using dsp::Waveform;

// 10 log10(|ref|^2 / |ref - test|^2); +infinity when the signals are equal.
double snr(const Waveform& reference, const Waveform& test);

// RMS over frames and bands of the difference of 20 log10(max(mel, 1e-5)).
double log_spectral_distance(const Waveform& x, const Waveform& y, const dsp::MelConfig& mel = {});

// Rational-rate resampling by up/down with a Kaiser-windowed sinc lowpass
// (beta 5, half length 10 * max(up, down) input-rate taps), delay compensated.
std::vector<double> resample_poly(const std::vector<double>& x, std::size_t up, std::size_t down);

// Short-time objective intelligibility: 10 kHz, 15 third-octave bands from
// 150 Hz, 384 ms segments, -15 dB clipping, frames more than 40 dB below the
// loudest frame of the clean signal removed first.
double stoi(const Waveform& clean, const Waveform& processed);

struct F0Options {
  std::size_t frame = 1024;
  std::size_t hop = 128;
  double min_hz = 80.0;
  double max_hz = 1000.0;
  double voicing_threshold = 0.3;
};

// Normalised autocorrelation pitch per frame (frame k starts at k * hop).
// Takes the shortest lag whose peak reaches 0.9 of the best peak, refined by
// parabolic interpolation; 0 when the best peak is below the threshold.
std::vector<double> estimate_f0(const Waveform& x, const F0Options& options = {});

}  // namespace smoothsinger::eval
