#pragma once

#include <vector>

namespace smoothsinger::dsp {

inline constexpr double kDefaultSampleRate = 24000.0;

struct Waveform {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  friend bool operator==(const Waveform&, const Waveform&) = default;
};

// Throws ValidationError unless samples are finite, non-empty and the rate positive.
void validate(const Waveform& x);

}  // namespace smoothsinger::dsp
