#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smoothsinger/dsp/stft.hpp"
#include "smoothsinger/dsp/waveform.hpp"
#include "smoothsinger/random.hpp"

namespace smoothsinger::dsp {

struct Region {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  friend bool operator==(const Region&, const Region&) = default;
};

enum class DegradationMethod : unsigned { Noise = 1, Amplitude = 2, Distortion = 4, Frequency = 8 };

// Sampling ranges for one degradation pass. Defaults are the published ranges.
struct DegradationConfig {
  int min_regions = 3;
  int max_regions = 10;
  std::size_t min_region_length = 500;
  std::size_t max_region_length = 2000;
  double alpha_min = 0.8, alpha_max = 1.05;
  double beta_min = 0.8, beta_max = 1.05;
  double gamma_min = 0.9, gamma_max = 1.2;
  double sigma_min = 0.8, sigma_max = 1.1;
  int max_bands = 32;
  // Standard deviation of the additive noise in sample units.
  double noise_scale = 1.0;
  StftConfig stft{};
};

// Everything needed to replay one degradation pass exactly.
struct DegradationSpec {
  std::size_t signal_length = 0;
  std::vector<Region> regions;
  unsigned methods = 0;  // bitwise OR of DegradationMethod
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 1.0;
  std::map<std::size_t, double> band_scales;  // STFT bin -> sigma(f)
  double noise_scale = 1.0;
  std::uint64_t seed = 0;  // seeds the additive noise stream

  bool has(DegradationMethod m) const { return (methods & static_cast<unsigned>(m)) != 0; }
  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

std::string method_name(DegradationMethod m);

// Region count uniform on [min_regions, max_regions], lengths uniform on
// [min_region_length, max_region_length], each region inside the signal.
// Regions may overlap. Signals shorter than max_region_length get lengths
// clamped to length/2 and a warning appended.
std::vector<Region> select_regions(std::size_t length, Rng& rng, const DegradationConfig& config = {},
                                   std::vector<std::string>* warnings = nullptr);

// X + alpha * N(0, noise_scale^2) inside the regions; other samples untouched.
Waveform degrade_add_noise(const Waveform& x, const std::vector<Region>& regions, double alpha, Rng& rng,
                           double noise_scale = 1.0);
Waveform degrade_amplitude(const Waveform& x, const std::vector<Region>& regions, double beta);
Waveform degrade_distort(const Waveform& x, const std::vector<Region>& regions, double gamma);

// Scales the selected STFT bins of every frame centred inside a region.
// Region bounds are first rounded outward to hop multiples; regions whose
// aligned span is shorter than one frame are skipped with a warning.
// Output length equals input length; samples farther than half a frame
// from every processed region are copied unchanged.
Waveform degrade_frequency(const Waveform& x, const std::vector<Region>& regions,
                           const std::map<std::size_t, double>& band_scales, const StftConfig& stft = {},
                           std::vector<std::string>* warnings = nullptr);

// Between 1 and max_bands distinct bins with sigma(f) uniform on [sigma_min, sigma_max].
std::map<std::size_t, double> sample_band_scales(Rng& rng, const DegradationConfig& config = {});

struct DegradationResult {
  Waveform audio;
  DegradationSpec spec;
  std::vector<std::string> warnings;
};

// Samples regions once, a non-empty subset of methods uniformly, and each
// parameter from its range, then applies noise -> amplitude -> distortion ->
// frequency.
DegradationResult degrade(const Waveform& x, Rng& rng, const DegradationConfig& config = {});

// Re-applies a recorded pass; bit-identical to the original output.
Waveform apply_degradation(const Waveform& x, const DegradationSpec& spec, const StftConfig& stft = {},
                           std::vector<std::string>* warnings = nullptr);

// Human-readable sidecar format ("key = value" lines).
std::string serialize(const DegradationSpec& spec);
DegradationSpec parse_degradation_spec(const std::string& text);

}  // namespace smoothsinger::dsp
