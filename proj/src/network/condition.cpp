#include "smoothsinger/network/condition.hpp"

#include <algorithm>
#include <cmath>

#include "smoothsinger/errors.hpp"

namespace smoothsinger::network {

std::vector<int> length_regulate(const std::vector<int>& phonemes, const std::vector<int>& durations) {
  if (phonemes.size() != durations.size())
    throw ValidationError("length_regulate: " + std::to_string(phonemes.size()) + " phonemes but " +
                          std::to_string(durations.size()) + " durations");
  std::vector<int> out;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    if (durations[i] < 0) throw ValidationError("phoneme " + std::to_string(i) + ": negative duration");
    out.insert(out.end(), static_cast<std::size_t>(durations[i]), phonemes[i]);
  }
  return out;
}

void validate(const ConditionFeatures& c, const ModelConfig& config) {
  const std::size_t n = c.frames();
  if (n == 0) throw ValidationError("condition has no frames");
  if (c.pitch_hz.size() != n)
    throw ValidationError("condition tracks differ: " + std::to_string(n) + " phoneme frames, " +
                          std::to_string(c.pitch_hz.size()) + " pitch frames");
  if (c.speaker_id < 0 || static_cast<std::size_t>(c.speaker_id) >= config.speakers)
    throw ValidationError("speaker id " + std::to_string(c.speaker_id) + " outside [0, " +
                          std::to_string(config.speakers) + ")");
  for (std::size_t f = 0; f < n; ++f) {
    if (c.phoneme_ids[f] < 0 || static_cast<std::size_t>(c.phoneme_ids[f]) >= config.phoneme_vocab)
      throw ValidationError("frame " + std::to_string(f) + ": phoneme id " + std::to_string(c.phoneme_ids[f]) +
                            " outside vocabulary of " + std::to_string(config.phoneme_vocab));
    if (!std::isfinite(c.pitch_hz[f]) || c.pitch_hz[f] < 0)
      throw ValidationError("frame " + std::to_string(f) + ": pitch must be finite and >= 0");
  }
  if (c.durations.empty()) return;
  std::size_t frame = 0;
  for (std::size_t p = 0; p < c.durations.size(); ++p) {
    const int d = c.durations[p];
    if (d <= 0) throw ValidationError("phoneme " + std::to_string(p) + ": duration " + std::to_string(d) + " must be positive");
    const auto end = frame + static_cast<std::size_t>(d);
    if (end > n)
      throw ValidationError("phoneme " + std::to_string(p) + ": duration " + std::to_string(d) + " runs past frame " +
                            std::to_string(n) + " (starts at " + std::to_string(frame) + ")");
    for (std::size_t f = frame; f < end; ++f)
      if (c.phoneme_ids[f] != c.phoneme_ids[frame])
        throw ValidationError("phoneme " + std::to_string(p) + ": frames " + std::to_string(frame) + ".." +
                              std::to_string(end - 1) + " mix ids " + std::to_string(c.phoneme_ids[frame]) + " and " +
                              std::to_string(c.phoneme_ids[f]));
    frame = end;
  }
  if (frame != n)
    throw ValidationError("durations cover " + std::to_string(frame) + " frames but the tracks have " +
                          std::to_string(n) + " (phoneme " + std::to_string(c.durations.size() - 1) + " ends early)");
}

int pitch_bin(double hz, const ModelConfig& config) {
  if (!(hz > 0)) return 0;
  const double lo = std::log(config.pitch_min_hz), hi = std::log(config.pitch_max_hz);
  const double pos = (std::log(hz) - lo) / (hi - lo);
  const auto voiced_bins = static_cast<double>(config.pitch_bins - 1);
  const auto bin = static_cast<long>(std::floor(std::clamp(pos, 0.0, 1.0) * voiced_bins));
  return 1 + static_cast<int>(std::min<long>(bin, static_cast<long>(config.pitch_bins) - 2));
}

ConditionFeatures crop(const ConditionFeatures& c, std::size_t offset, std::size_t count) {
  if (offset + count > c.frames())
    throw ValidationError("condition crop [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                          ") exceeds " + std::to_string(c.frames()) + " frames");
  ConditionFeatures out;
  out.speaker_id = c.speaker_id;
  out.phoneme_ids.assign(c.phoneme_ids.begin() + static_cast<long>(offset),
                         c.phoneme_ids.begin() + static_cast<long>(offset + count));
  out.pitch_hz.assign(c.pitch_hz.begin() + static_cast<long>(offset),
                      c.pitch_hz.begin() + static_cast<long>(offset + count));
  std::size_t start = 0;
  for (int d : c.durations) {
    const std::size_t end = start + static_cast<std::size_t>(std::max(d, 0));
    const std::size_t lo = std::max(start, offset), hi = std::min(end, offset + count);
    if (hi > lo) out.durations.push_back(static_cast<int>(hi - lo));
    start = end;
  }
  return out;
}

}  // namespace smoothsinger::network
