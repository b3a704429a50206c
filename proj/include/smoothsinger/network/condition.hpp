#pragma once

#include <vector>

#include "smoothsinger/network/config.hpp"

namespace smoothsinger::network {

// Frame-level score features. Frames are config.frame_hop samples apart.
struct ConditionFeatures {
  std::vector<int> phoneme_ids;  // one per frame
  std::vector<double> pitch_hz;  // one per frame, 0 = unvoiced
  std::vector<int> durations;    // frames per phoneme; may be empty
  int speaker_id = 0;

  std::size_t frames() const { return phoneme_ids.size(); }
  friend bool operator==(const ConditionFeatures&, const ConditionFeatures&) = default;
};

// Repeats each phoneme by its duration.
std::vector<int> length_regulate(const std::vector<int>& phonemes, const std::vector<int>& durations);

// Throws ValidationError on unequal track lengths, negative or non-finite
// pitch, out-of-vocabulary ids, or durations that disagree with the frame
// track (the message names the phoneme).
void validate(const ConditionFeatures& c, const ModelConfig& config);

// 0 for unvoiced frames, otherwise 1 + log-spaced bin over the pitch range.
int pitch_bin(double hz, const ModelConfig& config);

// Frames [offset, offset + count), durations cut to the window.
ConditionFeatures crop(const ConditionFeatures& c, std::size_t offset, std::size_t count);

}  // namespace smoothsinger::network
