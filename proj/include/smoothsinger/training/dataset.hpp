#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smoothsinger/dsp/degrade.hpp"
#include "smoothsinger/dsp/mel.hpp"
#include "smoothsinger/dsp/waveform.hpp"
#include "smoothsinger/network/condition.hpp"
#include "smoothsinger/random.hpp"

namespace smoothsinger::training {

using dsp::Waveform;
using network::ConditionFeatures;

// Paths as written in a manifest line, resolved against the manifest directory.
struct UtteranceRecord {
  std::filesystem::path target;
  std::filesystem::path reference;
  std::filesystem::path condition;
};

struct Utterance {
  Waveform target;
  Waveform reference;
  ConditionFeatures condition;
};

// Tab-separated target, reference, condition paths; blank lines and lines
// starting with '#' are skipped.
std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& manifest);
std::string format_manifest(const std::vector<UtteranceRecord>& records);

// One row per frame: phoneme_id, f0_hz, duration_frames. The duration is set
// on the first frame of each phoneme and "-" elsewhere.
inline constexpr const char* kConditionHeader = "phoneme_id\tf0_hz\tduration_frames";
std::string format_condition(const ConditionFeatures& c);
ConditionFeatures parse_condition(const std::string& text);

// Reads both waveforms and the condition track and checks that they agree:
// equal rates and lengths, frames * frame_hop == length.
Utterance load_utterance(const UtteranceRecord& record, std::size_t frame_hop);

struct ToyDataConfig {
  std::size_t utterances = 500;
  std::size_t held_out = 4;
  std::uint64_t seed = 0;
  std::size_t min_blocks = 175;  // utterance length in units of 256 samples
  std::size_t max_blocks = 200;
  std::size_t frame_hop = 128;
  int min_phoneme_frames = 12;
  int max_phoneme_frames = 40;
  double rest_probability = 0.15;
  std::size_t phoneme_vocab = 64;
  int reconstruction_iterations = 8;
  double sample_rate = dsp::kDefaultSampleRate;
};

// Pitches of the synthetic melodies: a major pentatonic scale over two octaves from G3.
std::vector<double> pentatonic_grid();

// Harmonic tone following the condition track: three partials with
// amplitudes 1, r, r^2 (r set by the phoneme id), a per-phoneme level and
// 10 ms raised-cosine ramps at phoneme boundaries. Phoneme id 0 is silence.
Waveform synthesize_tones(const ConditionFeatures& c, const std::vector<double>& levels, std::size_t frame_hop,
                          double sample_rate = dsp::kDefaultSampleRate);

// Mel analysis followed by iterative phase reconstruction, started from the
// phase of x. Stands in for a weak two-stage baseline.
Waveform lossy_reconstruction(const Waveform& x, int iterations, const dsp::MelConfig& mel = {});

Utterance make_toy_utterance(Rng& rng, const ToyDataConfig& config);

// Writes <dir>/manifest.tsv (config.utterances lines), <dir>/heldout.tsv and
// the referenced audio/ and condition/ files. Utterance i uses stream
// derive_stream(seed, i); held-out ones continue the index sequence.
void make_toy_dataset(const std::filesystem::path& dir, const ToyDataConfig& config);

struct Crop {
  std::size_t offset = 0;  // sample index
  std::size_t length = 0;
  Waveform target;
  Waveform reference;
  ConditionFeatures condition;
};

struct CropConfig {
  std::size_t min_length = 25600;
  std::size_t max_length = 51200;
  std::size_t multiple = 256;
  std::size_t frame_hop = 128;
};

// Length uniform over multiples of config.multiple in
// [min_length, min(max_length, L)], offset uniform over frame-aligned
// positions. Returns nothing, with a warning, if the utterance is too short.
std::optional<Crop> sample_crop(const Utterance& u, Rng& rng, const CropConfig& config = {},
                                std::vector<std::string>* warnings = nullptr);

struct ReferenceChoice {
  Waveform audio;
  bool degraded = false;
};

// Phase 1 always returns the external reference. Phase 2 returns a degraded
// copy of the target with probability degraded_probability.
ReferenceChoice choose_reference(const Waveform& target, const Waveform& external, int phase, Rng& rng,
                                 double degraded_probability = 0.5, const dsp::DegradationConfig& degradation = {});

}  // namespace smoothsinger::training
