#pragma once

#include <filesystem>

#include "smoothsinger/dsp/waveform.hpp"

namespace smoothsinger::dsp {

enum class WavEncoding { Pcm16, Float32 };

struct WavFile {
  Waveform audio;
  WavEncoding encoding = WavEncoding::Pcm16;
};

// Mono 16-bit PCM or 32-bit IEEE float. Anything else is rejected with a
// ValidationError naming the encoding found.
WavFile read_wav(const std::filesystem::path& path);

// Writes via a temporary file and rename. PCM samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& audio, WavEncoding encoding = WavEncoding::Float32);

}  // namespace smoothsinger::dsp
