#include "smoothsinger/dsp/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "smoothsinger/atomic_file.hpp"
#include "smoothsinger/errors.hpp"

namespace smoothsinger::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xFF));
  b.push_back(static_cast<char>(v >> 8));
}

std::string describe(std::uint16_t format, std::uint16_t bits) {
  std::string name = format == kFormatPcm ? "PCM" : format == kFormatFloat ? "IEEE float" : "format tag " + std::to_string(format);
  return name + " " + std::to_string(bits) + "-bit";
}

}  // namespace

WavFile read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw ValidationError(where + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const std::string id = bytes.substr(pos, 4);
    const std::size_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      if (id != "data") throw ValidationError(where + ": truncated '" + id + "' chunk");
      data_at = body;
      data_size = bytes.size() - body;
      break;
    }
    if (id == "fmt ") {
      if (size < 16) throw ValidationError(where + ": fmt chunk too short");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible && size >= 26) format = read_u16(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw ValidationError(where + ": missing fmt chunk");
  if (data_at == 0) throw ValidationError(where + ": missing data chunk");
  if (channels != 1)
    throw ValidationError(where + ": " + std::to_string(channels) + " channels; only mono audio is supported");

  WavFile file;
  file.audio.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    file.encoding = WavEncoding::Pcm16;
    const std::size_t n = data_size / 2;
    file.audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      file.audio.samples[i] = static_cast<std::int16_t>(read_u16(bytes, data_at + 2 * i)) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    file.encoding = WavEncoding::Float32;
    const std::size_t n = data_size / 4;
    file.audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t raw = read_u32(bytes, data_at + 4 * i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      file.audio.samples[i] = f;
    }
  } else {
    throw ValidationError(where + ": unsupported WAV encoding " + describe(format, bits) +
                          " (supported: PCM 16-bit, IEEE float 32-bit)");
  }
  if (rate == 0) throw ValidationError(where + ": sample rate is zero");
  return file;
}

void write_wav(const std::filesystem::path& path, const Waveform& audio, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t bytes_per_sample = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(audio.samples.size() * bytes_per_sample);
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));

  std::string b;
  b.reserve(44 + data_size);
  b += "RIFF";
  put_u32(b, 36 + data_size);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(b, 1);
  put_u32(b, rate);
  put_u32(b, rate * bytes_per_sample);
  put_u16(b, bytes_per_sample);
  put_u16(b, bits);
  b += "data";
  put_u32(b, data_size);
  for (double s : audio.samples) {
    if (encoding == WavEncoding::Pcm16) {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const auto q = static_cast<std::int16_t>(std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L));
      put_u16(b, static_cast<std::uint16_t>(q));
    } else {
      const float f = static_cast<float>(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      put_u32(b, raw);
    }
  }
  write_file_atomic(path, b);
}

}  // namespace smoothsinger::dsp
