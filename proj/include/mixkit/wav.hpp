#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"

namespace mixkit {

enum class WavEncoding { pcm16, float32 };

/// Outcome of a write; clipping is a warning, not a failure.
struct WavWriteReport {
  std::size_t clipped_samples = 0;
};

namespace detail {

inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
/// PCM16 is scaled by 1/32768, so -32768 maps to exactly -1.0.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("read_wav: not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) throw IoError("read_wav: truncated fmt chunk");
      format = detail::le16(bytes.data() + body);
      channels = detail::le16(bytes.data() + body + 2);
      rate = detail::le32(bytes.data() + body + 4);
      bits = detail::le16(bytes.data() + body + 14);
      if (format == detail::kFormatExtensible) {
        if (len < 26) throw IoError("read_wav: truncated extensible fmt chunk");
        format = detail::le16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError("read_wav: data chunk before fmt chunk");
      data = bytes.data() + body;
      // Writers that stream sometimes leave the length open; clamp to the file.
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw IoError("read_wav: missing fmt chunk");
  if (data == nullptr) throw IoError("read_wav: missing data chunk");
  if (channels == 0 || rate == 0) throw IoError("read_wav: invalid channel count or rate");

  const bool pcm16 = format == detail::kFormatPcm && bits == 16;
  const bool f32 = format == detail::kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw IoError("read_wav: unsupported encoding (format " + std::to_string(format) + ", " +
                  std::to_string(bits) + " bits)");
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  std::vector<std::vector<double>> out(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      if (pcm16) {
        out[c][i] = static_cast<std::int16_t>(detail::le16(p)) / 32768.0;
      } else {
        out[c][i] = static_cast<double>(std::bit_cast<float>(detail::le32(p)));
      }
    }
  }
  return AudioBuffer(std::move(out), static_cast<int>(rate));
}

/// Writes the buffer as a canonical 44-byte-header WAV.
/// PCM16 rounds half away from zero and saturates; saturated samples are counted.
inline WavWriteReport write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
                                WavEncoding encoding = WavEncoding::float32) {
  const std::uint16_t channels = static_cast<std::uint16_t>(buffer.channel_count());
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(buffer.sample_rate());
  const std::uint32_t block_align = channels * bits / 8u;
  const std::uint32_t data_len = static_cast<std::uint32_t>(buffer.frames() * block_align);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  detail::put_tag(out, "RIFF");
  detail::put32(out, 36 + data_len);
  detail::put_tag(out, "WAVE");
  detail::put_tag(out, "fmt ");
  detail::put32(out, 16);
  detail::put16(out, encoding == WavEncoding::pcm16 ? detail::kFormatPcm : detail::kFormatFloat);
  detail::put16(out, channels);
  detail::put32(out, rate);
  detail::put32(out, rate * block_align);
  detail::put16(out, static_cast<std::uint16_t>(block_align));
  detail::put16(out, bits);
  detail::put_tag(out, "data");
  detail::put32(out, data_len);

  WavWriteReport report;
  for (std::size_t i = 0; i < buffer.frames(); ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = buffer.channel(c)[i];
      if (encoding == WavEncoding::pcm16) {
        double q = std::round(v * 32768.0);
        if (q > 32767.0 || q < -32768.0) {
          ++report.clipped_samples;
          q = std::clamp(q, -32768.0, 32767.0);
        }
        detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        detail::put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("write_wav: cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write_wav: write failed for " + path.string());
  return report;
}

}  // namespace mixkit
