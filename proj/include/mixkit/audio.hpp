#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixkit/error.hpp"

namespace mixkit {

/// Gain in decibels. Always finite.
class GainDb {
 public:
  constexpr GainDb() = default;
  explicit GainDb(double db) : db_(db) {
    if (!std::isfinite(db)) throw InvalidArgument("GainDb: gain must be finite");
  }

  double db() const { return db_; }
  double linear() const { return std::pow(10.0, db_ / 20.0); }

  friend GainDb operator+(GainDb a, GainDb b) { return GainDb(a.db_ + b.db_); }

 private:
  double db_ = 0.0;
};

/// Time-domain signal, 64-bit samples, one vector per channel.
///
/// Nominal full scale is +-1.0. All channels have the same length and every
/// sample is finite; the constructor enforces both.
class AudioBuffer {
 public:
  AudioBuffer() = default;

  AudioBuffer(std::vector<std::vector<double>> channels, int sample_rate_hz)
      : channels_(std::move(channels)), sample_rate_hz_(sample_rate_hz) {
    if (sample_rate_hz_ <= 0) throw InvalidArgument("AudioBuffer: sample rate must be positive");
    if (channels_.empty()) throw InvalidArgument("AudioBuffer: need at least one channel");
    const std::size_t n = channels_.front().size();
    for (const auto& ch : channels_) {
      if (ch.size() != n) throw InvalidArgument("AudioBuffer: channel lengths differ");
      for (double v : ch) {
        if (!std::isfinite(v)) throw InvalidArgument("AudioBuffer: non-finite sample");
      }
    }
  }

  static AudioBuffer mono(std::vector<double> samples, int sample_rate_hz) {
    std::vector<std::vector<double>> ch;
    ch.push_back(std::move(samples));
    return AudioBuffer(std::move(ch), sample_rate_hz);
  }

  int sample_rate() const { return sample_rate_hz_; }
  int channel_count() const { return static_cast<int>(channels_.size()); }
  std::size_t frames() const { return channels_.empty() ? 0 : channels_.front().size(); }
  bool empty() const { return frames() == 0; }
  double duration_s() const { return static_cast<double>(frames()) / sample_rate_hz_; }

  std::span<const double> channel(int c) const { return channels_.at(static_cast<std::size_t>(c)); }
  const std::vector<std::vector<double>>& channels() const { return channels_; }

  /// First channel as its own buffer; processing in this library is mono.
  AudioBuffer first_channel() const { return mono(channels_.at(0), sample_rate_hz_); }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::vector<std::vector<double>> channels_;
  int sample_rate_hz_ = 1;
};

inline AudioBuffer apply_gain(const AudioBuffer& buffer, GainDb gain) {
  const double k = gain.linear();
  auto channels = buffer.channels();
  for (auto& ch : channels) {
    for (double& v : ch) v *= k;
  }
  return AudioBuffer(std::move(channels), buffer.sample_rate());
}

enum class FitMode { pad_end_silence, truncate_end };

/// Pads with exact zeros or truncates at the end. `mode` only documents intent:
/// a longer target always pads and a shorter one always truncates.
inline AudioBuffer pad_or_truncate(const AudioBuffer& buffer, std::size_t target_len,
                                   FitMode mode = FitMode::pad_end_silence) {
  (void)mode;
  auto channels = buffer.channels();
  for (auto& ch : channels) ch.resize(target_len, 0.0);
  return AudioBuffer(std::move(channels), buffer.sample_rate());
}

/// Sample-wise sum of equally shaped buffers.
inline AudioBuffer add(const AudioBuffer& a, const AudioBuffer& b) {
  if (a.sample_rate() != b.sample_rate() || a.channel_count() != b.channel_count() ||
      a.frames() != b.frames()) {
    throw InvalidArgument("add: buffers differ in rate, channel count or length");
  }
  auto channels = a.channels();
  for (std::size_t c = 0; c < channels.size(); ++c) {
    for (std::size_t i = 0; i < channels[c].size(); ++i) channels[c][i] += b.channels()[c][i];
  }
  return AudioBuffer(std::move(channels), a.sample_rate());
}

/// Samples [start, start + len) of every channel.
inline AudioBuffer slice(const AudioBuffer& buffer, std::size_t start, std::size_t len) {
  if (start + len > buffer.frames()) throw InvalidArgument("slice: range exceeds buffer");
  std::vector<std::vector<double>> channels;
  for (const auto& ch : buffer.channels()) {
    channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(start),
                          ch.begin() + static_cast<std::ptrdiff_t>(start + len));
  }
  return AudioBuffer(std::move(channels), buffer.sample_rate());
}

/// Prepends `before` and appends `after` zero samples.
inline AudioBuffer pad_both(const AudioBuffer& buffer, std::size_t before, std::size_t after) {
  std::vector<std::vector<double>> channels;
  for (const auto& ch : buffer.channels()) {
    std::vector<double> out(before + ch.size() + after, 0.0);
    std::copy(ch.begin(), ch.end(), out.begin() + static_cast<std::ptrdiff_t>(before));
    channels.push_back(std::move(out));
  }
  return AudioBuffer(std::move(channels), buffer.sample_rate());
}

}  // namespace mixkit
