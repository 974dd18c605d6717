#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"

namespace mixkit {

/// Kaiser-windowed sinc interpolator for a rational rate change up/down.
///
/// Output sample k sits at input time k * down / up, so sample 0 of input and
/// output coincide and no group delay is introduced. The lowpass passes
/// 0.4 * min(rate) and stops 0.5 * min(rate) with ~90 dB design attenuation.
class RationalResampler {
 public:
  RationalResampler(int source_rate_hz, int target_rate_hz) {
    if (source_rate_hz <= 0 || target_rate_hz <= 0) {
      throw InvalidArgument("resample: rates must be positive");
    }
    const auto g = std::gcd(source_rate_hz, target_rate_hz);
    up_ = target_rate_hz / g;
    down_ = source_rate_hz / g;

    const double min_rate = std::min(source_rate_hz, target_rate_hz);
    cutoff_ = 0.45 * min_rate / source_rate_hz;
    const double transition = 0.1 * min_rate / source_rate_hz;
    constexpr double attenuation_db = 90.0;
    beta_ = 0.1102 * (attenuation_db - 8.7);
    half_width_ = 0.5 * ((attenuation_db - 7.95) / (14.36 * transition) + 1.0);
    taps_ = static_cast<std::int64_t>(std::ceil(half_width_));
    i0_beta_ = std::cyl_bessel_i(0.0, beta_);

    // Phase tables only when they stay small; odd ratios fall back to direct evaluation.
    if (up_ * (2 * taps_ + 1) <= (1 << 22)) {
      table_.resize(static_cast<std::size_t>(up_ * (2 * taps_ + 1)));
      for (std::int64_t p = 0; p < up_; ++p) {
        const double frac = static_cast<double>(p) / static_cast<double>(up_);
        for (std::int64_t j = -taps_; j <= taps_; ++j) {
          table_[static_cast<std::size_t>(p * (2 * taps_ + 1) + (j + taps_))] = kernel(frac - static_cast<double>(j));
        }
      }
    }
  }

  std::int64_t up() const { return up_; }
  std::int64_t down() const { return down_; }

  /// round(len * up / down), halves rounding up.
  std::size_t output_length(std::size_t input_len) const {
    const auto n = static_cast<std::int64_t>(input_len);
    return static_cast<std::size_t>((2 * n * up_ + down_) / (2 * down_));
  }

  /// Output samples [start, start + count) of one channel.
  std::vector<double> process(std::span<const double> input, std::size_t start, std::size_t count) const {
    std::vector<double> out(count, 0.0);
    const auto n = static_cast<std::int64_t>(input.size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t k = static_cast<std::int64_t>(start + i);
      const std::int64_t base = (k * down_) / up_;
      const std::int64_t phase = (k * down_) % up_;
      const double frac = static_cast<double>(phase) / static_cast<double>(up_);
      const std::int64_t lo = std::max<std::int64_t>(0, base - taps_);
      const std::int64_t hi = std::min<std::int64_t>(n - 1, base + taps_);
      double acc = 0.0;
      if (!table_.empty()) {
        const double* row = table_.data() + phase * (2 * taps_ + 1) + taps_;
        for (std::int64_t m = lo; m <= hi; ++m) acc += input[static_cast<std::size_t>(m)] * row[m - base];
      } else {
        for (std::int64_t m = lo; m <= hi; ++m) {
          acc += input[static_cast<std::size_t>(m)] * kernel(frac - static_cast<double>(m - base));
        }
      }
      out[i] = acc;
    }
    return out;
  }

 private:
  // tau in input samples; kernel is centred on the output instant.
  double kernel(double tau) const {
    if (std::abs(tau) >= half_width_) return 0.0;
    const double x = 2.0 * cutoff_ * tau;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double r = tau / half_width_;
    const double window = std::cyl_bessel_i(0.0, beta_ * std::sqrt(1.0 - r * r)) / i0_beta_;
    return 2.0 * cutoff_ * sinc * window;
  }

  std::int64_t up_ = 1;
  std::int64_t down_ = 1;
  double cutoff_ = 0.5;
  double beta_ = 0.0;
  double half_width_ = 1.0;
  double i0_beta_ = 1.0;
  std::int64_t taps_ = 1;
  std::vector<double> table_;
};

/// Full-length rate conversion. Equal rates return the input unchanged.
inline AudioBuffer resample(const AudioBuffer& buffer, int target_rate_hz) {
  if (target_rate_hz <= 0) throw InvalidArgument("resample: target rate must be positive");
  if (target_rate_hz == buffer.sample_rate()) return buffer;
  const RationalResampler rs(buffer.sample_rate(), target_rate_hz);
  const std::size_t len = rs.output_length(buffer.frames());
  std::vector<std::vector<double>> channels;
  for (int c = 0; c < buffer.channel_count(); ++c) channels.push_back(rs.process(buffer.channel(c), 0, len));
  return AudioBuffer(std::move(channels), target_rate_hz);
}

/// Output samples [start, start + count) of resample(buffer, target_rate_hz),
/// without converting the rest of the signal.
inline AudioBuffer resample_segment(const AudioBuffer& buffer, int target_rate_hz, std::size_t start,
                                    std::size_t count) {
  if (target_rate_hz == buffer.sample_rate()) return slice(buffer, start, count);
  const RationalResampler rs(buffer.sample_rate(), target_rate_hz);
  if (start + count > rs.output_length(buffer.frames())) {
    throw InvalidArgument("resample_segment: range exceeds resampled length");
  }
  std::vector<std::vector<double>> channels;
  for (int c = 0; c < buffer.channel_count(); ++c) channels.push_back(rs.process(buffer.channel(c), start, count));
  return AudioBuffer(std::move(channels), target_rate_hz);
}

/// Length of `frames` source samples after conversion to the target rate.
inline std::size_t resampled_length(std::size_t frames, int source_rate_hz, int target_rate_hz) {
  if (source_rate_hz == target_rate_hz) return frames;
  const auto g = std::gcd(source_rate_hz, target_rate_hz);
  const auto up = static_cast<std::int64_t>(target_rate_hz / g);
  const auto down = static_cast<std::int64_t>(source_rate_hz / g);
  const auto n = static_cast<std::int64_t>(frames);
  return static_cast<std::size_t>((2 * n * up + down) / (2 * down));
}

}  // namespace mixkit
