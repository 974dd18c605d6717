#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"

namespace mixkit {

/// Integrated loudness. A fully gated signal has no finite loudness and is
/// represented by the `silent()` state instead of a floating-point -inf.
class LoudnessLufs {
 public:
  static LoudnessLufs silent() { return LoudnessLufs(); }
  static LoudnessLufs measured(double lufs, int gated_block_count) {
    LoudnessLufs l;
    l.lufs_ = lufs;
    l.blocks_ = gated_block_count;
    l.finite_ = true;
    return l;
  }

  bool is_finite() const { return finite_; }
  bool is_silent() const { return !finite_; }
  int gated_block_count() const { return blocks_; }

  double lufs() const {
    if (!finite_) throw InvalidArgument("loudness: signal is fully gated (no finite loudness)");
    return lufs_;
  }

 private:
  LoudnessLufs() = default;
  double lufs_ = 0.0;
  int blocks_ = 0;
  bool finite_ = false;
};

/// Signal-to-noise ratio in dB.
struct SnrDb {
  double value = 0.0;
};

namespace detail {

struct Biquad {
  double b0, b1, b2, a1, a2;

  void run(std::vector<double>& x) const {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (double& v : x) {
      const double y = b0 * v + z1;
      z1 = b1 * v - a1 * y + z2;
      z2 = b2 * v - a2 * y;
      v = y;
    }
  }
};

// K-weighting as a high shelf followed by a high-pass, derived from the analog
// prototypes through the bilinear transform so any sample rate works. At 48 kHz
// the cascade reproduces the published BS.1770 coefficient tables.
inline Biquad k_shelf(double rate) {
  constexpr double f0 = 1681.974450955533;
  constexpr double gain_db = 3.999843853973347;
  constexpr double q = 0.7071752369554196;
  const double k = std::tan(std::numbers::pi * f0 / rate);
  const double vh = std::pow(10.0, gain_db / 20.0);
  const double vb = std::pow(vh, 0.4996667741545416);
  const double a0 = 1.0 + k / q + k * k;
  return {(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0,
          2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
}

inline Biquad k_highpass(double rate) {
  constexpr double f0 = 38.13547087602444;
  constexpr double q = 0.5003270373238773;
  const double k = std::tan(std::numbers::pi * f0 / rate);
  const double a0 = 1.0 + k / q + k * k;
  return {1.0, -2.0, 1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
}

constexpr double kLoudnessOffset = -0.691;
constexpr double kAbsoluteGate = -70.0;
constexpr double kRelativeGate = -10.0;

inline double to_lufs(double mean_square) { return kLoudnessOffset + 10.0 * std::log10(mean_square); }

}  // namespace detail

/// Gating-block energies (channel-summed K-weighted mean squares) of 400 ms
/// blocks stepped by 100 ms.
inline std::vector<double> loudness_block_energies(const AudioBuffer& buffer) {
  const double rate = buffer.sample_rate();
  const auto block = static_cast<std::size_t>(std::llround(0.4 * rate));
  const auto step = static_cast<std::size_t>(std::llround(0.1 * rate));
  if (buffer.frames() < block) {
    throw InvalidArgument("measure_lufs: buffer shorter than one 400 ms gating block");
  }
  const std::size_t count = (buffer.frames() - block) / step + 1;
  std::vector<double> energy(count, 0.0);

  const auto shelf = detail::k_shelf(rate);
  const auto highpass = detail::k_highpass(rate);
  for (int c = 0; c < buffer.channel_count(); ++c) {
    auto ch = std::vector<double>(buffer.channel(c).begin(), buffer.channel(c).end());
    shelf.run(ch);
    highpass.run(ch);
    for (std::size_t j = 0; j < count; ++j) {
      double acc = 0.0;
      for (std::size_t i = j * step; i < j * step + block; ++i) acc += ch[i] * ch[i];
      energy[j] += acc / static_cast<double>(block);  // unity channel weights
    }
  }
  return energy;
}

/// Integrated loudness with the absolute (-70 LUFS) and relative (-10 LU) gates.
inline LoudnessLufs measure_lufs(const AudioBuffer& buffer) {
  const auto energy = loudness_block_energies(buffer);

  double sum = 0.0;
  std::size_t n = 0;
  for (double z : energy) {
    if (z > 0.0 && detail::to_lufs(z) > detail::kAbsoluteGate) {
      sum += z;
      ++n;
    }
  }
  if (n == 0) return LoudnessLufs::silent();

  const double relative_gate = detail::to_lufs(sum / static_cast<double>(n)) + detail::kRelativeGate;
  double kept = 0.0;
  int kept_n = 0;
  for (double z : energy) {
    if (z > 0.0) {
      const double l = detail::to_lufs(z);
      if (l > detail::kAbsoluteGate && l > relative_gate) {
        kept += z;
        ++kept_n;
      }
    }
  }
  if (kept_n == 0) return LoudnessLufs::silent();
  return LoudnessLufs::measured(detail::to_lufs(kept / kept_n), kept_n);
}

/// LUFS(target) - LUFS(noise). Throws if either side is fully gated.
inline SnrDb snr_lufs(const AudioBuffer& target, const AudioBuffer& noise) {
  const auto t = measure_lufs(target);
  const auto n = measure_lufs(noise);
  if (t.is_silent() || n.is_silent()) throw InvalidArgument("snr_lufs: operand has no finite loudness");
  return {t.lufs() - n.lufs()};
}

/// Gain for `target` so that snr_lufs(apply_gain(target, g), noise) hits
/// `desired` within `tolerance_db`. Closed form first, then fixed-point
/// refinement against re-measurement (gating may shift with level).
inline GainDb gain_for_target_snr(const AudioBuffer& target, const AudioBuffer& noise, SnrDb desired,
                                  double tolerance_db = 0.05, int max_iterations = 5) {
  const auto noise_l = measure_lufs(noise);
  const auto target_l = measure_lufs(target);
  if (target_l.is_silent() || noise_l.is_silent()) {
    throw InvalidArgument("gain_for_target_snr: operand has no finite loudness");
  }
  double gain = desired.value - (target_l.lufs() - noise_l.lufs());
  for (int it = 0; it < max_iterations; ++it) {
    const auto scaled = measure_lufs(apply_gain(target, GainDb(gain)));
    if (scaled.is_finite()) {
      const double miss = desired.value - (scaled.lufs() - noise_l.lufs());
      if (std::abs(miss) <= tolerance_db) return GainDb(gain);
      gain += miss;
    } else {
      throw ConstraintError("gain_for_target_snr: target fully gated at the requested gain");
    }
  }
  throw ConstraintError("gain_for_target_snr: no convergence within iteration limit");
}

}  // namespace mixkit
