#pragma once

// Test-only signal generators.

#include <cmath>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mixkit/audio.hpp"

namespace mixkit::fixtures {

inline std::vector<double> sine(double freq_hz, double amplitude, int rate, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate + phase);
  }
  return x;
}

inline std::vector<double> white(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

/// Voss-McCartney style pink noise (16 rows), zero-mean, roughly unit RMS.
inline std::vector<double> pink(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> rows(16);
  for (auto& r : rows) r = u(rng);
  double sum = 0.0;
  for (double r : rows) sum += r;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::uint64_t>(i + 1);
    const int row = std::min(15, static_cast<int>(std::countr_zero(k)));
    sum -= rows[static_cast<std::size_t>(row)];
    rows[static_cast<std::size_t>(row)] = u(rng);
    sum += rows[static_cast<std::size_t>(row)];
    x[i] = (sum + u(rng)) / 4.0;
  }
  return x;
}

/// Amplitude-modulated harmonic complex with syllable-like pauses; a cheap
/// stand-in for speech with silent gaps.
inline std::vector<double> speech_like(std::size_t n, int rate, double f0, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  const double syllable = 0.25 + 0.1 * u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env_phase = std::fmod(t / syllable, 1.0);
    const double env = env_phase < 0.7 ? std::pow(std::sin(std::numbers::pi * env_phase / 0.7), 2.0) : 0.0;
    double v = 0.0;
    for (int h = 1; h <= 8; ++h) {
      const double f = f0 * h * (1.0 + 0.03 * std::sin(2.0 * std::numbers::pi * 0.7 * t));
      if (f < 0.45 * rate) v += std::sin(2.0 * std::numbers::pi * f * t + h) / h;
    }
    x[i] = 0.1 * env * v;
  }
  return x;
}

inline double rms(const std::vector<double>& x, std::size_t from = 0, std::size_t to = 0) {
  if (to == 0) to = x.size();
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

}  // namespace mixkit::fixtures
