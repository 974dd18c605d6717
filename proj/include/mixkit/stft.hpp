#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"

namespace mixkit {

using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

/// 32 ms square-root Hann analysis, 8 ms hop.
struct StftConfig {
  int sample_rate_hz = 8000;
  int window_len = 256;
  int hop = 64;
  int fft_size = 256;

  /// Blessed configurations are 8, 16 and 48 kHz; other rates must still give
  /// whole-sample 32 ms / 8 ms lengths.
  static StftConfig for_rate(int sample_rate_hz) {
    if (sample_rate_hz <= 0 || (sample_rate_hz * 32) % 1000 != 0 || (sample_rate_hz * 8) % 1000 != 0) {
      throw InvalidArgument("StftConfig: 32 ms / 8 ms are not whole samples at " +
                            std::to_string(sample_rate_hz) + " Hz");
    }
    StftConfig c;
    c.sample_rate_hz = sample_rate_hz;
    c.window_len = sample_rate_hz * 32 / 1000;
    c.hop = sample_rate_hz * 8 / 1000;
    c.fft_size = 1;
    while (c.fft_size < c.window_len) c.fft_size *= 2;
    return c;
  }

  int bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (window_len <= 0 || hop <= 0 || fft_size < window_len || window_len % hop != 0 ||
        window_len % 4 != 0 || hop * 4 != window_len) {
      throw InvalidArgument("StftConfig: inconsistent window/hop/fft sizes");
    }
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Periodic square-root Hann of length `n`.
inline std::vector<double> sqrt_hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  }
  return w;
}

/// Synthesis window: the analysis window divided by the overlap-added squared
/// analysis window, which is constant for hop = window / 4.
inline std::vector<double> synthesis_window(const StftConfig& config) {
  auto w = sqrt_hann(config.window_len);
  std::vector<double> norm(static_cast<std::size_t>(config.hop), 0.0);
  for (int i = 0; i < config.window_len; ++i) {
    norm[static_cast<std::size_t>(i % config.hop)] += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < config.window_len; ++i) w[static_cast<std::size_t>(i)] /= norm[static_cast<std::size_t>(i % config.hop)];
  return w;
}

/// Complex F x T spectrogram, F = fft_size / 2 + 1.
struct Spectrogram {
  ComplexMatrix bins;
  StftConfig config;
  std::size_t original_len = 0;

  Eigen::Index freq_bins() const { return bins.rows(); }
  Eigen::Index frames() const { return bins.cols(); }
};

/// Leading/trailing zero padding in samples.
inline int stft_edge_pad(const StftConfig& c) { return c.window_len - c.hop; }

/// ceil((len + window - hop) / hop)
inline Eigen::Index stft_frame_count(std::size_t len, const StftConfig& c) {
  const auto span = static_cast<Eigen::Index>(len) + stft_edge_pad(c);
  return (span + c.hop - 1) / c.hop;
}

inline Spectrogram stft(const AudioBuffer& buffer, const StftConfig& config) {
  config.validate();
  if (buffer.channel_count() != 1) throw InvalidArgument("stft: mono input required");
  if (buffer.sample_rate() != config.sample_rate_hz) throw InvalidArgument("stft: sample rate does not match config");
  if (buffer.empty()) throw InvalidArgument("stft: empty buffer");

  const auto x = buffer.channel(0);
  const auto pad = static_cast<std::size_t>(stft_edge_pad(config));
  const Eigen::Index frames = stft_frame_count(x.size(), config);
  const auto window = sqrt_hann(config.window_len);

  Spectrogram out;
  out.config = config;
  out.original_len = x.size();
  out.bins.resize(config.bins(), frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(config.fft_size));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const auto start = static_cast<std::size_t>(t * config.hop);
    for (int n = 0; n < config.window_len; ++n) {
      const std::size_t p = start + static_cast<std::size_t>(n);  // index into padded signal
      if (p >= pad && p - pad < x.size()) frame[static_cast<std::size_t>(n)] = x[p - pad] * window[static_cast<std::size_t>(n)];
    }
    fft.fwd(spectrum, frame);
    for (int f = 0; f < config.bins(); ++f) out.bins(f, t) = spectrum[static_cast<std::size_t>(f)];
  }
  return out;
}

inline AudioBuffer istft(const Spectrogram& spec) {
  const auto& c = spec.config;
  c.validate();
  if (spec.bins.rows() != c.bins()) throw InvalidArgument("istft: bin count does not match config");
  if (spec.bins.cols() != stft_frame_count(spec.original_len, c)) {
    throw InvalidArgument("istft: frame count does not match original length");
  }

  const auto pad = static_cast<std::size_t>(stft_edge_pad(c));
  const auto frames = spec.bins.cols();
  std::vector<double> acc(static_cast<std::size_t>((frames - 1) * c.hop + c.window_len), 0.0);
  const auto window = synthesis_window(c);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(static_cast<std::size_t>(c.bins()));
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int f = 0; f < c.bins(); ++f) half[static_cast<std::size_t>(f)] = spec.bins(f, t);
    fft.inv(frame, half, c.fft_size);
    const auto start = static_cast<std::size_t>(t * c.hop);
    for (int n = 0; n < c.window_len; ++n) {
      acc[start + static_cast<std::size_t>(n)] += frame[static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(n)];
    }
  }
  std::vector<double> out(acc.begin() + static_cast<std::ptrdiff_t>(pad),
                          acc.begin() + static_cast<std::ptrdiff_t>(pad + spec.original_len));
  return AudioBuffer::mono(std::move(out), c.sample_rate_hz);
}

/// Bin-wise real scaling; phase is preserved.
inline Spectrogram apply_mask(const Spectrogram& spec, const RealMatrix& mask) {
  if (mask.rows() != spec.bins.rows() || mask.cols() != spec.bins.cols()) {
    throw InvalidArgument("apply_mask: mask shape does not match spectrogram");
  }
  if (!mask.allFinite()) throw InvalidArgument("apply_mask: mask contains non-finite values");
  Spectrogram out = spec;
  out.bins = spec.bins.array() * mask.array().cast<std::complex<double>>();
  return out;
}

}  // namespace mixkit
