#pragma once

// Tensor dumps: raw little-endian float64, row-major, complex values stored
// as interleaved (re, im); each `name.f64` has a `name.json` sidecar holding
// the shape, kind and, for spectrograms, the STFT configuration.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixkit/error.hpp"
#include "mixkit/stft.hpp"

namespace mixkit {

static_assert(std::endian::native == std::endian::little, "tensor dumps assume a little-endian host");

namespace detail {

inline void write_f64(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(double)) {
    throw IoError(path.string() + ": holds " + std::to_string(bytes / sizeof(double)) + " values, sidecar says " +
                  std::to_string(expected));
  }
  in.seekg(0);
  std::vector<double> v(expected);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

inline nlohmann::json read_sidecar(const std::filesystem::path& base, const std::string& kind) {
  std::ifstream in(base.string() + ".json");
  if (!in) throw IoError("cannot open " + base.string() + ".json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(base.string() + ".json: " + e.what());
  }
  if (j.value("kind", "") != kind) throw IoError(base.string() + ": expected a " + kind + " dump");
  return j;
}

inline void write_sidecar(const std::filesystem::path& base, const nlohmann::ordered_json& j) {
  std::ofstream out(base.string() + ".json", std::ios::binary);
  if (!out) throw IoError("cannot write " + base.string() + ".json");
  out << j.dump(2) << "\n";
}

}  // namespace detail

/// `base` is the path without extension.
inline void dump_real(const std::filesystem::path& base, const RealMatrix& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  }
  detail::write_f64(base.string() + ".f64", v);
  nlohmann::ordered_json j;
  j["kind"] = "real";
  j["shape"] = {m.rows(), m.cols()};
  j["layout"] = "row-major";
  detail::write_sidecar(base, j);
}

inline RealMatrix load_real(const std::filesystem::path& base) {
  const auto j = detail::read_sidecar(base, "real");
  const auto rows = j.at("shape").at(0).get<Eigen::Index>(), cols = j.at("shape").at(1).get<Eigen::Index>();
  const auto v = detail::read_f64(base.string() + ".f64", static_cast<std::size_t>(rows * cols));
  RealMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

inline void dump_spectrogram(const std::filesystem::path& base, const Spectrogram& s) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(2 * s.bins.size()));
  for (Eigen::Index f = 0; f < s.bins.rows(); ++f) {
    for (Eigen::Index t = 0; t < s.bins.cols(); ++t) {
      v.push_back(s.bins(f, t).real());
      v.push_back(s.bins(f, t).imag());
    }
  }
  detail::write_f64(base.string() + ".f64", v);
  nlohmann::ordered_json j;
  j["kind"] = "complex";
  j["shape"] = {s.bins.rows(), s.bins.cols()};
  j["layout"] = "row-major, interleaved re/im";
  j["sample_rate_hz"] = s.config.sample_rate_hz;
  j["window_len"] = s.config.window_len;
  j["hop"] = s.config.hop;
  j["fft_size"] = s.config.fft_size;
  j["original_len"] = s.original_len;
  detail::write_sidecar(base, j);
}

inline Spectrogram load_spectrogram(const std::filesystem::path& base) {
  const auto j = detail::read_sidecar(base, "complex");
  Spectrogram s;
  const auto rows = j.at("shape").at(0).get<Eigen::Index>(), cols = j.at("shape").at(1).get<Eigen::Index>();
  s.config.sample_rate_hz = j.at("sample_rate_hz").get<int>();
  s.config.window_len = j.at("window_len").get<int>();
  s.config.hop = j.at("hop").get<int>();
  s.config.fft_size = j.at("fft_size").get<int>();
  s.original_len = j.at("original_len").get<std::size_t>();
  const auto v = detail::read_f64(base.string() + ".f64", static_cast<std::size_t>(2 * rows * cols));
  s.bins.resize(rows, cols);
  for (Eigen::Index f = 0; f < rows; ++f) {
    for (Eigen::Index t = 0; t < cols; ++t) {
      const auto i = static_cast<std::size_t>(2 * (f * cols + t));
      s.bins(f, t) = {v[i], v[i + 1]};
    }
  }
  return s;
}

}  // namespace mixkit
