#pragma once

// Synthetic stand-ins for the speech and ambient-noise corpora: harmonic
// speech surrogates, coloured location noise, speech-leak stems and the CSV
// lists the pipeline consumes. Everything is a function of the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixkit/audio.hpp"
#include "mixkit/manifest.hpp"
#include "mixkit/rng.hpp"
#include "mixkit/wav.hpp"

namespace mixkit::synth {

/// Standard normal via Box-Muller on the portable uniform mapping.
inline double gaussian(Rng& rng) {
  const double u1 = 1.0 - rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

inline void scale_to_rms_db(std::vector<double>& x, double dbfs) {
  const double r = rms(x);
  if (r == 0.0) return;
  const double k = std::pow(10.0, dbfs / 20.0) / r;
  for (double& v : x) v *= k;
}

/// Voiced harmonic complex with a syllabic envelope, short pauses and slow
/// pitch drift; spectrally and temporally speech-like enough for loudness
/// gating and masking.
inline std::vector<double> speech_surrogate(Rng& rng, std::size_t n, int rate, double f0) {
  std::vector<double> x(n, 0.0);
  const double syllable_hz = 3.0 + 2.0 * rng.uniform01();
  const double drift = 0.1 * rng.uniform01();
  double phase = 0.0;
  std::vector<double> harmonic_gain(12);
  for (std::size_t h = 0; h < harmonic_gain.size(); ++h) harmonic_gain[h] = (0.5 + rng.uniform01()) / (1.0 + static_cast<double>(h));
  const double pause_at = 0.3 + 0.4 * rng.uniform01();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + drift * std::sin(2.0 * std::numbers::pi * 0.5 * t));
    phase += 2.0 * std::numbers::pi * f / rate;
    double v = 0.0;
    for (std::size_t h = 0; h < harmonic_gain.size(); ++h) {
      if (f * static_cast<double>(h + 1) < 0.45 * rate) v += harmonic_gain[h] * std::sin(static_cast<double>(h + 1) * phase);
    }
    const double env = std::pow(std::max(0.0, std::sin(std::numbers::pi * syllable_hz * t)), 2.0);
    const double rel = static_cast<double>(i) / static_cast<double>(n);
    const bool pause = rel > pause_at && rel < pause_at + 0.08;
    x[i] = pause ? 0.0 : env * v + 0.01 * gaussian(rng) * env;
  }
  return x;
}

/// First-order coloured noise with slow amplitude modulation.
inline std::vector<double> ambient_noise(Rng& rng, std::size_t n, int rate, double tilt) {
  std::vector<double> x(n);
  double state = 0.0;
  const double mod_hz = 0.2 + 0.5 * rng.uniform01();
  for (std::size_t i = 0; i < n; ++i) {
    state = tilt * state + gaussian(rng);
    const double t = static_cast<double>(i) / rate;
    x[i] = state * (1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * mod_hz * t));
  }
  return x;
}

struct CorpusOptions {
  std::uint64_t seed = 1;
  int locations = 24;
  int locations_with_two_recordings = 4;
  double noise_seconds = 16.0;
  int noise_rate_hz = 16000;
  int speech_rate_hz = 16000;
  int speakers = 8;
  int utterances_per_speaker = 4;
  double min_utterance_s = 1.5;
  double max_utterance_s = 2.5;
  int train_pairs = 12;
  int valid_pairs = 4;
  int test_pairs = 4;
  double leak_fraction = 0.05;  // share of 10 s chunks carrying audible speech
  double spl_calibration_db = 94.0;
};

struct CorpusSummary {
  std::size_t recordings = 0;
  std::size_t chunks = 0;
  std::size_t leaky_chunks = 0;
  std::size_t utterances = 0;
};

/// Writes noise/, stems/, speech/, metadata.csv, pairs_{train,valid,test}.csv
/// and curate_config.json under `dir`. Paths inside the lists are relative to `dir`.
inline CorpusSummary make_corpus(const std::filesystem::path& dir, const CorpusOptions& o) {
  namespace fs = std::filesystem;
  for (const char* sub : {"noise", "stems", "speech"}) fs::create_directories(dir / sub);
  Rng rng(splitmix64(o.seed));
  CorpusSummary summary;

  struct Rec {
    std::string id, location, path;
    double spl;
  };
  std::vector<Rec> recs;
  for (int l = 0; l < o.locations; ++l) {
    char loc[32];
    std::snprintf(loc, sizeof loc, "loc%02d", l);
    const double spl = 50.0 + 30.0 * (static_cast<double>(l) + 0.5 * rng.uniform01()) / o.locations;
    const int count = l < o.locations_with_two_recordings ? 2 : 1;
    for (int k = 0; k < count; ++k) {
      const std::string id = std::string(loc) + "_r" + std::to_string(k);
      recs.push_back({id, loc, "noise/" + id + ".wav", spl});
    }
  }

  const auto n = static_cast<std::size_t>(o.noise_seconds * o.noise_rate_hz);
  const auto ranges = chunk_ranges(n, o.noise_rate_hz);
  const std::size_t total_chunks = recs.size() * ranges.size();
  const auto leaky_target = static_cast<std::size_t>(std::llround(o.leak_fraction * static_cast<double>(total_chunks)));
  std::vector<std::size_t> order(total_chunks);
  for (std::size_t i = 0; i < total_chunks; ++i) order[i] = i;
  for (std::size_t i = total_chunks; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);  // Fisher-Yates
  std::vector<bool> leaky(total_chunks, false);
  for (std::size_t i = 0; i < leaky_target; ++i) leaky[order[i]] = true;

  std::string meta = "recording_id,location_id,path,spl_db,foreground_path,residual_path\n";
  for (std::size_t r = 0; r < recs.size(); ++r) {
    auto residual = ambient_noise(rng, n, o.noise_rate_hz, 0.3 + 0.65 * rng.uniform01());
    scale_to_rms_db(residual, recs[r].spl - o.spl_calibration_db);
    // Isolator output: faint speech-like residue, loud where a talker leaked in.
    std::vector<double> foreground(n, 0.0);
    for (std::size_t c = 0; c < ranges.size(); ++c) {
      const auto [a, b] = ranges[c];
      std::vector<double> talk = speech_surrogate(rng, b - a, o.noise_rate_hz, 100.0 + 100.0 * rng.uniform01());
      std::vector<double> part(residual.begin() + static_cast<std::ptrdiff_t>(a), residual.begin() + static_cast<std::ptrdiff_t>(b));
      const bool leak = leaky[r * ranges.size() + c];
      scale_to_rms_db(talk, 20.0 * std::log10(rms(part)) + (leak ? 3.0 : -30.0));
      std::copy(talk.begin(), talk.end(), foreground.begin() + static_cast<std::ptrdiff_t>(a));
      summary.leaky_chunks += leak ? 1 : 0;
    }
    std::vector<double> noise(n);
    for (std::size_t i = 0; i < n; ++i) noise[i] = residual[i] + foreground[i];
    const auto& id = recs[r].id;
    write_wav(AudioBuffer::mono(noise, o.noise_rate_hz), dir / recs[r].path, WavEncoding::float32);
    write_wav(AudioBuffer::mono(foreground, o.noise_rate_hz), dir / "stems" / (id + "_fg.wav"), WavEncoding::float32);
    write_wav(AudioBuffer::mono(residual, o.noise_rate_hz), dir / "stems" / (id + "_res.wav"), WavEncoding::float32);
    meta += id + ',' + recs[r].location + ',' + recs[r].path + ',' + format_fixed6(recs[r].spl) + ",stems/" + id +
            "_fg.wav,stems/" + id + "_res.wav\n";
  }
  write_text(dir / "metadata.csv", meta);
  summary.recordings = recs.size();
  summary.chunks = total_chunks;

  std::vector<std::string> utterances;
  for (int s = 0; s < o.speakers; ++s) {
    const double f0 = 90.0 + 160.0 * s / std::max(1, o.speakers - 1);
    for (int u = 0; u < o.utterances_per_speaker; ++u) {
      char name[48];
      std::snprintf(name, sizeof name, "speech/spk%02d_u%02d.wav", s, u);
      const auto len = static_cast<std::size_t>(o.speech_rate_hz * rng.uniform(o.min_utterance_s, o.max_utterance_s));
      auto x = speech_surrogate(rng, len, o.speech_rate_hz, f0);
      scale_to_rms_db(x, rng.uniform(-28.0, -18.0));
      write_wav(AudioBuffer::mono(x, o.speech_rate_hz), dir / name, WavEncoding::float32);
      utterances.emplace_back(name);
    }
  }
  summary.utterances = utterances.size();

  // Pairs always mix two different speakers.
  const auto per = static_cast<std::size_t>(o.utterances_per_speaker);
  auto write_pairs = [&](const std::string& split, int count) {
    std::string csv = "mixture_id,s1_path,s2_path\n";
    for (int i = 0; i < count; ++i) {
      const auto a = rng.index(utterances.size());
      auto b = rng.index(utterances.size() - per);
      if (b / per >= a / per) b += per;
      char id[48];
      std::snprintf(id, sizeof id, "%s_%04d", split.c_str(), i);
      csv += std::string(id) + ',' + utterances[a] + ',' + utterances[b] + "\n";
    }
    write_text(dir / ("pairs_" + split + ".csv"), csv);
  };
  write_pairs("train", o.train_pairs);
  write_pairs("valid", o.valid_pairs);
  write_pairs("test", o.test_pairs);

  // Bin constraints scaled to the corpus size.
  const double hours = static_cast<double>(recs.size()) * o.noise_seconds / 3600.0;
  nlohmann::ordered_json cfg;
  cfg["curation"] = {{"min_locations_per_bin", 6},
                     {"min_hours_per_bin", std::floor(hours / 6.0 * 1e4) / 1e4},
                     {"spl_calibration_db", o.spl_calibration_db}};
  write_text(dir / "curate_config.json", cfg.dump(2) + "\n");
  return summary;
}

}  // namespace mixkit::synth
