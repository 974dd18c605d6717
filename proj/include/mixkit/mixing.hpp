#pragma once

// Mixture planning and rendering: parameter draws, loudness-based gains and
// sample-exact min/max construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/curation.hpp"
#include "mixkit/error.hpp"
#include "mixkit/loudness.hpp"
#include "mixkit/resample.hpp"
#include "mixkit/rng.hpp"
#include "mixkit/wav.hpp"

namespace mixkit {

enum class MixMode { min, max };

inline std::string to_string(MixMode m) { return m == MixMode::min ? "min" : "max"; }

inline MixMode parse_mode(const std::string& s) {
  if (s == "min") return MixMode::min;
  if (s == "max") return MixMode::max;
  throw InvalidArgument("unknown mode: " + s + " (expected min or max)");
}

inline void check_pipeline_rate(int rate) {
  if (rate != 8000 && rate != 16000) throw InvalidArgument("mixture sample rate must be 8000 or 16000 Hz");
}

/// A usable stretch of one noise recording, in native samples.
struct NoiseClip {
  std::string path;
  std::string recording_id;
  std::string location_id;
  int band = 0;
  Split split = Split::unassigned;
  int sample_rate_hz = 48000;
  std::size_t file_frames = 0;
  std::size_t start_frame = 0;
  std::size_t frame_count = 0;

  double duration_s() const { return static_cast<double>(frame_count) / sample_rate_hz; }
};

struct NoiseIndex {
  std::array<double, kBinCount - 1> edges{};
  std::vector<NoiseClip> clips;
};

/// [begin, end) of a clip on the file's timeline after conversion to `rate`.
struct ClipSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end > begin ? end - begin : 0; }
};

inline ClipSpan clip_span(const NoiseClip& c, int rate) {
  const auto g = std::gcd(c.sample_rate_hz, rate);
  const auto up = static_cast<std::uint64_t>(rate / g), down = static_cast<std::uint64_t>(c.sample_rate_hz / g);
  auto ceil_map = [&](std::size_t n) { return static_cast<std::size_t>((n * up + down - 1) / down); };
  const auto total = resampled_length(c.file_frames, c.sample_rate_hz, rate);
  return {std::min(ceil_map(c.start_frame), total), std::min(ceil_map(c.start_frame + c.frame_count), total)};
}

/// Clips of one split grouped by band, with cumulative target-rate lengths for
/// length-proportional selection.
class NoisePool {
 public:
  NoisePool(const NoiseIndex& index, Split split, int rate) : index_(&index), rate_(rate) {
    for (std::size_t i = 0; i < index.clips.size(); ++i) {
      const auto& c = index.clips[i];
      if (split != Split::unassigned && c.split != split) continue;
      if (c.band < 0 || c.band >= kBinCount) throw InvalidArgument("noise clip with band out of range: " + c.path);
      const auto len = clip_span(c, rate).length();
      if (len == 0) continue;
      auto& b = bands_[static_cast<std::size_t>(c.band)];
      b.clips.push_back(i);
      b.cumulative.push_back((b.cumulative.empty() ? 0 : b.cumulative.back()) + len);
    }
    for (int b = 0; b < kBinCount; ++b) {
      if (!bands_[static_cast<std::size_t>(b)].clips.empty()) nonempty_.push_back(b);
    }
    if (nonempty_.empty()) throw InvalidArgument("noise pool: no clips for split " + to_string(split));
  }

  const NoiseIndex& index() const { return *index_; }
  int rate() const { return rate_; }
  const std::vector<int>& bands() const { return nonempty_; }
  const std::vector<std::size_t>& clips_in_band(int b) const { return bands_[static_cast<std::size_t>(b)].clips; }

  /// Clip index within `band`, probability proportional to its length.
  std::size_t pick_clip(Rng& rng, int band) const {
    const auto& b = bands_[static_cast<std::size_t>(band)];
    const auto u = rng.index(b.cumulative.back());
    const auto pos = std::upper_bound(b.cumulative.begin(), b.cumulative.end(), u) - b.cumulative.begin();
    return b.clips[static_cast<std::size_t>(pos)];
  }

 private:
  struct Band {
    std::vector<std::size_t> clips;
    std::vector<std::uint64_t> cumulative;
  };
  const NoiseIndex* index_;
  int rate_;
  std::array<Band, kBinCount> bands_;
  std::vector<int> nonempty_;
};

inline constexpr double kSnrLowDb = -6.0;
inline constexpr double kSnrHighDb = 3.0;
inline constexpr double kMaxRelLevelDb = 5.0;
inline constexpr double kMaxPadS = 2.0;
inline constexpr int kMaxNoiseAttempts = 100;

/// The random part of a mixture; everything else is derived from audio.
struct MixtureDraw {
  double snr_db = 0.0;
  std::size_t pad_before = 0;  // samples at the target rate
  std::size_t pad_after = 0;
  int band = 0;
  std::size_t clip = 0;    // index into NoiseIndex::clips
  std::size_t offset = 0;  // target-rate samples from the start of the noise file
  double rel_level_db = 0.0;
  int attempts = 0;
};

/// Draw order: SNR, pads, band, file (redrawn within the band while too
/// short), offset, relative level.
inline MixtureDraw draw_mixture(Rng& rng, std::size_t len1, std::size_t len2, const NoisePool& pool, MixMode mode,
                                std::optional<double> rel_level_db = std::nullopt) {
  MixtureDraw d;
  const int rate = pool.rate();
  d.snr_db = rng.uniform(kSnrLowDb, kSnrHighDb);
  if (mode == MixMode::max) {
    const auto span = static_cast<std::uint64_t>(kMaxPadS * rate) + 1;
    d.pad_before = rng.index(span);
    d.pad_after = rng.index(span);
  }
  const std::size_t needed =
      mode == MixMode::max ? std::max(len1, len2) + d.pad_before + d.pad_after : std::min(len1, len2);
  d.band = pool.bands()[rng.index(pool.bands().size())];
  for (d.attempts = 1;; ++d.attempts) {
    d.clip = pool.pick_clip(rng, d.band);
    const auto span = clip_span(pool.index().clips[d.clip], rate);
    if (span.length() >= needed) {
      d.offset = span.begin + rng.index(span.length() - needed + 1);
      break;
    }
    if (d.attempts == kMaxNoiseAttempts) {
      throw ConstraintError("no noise clip in band " + std::to_string(d.band) + " covers " + std::to_string(needed) +
                            " samples after " + std::to_string(kMaxNoiseAttempts) + " attempts");
    }
  }
  d.rel_level_db = rel_level_db ? *rel_level_db : rng.uniform(0.0, kMaxRelLevelDb);
  return d;
}

/// One manifest row.
struct MixtureSpec {
  std::string mixture_id;
  std::string s1_path;
  std::string s2_path;
  double rel_level_db = 0.0;     // speaker 1 over speaker 2, >= 0
  double speaker_gain_db = 0.0;  // applied to both speakers
  std::string noise_path;
  double noise_offset_s = 0.0;
  double noise_snr_db = 0.0;
  double pad_before_s = 0.0;
  double pad_after_s = 0.0;
  MixMode mode = MixMode::max;
  int sample_rate_hz = 8000;

  std::size_t to_samples(double seconds) const {
    return static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
  }

  void validate() const {
    check_pipeline_rate(sample_rate_hz);
    auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
    if (!in(rel_level_db, 0.0, kMaxRelLevelDb)) throw InvalidArgument(mixture_id + ": rel_level_db outside [0, 5]");
    if (!in(noise_snr_db, kSnrLowDb, kSnrHighDb)) throw InvalidArgument(mixture_id + ": noise_snr_db outside [-6, 3]");
    if (!in(pad_before_s, 0.0, kMaxPadS) || !in(pad_after_s, 0.0, kMaxPadS)) {
      throw InvalidArgument(mixture_id + ": pads outside [0, 2] s");
    }
    if (mode == MixMode::min && (pad_before_s != 0.0 || pad_after_s != 0.0)) {
      throw InvalidArgument(mixture_id + ": min mode requires zero pads");
    }
    if (!(noise_offset_s >= 0.0) || !std::isfinite(speaker_gain_db)) throw InvalidArgument(mixture_id + ": bad offset or gain");
  }
};

struct SpeechPair {
  std::string mixture_id;
  std::string s1_path;
  std::string s2_path;
  std::optional<double> rel_level_db;
};

/// Thread-safe cache of decoded audio keyed by (path, rate), bounded by a byte
/// budget with least-recently-used eviction. Relative paths resolve against
/// `root`. Only channel 0 is kept.
class AudioStore {
 public:
  explicit AudioStore(std::filesystem::path root = {}, std::size_t budget_bytes = std::size_t{1} << 30)
      : root_(std::move(root)), budget_(budget_bytes) {}

  std::filesystem::path resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() || root_.empty() ? p : root_ / p;
  }

  /// rate 0 keeps the file's own rate.
  std::shared_ptr<const AudioBuffer> load(const std::string& path, int rate = 0) {
    const auto key = path + '\n' + std::to_string(rate);
    {
      std::lock_guard lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.lru);
        return it->second.audio;
      }
    }
    auto file = read_wav(resolve(path));
    auto mono = file.channel_count() == 1 ? std::move(file) : file.first_channel();
    auto audio = std::make_shared<const AudioBuffer>(rate == 0 ? std::move(mono) : resample(mono, rate));

    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second.audio;
    lru_.push_front(key);
    entries_[key] = {audio, lru_.begin()};
    used_ += audio->frames() * sizeof(double);
    while (used_ > budget_ && lru_.size() > 1) {
      const auto victim = entries_.find(lru_.back());
      used_ -= victim->second.audio->frames() * sizeof(double);
      entries_.erase(victim);
      lru_.pop_back();
    }
    return audio;
  }

 private:
  struct Entry {
    std::shared_ptr<const AudioBuffer> audio;
    std::list<std::string>::iterator lru;
  };
  std::filesystem::path root_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::mutex mutex_;
  std::list<std::string> lru_;
  std::map<std::string, Entry> entries_;
};

/// Speakers and noise cut and padded to the mixture timeline, before gains.
struct AlignedSources {
  AudioBuffer s1;
  AudioBuffer s2;
  AudioBuffer noise;
};

inline AlignedSources align_sources(const AudioBuffer& s1, const AudioBuffer& s2, const AudioBuffer& noise_native,
                                    std::size_t noise_offset, std::size_t pad_before, std::size_t pad_after,
                                    MixMode mode, int rate) {
  if (s1.sample_rate() != rate || s2.sample_rate() != rate) throw InvalidArgument("align_sources: speech not at target rate");
  if (mode == MixMode::min && (pad_before || pad_after)) throw InvalidArgument("align_sources: min mode takes no pads");
  const std::size_t core = mode == MixMode::max ? std::max(s1.frames(), s2.frames()) : std::min(s1.frames(), s2.frames());
  const auto fit = [&](const AudioBuffer& s) {
    const auto mode_fit = s.frames() < core ? FitMode::pad_end_silence : FitMode::truncate_end;
    return pad_both(pad_or_truncate(s, core, mode_fit), pad_before, pad_after);
  };
  const std::size_t total = pad_before + core + pad_after;
  if (noise_offset + total > resampled_length(noise_native.frames(), noise_native.sample_rate(), rate)) {
    throw InvalidArgument("align_sources: noise segment out of bounds");
  }
  return {fit(s1), fit(s2), resample_segment(noise_native, rate, noise_offset, total)};
}

inline constexpr double kGainToleranceDb = 0.01;

/// Draws and derives one manifest row. Speaker 1 is the louder speaker: a
/// negative supplied level swaps the pair, and a zero level orders the pair by
/// utterance id.
inline MixtureSpec sample_mixture_spec(std::uint64_t global_seed, const SpeechPair& pair, const NoisePool& pool,
                                       MixMode mode, AudioStore& store) {
  const int rate = pool.rate();
  check_pipeline_rate(rate);
  MixtureSpec spec;
  spec.mixture_id = pair.mixture_id;
  spec.s1_path = pair.s1_path;
  spec.s2_path = pair.s2_path;
  auto rel = pair.rel_level_db;
  if (rel && *rel < 0.0) {
    std::swap(spec.s1_path, spec.s2_path);
    rel = -*rel;
  }
  if (rel && *rel > kMaxRelLevelDb) throw InvalidArgument(pair.mixture_id + ": supplied relative level beyond 5 dB");

  const auto s1 = store.load(spec.s1_path, rate);
  const auto s2 = store.load(spec.s2_path, rate);
  Rng rng(row_seed(global_seed, pair.mixture_id));
  const auto d = draw_mixture(rng, s1->frames(), s2->frames(), pool, mode, rel);
  if (d.rel_level_db == 0.0 &&
      std::filesystem::path(spec.s2_path).stem().string() < std::filesystem::path(spec.s1_path).stem().string()) {
    std::swap(spec.s1_path, spec.s2_path);
  }

  const auto& clip = pool.index().clips[d.clip];
  spec.noise_path = clip.path;
  spec.rel_level_db = d.rel_level_db;
  spec.noise_snr_db = d.snr_db;
  spec.noise_offset_s = static_cast<double>(d.offset) / rate;
  spec.pad_before_s = static_cast<double>(d.pad_before) / rate;
  spec.pad_after_s = static_cast<double>(d.pad_after) / rate;
  spec.mode = mode;
  spec.sample_rate_hz = rate;

  const auto noise = store.load(clip.path);
  const auto& first = spec.s1_path == pair.s1_path ? *s1 : *s2;
  const auto& second = spec.s1_path == pair.s1_path ? *s2 : *s1;
  const auto a = align_sources(first, second, *noise, d.offset, d.pad_before, d.pad_after, mode, rate);
  spec.speaker_gain_db = gain_for_target_snr(a.s1, a.noise, SnrDb{spec.noise_snr_db}, kGainToleranceDb).db();
  return spec;
}

struct RenderedMixture {
  AudioBuffer mix;
  AudioBuffer s1;
  AudioBuffer s2;
  AudioBuffer noise;
};

/// Renders one row. Speaker 2 is set rel_level_db below speaker 1, both get
/// speaker_gain_db, and mix = (s1 + s2) + noise exactly.
inline RenderedMixture render_mixture(const MixtureSpec& spec, AudioStore& store) {
  spec.validate();
  const int rate = spec.sample_rate_hz;
  const auto s1 = store.load(spec.s1_path, rate);
  const auto s2 = store.load(spec.s2_path, rate);
  const auto noise = store.load(spec.noise_path);
  const auto a = align_sources(*s1, *s2, *noise, spec.to_samples(spec.noise_offset_s), spec.to_samples(spec.pad_before_s),
                               spec.to_samples(spec.pad_after_s), spec.mode, rate);
  // The relative gain is solved after the common gain: the absolute loudness
  // gate is not gain-invariant, so quiet blocks can drop out under a cut.
  const GainDb g(spec.speaker_gain_db);
  auto first = apply_gain(a.s1, g);
  const auto rel = gain_for_target_snr(apply_gain(a.s2, g), first, SnrDb{-spec.rel_level_db}, kGainToleranceDb);
  RenderedMixture out{AudioBuffer{}, std::move(first), apply_gain(a.s2, g + rel), a.noise};
  out.mix = add(add(out.s1, out.s2), out.noise);
  const std::size_t expect = spec.mode == MixMode::min ? std::min(s1->frames(), s2->frames()) : out.mix.frames();
  if (out.mix.frames() != expect) throw InvalidArgument(spec.mixture_id + ": length mismatch after alignment");
  return out;
}

/// One spec per pair; each row's randomness comes only from
/// (global_seed, mixture_id).
inline std::vector<MixtureSpec> plan_dataset(const std::vector<SpeechPair>& pairs, const NoisePool& pool,
                                             std::uint64_t global_seed, MixMode mode, AudioStore& store) {
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    if (!seen.insert(p.mixture_id).second) throw InvalidArgument("plan_dataset: duplicate mixture_id " + p.mixture_id);
  }
  std::vector<MixtureSpec> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(sample_mixture_spec(global_seed, p, pool, mode, store));
  return rows;
}

}  // namespace mixkit
