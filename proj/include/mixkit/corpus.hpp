#pragma once

// End-to-end curation of a noise corpus described by a metadata CSV:
// binning, split assignment, leakage filtering and the resulting clip index.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixkit/curation.hpp"
#include "mixkit/manifest.hpp"
#include "mixkit/mixing.hpp"
#include "mixkit/wav.hpp"

namespace mixkit {

struct CurationOptions {
  BinConstraints constraints;
  SplitTargets targets;
  double leak_threshold_db = -6.0;
  double spl_calibration_db = 94.0;  // SPL of a 0 dBFS RMS signal, used when metadata has no SPL
};

struct CurationResult {
  NoiseIndex index;
  BinPartition partition;
  SplitAssignment assignment;
  LeakFilterResult leak;
  bool leak_filter_applied = false;
  nlohmann::ordered_json details;  // bins, splits and leak statistics for the index file
  std::string stats_text;          // SPL and leak-SNR histograms
};

inline double rms_dbfs(const AudioBuffer& b) {
  double s = 0.0;
  for (double v : b.channel(0)) s += v * v;
  return 10.0 * std::log10(s / static_cast<double>(b.frames()));
}

namespace detail {

inline std::string histogram(const std::vector<double>& values, double lo, double width, const char* unit) {
  std::map<long, int> counts;
  int below = 0, above = 0;
  for (double v : values) {
    if (v == -INFINITY) {
      ++below;
    } else if (v == INFINITY || std::isnan(v)) {
      ++above;
    } else {
      ++counts[static_cast<long>(std::floor((v - lo) / width))];
    }
  }
  std::string out;
  char line[128];
  if (below) {
    std::snprintf(line, sizeof line, "  %14s  %5d\n", "-inf", below);
    out += line;
  }
  for (const auto& [k, c] : counts) {
    std::snprintf(line, sizeof line, "  [%5.1f,%5.1f) %s  %5d  ", lo + k * width, lo + (k + 1) * width, unit, c);
    out += line + std::string(static_cast<std::size_t>(std::min(c, 60)), '#') + "\n";
  }
  if (above) {
    std::snprintf(line, sizeof line, "  %14s  %5d\n", "+inf/unmeasurable", above);
    out += line;
  }
  return out;
}

}  // namespace detail

/// Metadata columns: recording_id, location_id, path, optional duration_s,
/// spl_db, foreground_path, residual_path. Relative paths resolve against `root`.
inline CurationResult curate_corpus(const std::filesystem::path& metadata_csv, const std::filesystem::path& root,
                                    const CurationOptions& options = {}) {
  std::vector<std::string> header;
  const auto rows = read_csv_rows(metadata_csv, header);
  const auto file = metadata_csv.string();
  const auto c_id = column(header, "recording_id", file);
  const auto c_loc = column(header, "location_id", file);
  const auto c_path = column(header, "path", file);
  auto optional_col = [&](const char* name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto c_dur = optional_col("duration_s"), c_spl = optional_col("spl_db");
  const auto c_fg = optional_col("foreground_path"), c_res = optional_col("residual_path");
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : root / q;
  };

  CurationResult out;
  std::vector<NoiseRecording> recordings;
  std::vector<AudioBuffer> audio;
  for (const auto& r : rows) {
    auto a = read_wav(resolve(r[c_path])).first_channel();
    NoiseRecording rec;
    rec.id = r[c_id];
    rec.location_id = r[c_loc];
    rec.path = r[c_path];
    rec.duration_s = c_dur && !r[*c_dur].empty() ? parse_double(r[*c_dur], "duration_s") : a.duration_s();
    rec.spl_db = c_spl && !r[*c_spl].empty() ? parse_double(r[*c_spl], "spl_db")
                                             : options.spl_calibration_db + rms_dbfs(a);
    recordings.push_back(rec);
    audio.push_back(std::move(a));
  }

  out.partition = find_spl_bins(recordings, options.constraints);
  out.assignment = assign_splits(recordings, out.partition, options.targets);
  out.index.edges = out.partition.edges;

  std::vector<double> leak_snrs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rec = out.assignment.recordings[i];
    const auto& a = audio[i];
    const auto ranges = chunk_ranges(a.frames(), a.sample_rate());
    std::vector<bool> keep(ranges.size(), true);
    const bool have_stems = c_fg && c_res && !rows[i][*c_fg].empty() && !rows[i][*c_res].empty();
    if (have_stems) {
      out.leak_filter_applied = true;
      const auto fg = read_wav(resolve(rows[i][*c_fg])).first_channel();
      const auto res = read_wav(resolve(rows[i][*c_res])).first_channel();
      const auto snr = estimate_leakage(fg, res, ranges);
      std::vector<LeakEstimate> est;
      for (std::size_t c = 0; c < ranges.size(); ++c) {
        est.push_back({rec.id, c, rows[i][*c_fg], rows[i][*c_res], ranges[c].first, ranges[c].second - ranges[c].first, snr[c]});
        leak_snrs.push_back(snr[c]);
      }
      const auto filtered = filter_speech_leakage(est, options.leak_threshold_db);
      std::fill(keep.begin(), keep.end(), false);
      for (const auto& k : filtered.kept) keep[k.chunk_index] = true;
      out.leak.kept.insert(out.leak.kept.end(), filtered.kept.begin(), filtered.kept.end());
      out.leak.rejected.insert(out.leak.rejected.end(), filtered.rejected.begin(), filtered.rejected.end());
    }
    // Adjacent kept chunks form one clip.
    for (std::size_t c = 0; c < ranges.size();) {
      if (!keep[c]) {
        ++c;
        continue;
      }
      std::size_t e = c;
      while (e + 1 < ranges.size() && keep[e + 1]) ++e;
      NoiseClip clip;
      clip.path = rec.path;
      clip.recording_id = rec.id;
      clip.location_id = rec.location_id;
      clip.band = out.partition.bin_of_location(rec.location_id);
      clip.split = rec.split;
      clip.sample_rate_hz = a.sample_rate();
      clip.file_frames = a.frames();
      clip.start_frame = ranges[c].first;
      clip.frame_count = ranges[e].second - ranges[c].first;
      out.index.clips.push_back(clip);
      c = e + 1;
    }
  }

  auto& d = out.details;
  d["bins"] = nlohmann::ordered_json::array();
  for (int b = 0; b < kBinCount; ++b) {
    d["bins"].push_back({{"locations", out.partition.locations[static_cast<std::size_t>(b)]},
                         {"duration_s", out.partition.duration_s[static_cast<std::size_t>(b)]}});
  }
  nlohmann::ordered_json splits;
  for (std::size_t s = 0; s < 3; ++s) splits[to_string(kSplits[s])] = {{"duration_s", out.assignment.duration_s[s]}};
  d["splits"] = splits;
  d["split_ratio_max_deviation"] = out.assignment.max_ratio_deviation;
  d["warnings"] = out.assignment.warnings;
  d["leak_filter"] = {{"applied", out.leak_filter_applied},
                      {"threshold_db", options.leak_threshold_db},
                      {"chunks", out.leak.kept.size() + out.leak.rejected.size()},
                      {"rejected", out.leak.rejected.size()},
                      {"rejected_fraction", out.leak.rejected_fraction()},
                      {"rejected_duration_fraction", out.leak.rejected_duration_fraction()}};

  std::vector<double> spls;
  for (const auto& r : recordings) spls.push_back(r.spl_db);
  char line[160];
  out.stats_text = "SPL histogram (recordings, 2 dB bins)\n" + detail::histogram(spls, 0.0, 2.0, "dB");
  out.stats_text += "\nBin edges (dB SPL):";
  for (double e : out.partition.edges) {
    std::snprintf(line, sizeof line, " %.2f", e);
    out.stats_text += line;
  }
  out.stats_text += "\n";
  if (out.leak_filter_applied) {
    out.stats_text += "\nEstimated speech SNR per 10 s chunk (2 dB bins)\n" + detail::histogram(leak_snrs, -60.0, 2.0, "dB");
    std::snprintf(line, sizeof line, "rejected %zu of %zu chunks (%.2f%%), threshold %.1f dB\n", out.leak.rejected.size(),
                  out.leak.kept.size() + out.leak.rejected.size(), 100.0 * out.leak.rejected_fraction(),
                  options.leak_threshold_db);
    out.stats_text += line;
  }
  return out;
}

}  // namespace mixkit
