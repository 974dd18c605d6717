#pragma once

// Noise-corpus curation: SPL binning of recording locations, split
// assignment, and the speech-leakage filter.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mixkit/audio.hpp"
#include "mixkit/error.hpp"
#include "mixkit/loudness.hpp"

namespace mixkit {

enum class Split { train, valid, test, unassigned };

inline constexpr std::array<Split, 3> kSplits{Split::train, Split::valid, Split::test};
inline constexpr int kBinCount = 4;

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train" || s == "tr") return Split::train;
  if (s == "valid" || s == "cv" || s == "dev") return Split::valid;
  if (s == "test" || s == "tt") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw InvalidArgument("unknown split: " + s);
}

struct NoiseRecording {
  std::string id;
  std::string location_id;
  std::string path;
  double duration_s = 0.0;
  double spl_db = 0.0;
  Split split = Split::unassigned;

  void validate() const {
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw InvalidArgument("recording " + id + ": duration must be > 0");
    if (!std::isfinite(spl_db)) throw InvalidArgument("recording " + id + ": SPL must be finite");
  }
};

struct BinConstraints {
  int min_locations = 6;
  double min_hours = 12.0;
};

struct LocationSummary {
  std::string location_id;
  double spl_db = 0.0;  // duration-weighted mean over the location's recordings
  double duration_s = 0.0;
};

/// Locations sorted by (SPL, id).
inline std::vector<LocationSummary> summarize_locations(const std::vector<NoiseRecording>& recordings) {
  std::map<std::string, std::pair<double, double>> acc;  // id -> (sum spl*dur, sum dur)
  for (const auto& r : recordings) {
    r.validate();
    auto& a = acc[r.location_id];
    a.first += r.spl_db * r.duration_s;
    a.second += r.duration_s;
  }
  std::vector<LocationSummary> out;
  for (const auto& [id, a] : acc) out.push_back({id, a.first / a.second, a.second});
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.spl_db < y.spl_db; });
  return out;
}

struct BinPartition {
  std::array<double, kBinCount - 1> edges{};  // bin b holds edges[b-1] <= spl < edges[b]
  std::array<std::vector<std::string>, kBinCount> locations;
  std::array<double, kBinCount> duration_s{};

  int bin_of(double spl_db) const {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), spl_db) - edges.begin());
  }

  int bin_of_location(const std::string& location_id) const {
    for (int b = 0; b < kBinCount; ++b) {
      const auto& l = locations[static_cast<std::size_t>(b)];
      if (std::find(l.begin(), l.end(), location_id) != l.end()) return b;
    }
    throw InvalidArgument("location not in partition: " + location_id);
  }
};

namespace detail {

// Best cut positions (i, j, k) over the SPL-sorted locations, or nullopt-like
// {0,0,0} when nothing satisfies the constraints.
inline std::array<std::size_t, 3> best_cuts(const std::vector<LocationSummary>& locs, int min_locations,
                                            double min_seconds, bool& found) {
  const std::size_t n = locs.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + locs[i].duration_s;
  auto valid_cut = [&](std::size_t p) { return locs[p - 1].spl_db < locs[p].spl_db; };
  auto ok = [&](std::size_t a, std::size_t b) {
    return b - a >= static_cast<std::size_t>(min_locations) && prefix[b] - prefix[a] >= min_seconds;
  };

  found = false;
  double best = -1.0;
  std::array<std::size_t, 3> cuts{};
  for (std::size_t i = 1; i + 2 < n + 1; ++i) {
    if (!valid_cut(i) || !ok(0, i)) continue;
    for (std::size_t j = i + 1; j + 1 < n + 1; ++j) {
      if (!valid_cut(j) || !ok(i, j)) continue;
      for (std::size_t k = j + 1; k < n; ++k) {
        if (!valid_cut(k) || !ok(j, k) || !ok(k, n)) continue;
        const double worst = std::min({prefix[i], prefix[j] - prefix[i], prefix[k] - prefix[j], prefix[n] - prefix[k]});
        if (worst > best) {
          best = worst;
          cuts = {i, j, k};
          found = true;
        }
      }
    }
  }
  return cuts;
}

}  // namespace detail

/// Three SPL edges splitting locations into four bins that each hold at least
/// `min_locations` locations and `min_hours` of audio. Candidate edges are the
/// location SPLs themselves; among feasible triples the one maximizing the
/// smallest bin duration wins, remaining ties going to the lowest edges.
inline BinPartition find_spl_bins(const std::vector<NoiseRecording>& recordings, BinConstraints constraints = {}) {
  const auto locs = summarize_locations(recordings);
  const double min_seconds = constraints.min_hours * 3600.0;
  bool found = false;
  const auto cuts = locs.size() >= kBinCount ? detail::best_cuts(locs, constraints.min_locations, min_seconds, found)
                                             : std::array<std::size_t, 3>{};
  if (!found) {
    double total = 0.0;
    for (const auto& l : locs) total += l.duration_s;
    std::string binding;
    bool only_locations = false, only_duration = false;
    if (locs.size() >= kBinCount) {
      detail::best_cuts(locs, constraints.min_locations, 0.0, only_locations);
      detail::best_cuts(locs, 1, min_seconds, only_duration);
    }
    if (locs.size() < static_cast<std::size_t>(kBinCount * constraints.min_locations) || !only_locations) {
      binding = "at least " + std::to_string(constraints.min_locations) + " locations per bin (" +
                std::to_string(locs.size()) + " distinct locations/SPL levels available)";
    } else if (total < kBinCount * min_seconds || !only_duration) {
      binding = "at least " + std::to_string(constraints.min_hours) + " h per bin (" + std::to_string(total / 3600.0) +
                " h available)";
    } else {
      binding = "locations and duration jointly (each is satisfiable alone)";
    }
    throw ConstraintError("find_spl_bins: infeasible; binding constraint: " + binding);
  }

  BinPartition p;
  for (std::size_t e = 0; e < 3; ++e) p.edges[e] = locs[cuts[e]].spl_db;
  const std::array<std::size_t, 5> bounds{0, cuts[0], cuts[1], cuts[2], locs.size()};
  for (std::size_t b = 0; b < kBinCount; ++b) {
    for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
      p.locations[b].push_back(locs[i].location_id);
      p.duration_s[b] += locs[i].duration_s;
    }
  }
  return p;
}

struct SplitTargets {
  double train_hours = 30.0;
  double valid_hours = 10.0;
  double test_hours = 5.0;

  double share(Split s) const {
    const double total = train_hours + valid_hours + test_hours;
    switch (s) {
      case Split::train: return train_hours / total;
      case Split::valid: return valid_hours / total;
      case Split::test: return test_hours / total;
      default: return 0.0;
    }
  }
};

struct SplitAssignment {
  std::vector<NoiseRecording> recordings;
  std::map<std::string, Split> location_split;
  std::array<double, 3> duration_s{};
  double max_ratio_deviation = 0.0;  // max over splits of |share / target share - 1|
  std::vector<std::string> warnings;
};

/// Assigns whole locations to train/valid/test. Every (split, bin) cell gets
/// `min_per_cell` locations first (longest to train), the rest go longest-first
/// to the split furthest below its target share, and a repair pass moves single
/// locations while that reduces the worst ratio deviation. A deviation above
/// `ratio_tolerance` is reported as a warning since small corpora cannot meet it.
inline SplitAssignment assign_splits(const std::vector<NoiseRecording>& recordings, const BinPartition& partition,
                                     SplitTargets targets = {}, int min_per_cell = 2, double ratio_tolerance = 0.2) {
  std::map<std::string, double> loc_duration;
  for (const auto& r : recordings) {
    r.validate();
    loc_duration[r.location_id] += r.duration_s;
  }
  struct Loc {
    std::string id;
    int bin;
    double duration;
  };
  std::vector<std::vector<Loc>> by_bin(kBinCount);
  for (int b = 0; b < kBinCount; ++b) {
    for (const auto& id : partition.locations[static_cast<std::size_t>(b)]) {
      const auto it = loc_duration.find(id);
      if (it == loc_duration.end()) throw InvalidArgument("assign_splits: partition location without recordings: " + id);
      by_bin[static_cast<std::size_t>(b)].push_back({id, b, it->second});
    }
    auto& v = by_bin[static_cast<std::size_t>(b)];
    std::sort(v.begin(), v.end(), [](const Loc& x, const Loc& y) {
      return x.duration != y.duration ? x.duration > y.duration : x.id < y.id;
    });
    if (v.size() < static_cast<std::size_t>(3 * min_per_cell)) {
      throw ConstraintError("assign_splits: infeasible; bin " + std::to_string(b) + " has " + std::to_string(v.size()) +
                            " locations, need " + std::to_string(3 * min_per_cell));
    }
  }
  for (const auto& [id, d] : loc_duration) {
    (void)d;
    bool placed = false;
    for (const auto& l : partition.locations) placed = placed || std::find(l.begin(), l.end(), id) != l.end();
    if (!placed) throw InvalidArgument("assign_splits: location missing from partition: " + id);
  }

  SplitAssignment out;
  std::map<std::string, std::size_t> split_of;
  std::array<std::array<int, kBinCount>, 3> cell{};
  std::array<double, 3> dur{};
  double total = 0.0;
  auto put = [&](const Loc& l, std::size_t s) {
    split_of[l.id] = s;
    ++cell[s][static_cast<std::size_t>(l.bin)];
    dur[s] += l.duration;
  };

  std::vector<Loc> rest;
  for (const auto& v : by_bin) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      total += v[i].duration;
      if (i < static_cast<std::size_t>(3 * min_per_cell)) {
        put(v[i], i % 3);
      } else {
        rest.push_back(v[i]);
      }
    }
  }
  std::sort(rest.begin(), rest.end(), [](const Loc& x, const Loc& y) {
    return x.duration != y.duration ? x.duration > y.duration : x.id < y.id;
  });
  for (const auto& l : rest) {
    std::size_t best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 3; ++s) {
      const double deficit = targets.share(kSplits[s]) * total - dur[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    put(l, best);
  }

  auto deviation = [&](const std::array<double, 3>& d) {
    double worst = 0.0;
    for (std::size_t s = 0; s < 3; ++s) worst = std::max(worst, std::abs(d[s] / (total * targets.share(kSplits[s])) - 1.0));
    return worst;
  };

  std::vector<Loc> all;
  for (const auto& v : by_bin) all.insert(all.end(), v.begin(), v.end());
  for (std::size_t iter = 0; iter < 4 * all.size(); ++iter) {
    const double current = deviation(dur);
    double best_dev = current;
    std::size_t best_loc = all.size(), best_to = 0;
    for (std::size_t li = 0; li < all.size(); ++li) {
      const auto& l = all[li];
      const std::size_t from = split_of[l.id];
      if (cell[from][static_cast<std::size_t>(l.bin)] <= min_per_cell) continue;
      for (std::size_t to = 0; to < 3; ++to) {
        if (to == from) continue;
        auto d = dur;
        d[from] -= l.duration;
        d[to] += l.duration;
        const double dev = deviation(d);
        if (dev < best_dev - 1e-12) {
          best_dev = dev;
          best_loc = li;
          best_to = to;
        }
      }
    }
    if (best_loc == all.size()) break;
    const auto& l = all[best_loc];
    const std::size_t from = split_of[l.id];
    --cell[from][static_cast<std::size_t>(l.bin)];
    dur[from] -= l.duration;
    put(l, best_to);
  }

  out.duration_s = dur;
  out.max_ratio_deviation = deviation(dur);
  if (out.max_ratio_deviation > ratio_tolerance) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "split durations deviate %.1f%% from the target ratio (tolerance %.0f%%)",
                  100.0 * out.max_ratio_deviation, 100.0 * ratio_tolerance);
    out.warnings.emplace_back(buf);
  }
  for (const auto& [id, s] : split_of) out.location_split[id] = kSplits[s];
  out.recordings = recordings;
  for (auto& r : out.recordings) r.split = out.location_split.at(r.location_id);
  return out;
}

// ---- speech leakage ------------------------------------------------------------

struct LeakEstimate {
  std::string recording_id;
  std::size_t chunk_index = 0;
  std::string foreground_path;
  std::string residual_path;
  std::size_t start_frame = 0;
  std::size_t frame_count = 0;
  double est_snr_db = 0.0;
};

struct LeakFilterResult {
  std::vector<LeakEstimate> kept;
  std::vector<LeakEstimate> rejected;

  double rejected_fraction() const {
    const auto n = kept.size() + rejected.size();
    return n == 0 ? 0.0 : static_cast<double>(rejected.size()) / static_cast<double>(n);
  }

  double rejected_duration_fraction() const {
    double k = 0.0, r = 0.0;
    for (const auto& c : kept) k += static_cast<double>(c.frame_count);
    for (const auto& c : rejected) r += static_cast<double>(c.frame_count);
    return k + r == 0.0 ? 0.0 : r / (k + r);
  }
};

/// Keeps a chunk iff its estimated foreground-to-residual SNR is strictly
/// below the threshold. NaN estimates are rejected.
inline LeakFilterResult filter_speech_leakage(const std::vector<LeakEstimate>& chunks, double threshold_db = -6.0) {
  LeakFilterResult out;
  for (const auto& c : chunks) (c.est_snr_db < threshold_db ? out.kept : out.rejected).push_back(c);
  return out;
}

/// [start, end) frame ranges of 10 s chunks. A tail too short for one gating
/// block is folded into the previous chunk so every chunk can be metered.
inline std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t frames, int sample_rate_hz,
                                                                     double chunk_s = 10.0) {
  const auto chunk = static_cast<std::size_t>(std::llround(chunk_s * sample_rate_hz));
  const auto min_tail = static_cast<std::size_t>(std::llround(0.4 * sample_rate_hz));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < frames; s += chunk) out.emplace_back(s, std::min(frames, s + chunk));
  if (out.size() > 1 && out.back().second - out.back().first < min_tail) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

/// Per-chunk LUFS SNR of the isolated foreground over the residual. A silent
/// foreground gives -inf (clean noise); a silent residual, or a chunk too short
/// to meter, gives +inf (nothing usable).
inline std::vector<double> estimate_leakage(const AudioBuffer& foreground, const AudioBuffer& residual,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  if (foreground.frames() != residual.frames() || foreground.sample_rate() != residual.sample_rate()) {
    throw InvalidArgument("estimate_leakage: foreground and residual differ in length or rate");
  }
  const auto min_len = static_cast<std::size_t>(std::llround(0.4 * foreground.sample_rate()));
  std::vector<double> out;
  for (const auto& [a, b] : ranges) {
    if (b - a < min_len) {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const auto fg = measure_lufs(slice(foreground, a, b - a));
    const auto res = measure_lufs(slice(residual, a, b - a));
    if (res.is_silent()) {
      out.push_back(std::numeric_limits<double>::infinity());
    } else if (fg.is_silent()) {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else {
      out.push_back(fg.lufs() - res.lufs());
    }
  }
  return out;
}

}  // namespace mixkit
