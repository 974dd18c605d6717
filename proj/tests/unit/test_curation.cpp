#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "signals.hpp"
#include "mixkit/curation.hpp"

using namespace mixkit;

namespace {

std::vector<NoiseRecording> uniform_instance(int locations, double hours_each) {
  std::vector<NoiseRecording> r;
  for (int i = 0; i < locations; ++i) {
    r.push_back({"rec" + std::to_string(i), "loc" + std::to_string(100 + i), "x.wav", hours_each * 3600.0,
                 40.0 + 1.5 * i, Split::unassigned});
  }
  return r;
}

// Threshold-based search: every triple of distinct location SPLs as edges.
struct OracleBins {
  bool feasible = false;
  std::array<double, 3> edges{};
};

OracleBins brute_force_bins(const std::vector<NoiseRecording>& recs, int min_loc, double min_hours) {
  std::vector<double> spls;
  for (const auto& r : recs) spls.push_back(r.spl_db);
  std::sort(spls.begin(), spls.end());
  spls.erase(std::unique(spls.begin(), spls.end()), spls.end());
  OracleBins best;
  double best_min = -1.0;
  for (std::size_t a = 1; a < spls.size(); ++a) {
    for (std::size_t b = a + 1; b < spls.size(); ++b) {
      for (std::size_t c = b + 1; c < spls.size(); ++c) {
        const double e[3] = {spls[a], spls[b], spls[c]};
        std::array<std::set<std::string>, 4> locs;
        std::array<double, 4> dur{};
        for (const auto& r : recs) {
          const int bin = (r.spl_db >= e[0]) + (r.spl_db >= e[1]) + (r.spl_db >= e[2]);
          locs[static_cast<std::size_t>(bin)].insert(r.location_id);
          dur[static_cast<std::size_t>(bin)] += r.duration_s;
        }
        bool ok = true;
        for (int k = 0; k < 4; ++k) {
          ok = ok && static_cast<int>(locs[static_cast<std::size_t>(k)].size()) >= min_loc &&
               dur[static_cast<std::size_t>(k)] >= min_hours * 3600.0;
        }
        const double worst = *std::min_element(dur.begin(), dur.end());
        if (ok && worst > best_min) {
          best_min = worst;
          best.feasible = true;
          best.edges = {e[0], e[1], e[2]};
        }
      }
    }
  }
  return best;
}

// Independent validation of a split assignment; returns a list of violations.
std::vector<std::string> check_assignment(const std::vector<NoiseRecording>& original, const BinPartition& partition,
                                          const SplitAssignment& a, int min_per_cell) {
  std::vector<std::string> problems;
  if (a.recordings.size() != original.size()) problems.push_back("recording count changed");
  std::map<std::string, Split> loc_split;
  std::map<std::pair<Split, int>, std::set<std::string>> cells;
  double total = 0.0, assigned = 0.0;
  for (std::size_t i = 0; i < a.recordings.size(); ++i) {
    const auto& r = a.recordings[i];
    if (r.id != original[i].id) problems.push_back("order changed at " + r.id);
    if (r.split == Split::unassigned) problems.push_back(r.id + " unassigned");
    auto [it, inserted] = loc_split.emplace(r.location_id, r.split);
    if (!inserted && it->second != r.split) problems.push_back("location split across splits: " + r.location_id);
    cells[{r.split, partition.bin_of_location(r.location_id)}].insert(r.location_id);
    total += r.duration_s;
  }
  for (Split s : kSplits) {
    for (int b = 0; b < 4; ++b) {
      if (static_cast<int>(cells[{s, b}].size()) < min_per_cell) {
        problems.push_back(to_string(s) + "/bin" + std::to_string(b) + " has " + std::to_string(cells[{s, b}].size()));
      }
    }
  }
  for (double d : a.duration_s) assigned += d;
  if (std::abs(assigned - total) > 1e-6 * total) problems.push_back("durations do not add up");
  return problems;
}

}  // namespace

// ---- binning -------------------------------------------------------------------

TEST(SplBins, ConstructedUniformInstance) {
  const auto recs = uniform_instance(24, 2.1);
  const auto p = find_spl_bins(recs);
  for (int b = 0; b < 4; ++b) {
    EXPECT_EQ(p.locations[static_cast<std::size_t>(b)].size(), 6u);
    EXPECT_GE(p.duration_s[static_cast<std::size_t>(b)], 12.6 * 3600.0 - 1e-6);
  }
  EXPECT_DOUBLE_EQ(p.edges[0], 40.0 + 1.5 * 6);
  EXPECT_DOUBLE_EQ(p.edges[2], 40.0 + 1.5 * 18);
}

TEST(SplBins, RelaxedConstraintsFourLocations) {
  const auto recs = uniform_instance(4, 0.1);
  const auto p = find_spl_bins(recs, {1, 0.0});
  for (int b = 0; b < 4; ++b) EXPECT_EQ(p.locations[static_cast<std::size_t>(b)].size(), 1u);
  for (const auto& r : recs) EXPECT_EQ(p.bin_of(r.spl_db), p.bin_of_location(r.location_id));
}

TEST(SplBins, MatchesBruteForceOnRandomInstances) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> secs(3600, 4 * 3600);
    std::uniform_int_distribution<int> half_db(80, 160);
    std::vector<NoiseRecording> recs;
    for (int i = 0; i < 44; ++i) {
      recs.push_back({"r" + std::to_string(i), "loc" + std::to_string(i), "x.wav", static_cast<double>(secs(rng)),
                      0.5 * half_db(rng), Split::unassigned});  // 0.5 dB grid forces SPL ties
    }
    const auto oracle = brute_force_bins(recs, 6, 12.0);
    ASSERT_TRUE(oracle.feasible);
    const auto p = find_spl_bins(recs);
    EXPECT_EQ(p.edges[0], oracle.edges[0]) << seed;
    EXPECT_EQ(p.edges[1], oracle.edges[1]) << seed;
    EXPECT_EQ(p.edges[2], oracle.edges[2]) << seed;
    for (const auto& r : recs) EXPECT_EQ(p.bin_of(r.spl_db), p.bin_of_location(r.location_id));
  }
}

TEST(SplBins, LocationSplIsDurationWeighted) {
  std::vector<NoiseRecording> recs{{"a", "L", "x", 3.0, 60.0, Split::unassigned},
                                   {"b", "L", "y", 1.0, 40.0, Split::unassigned}};
  const auto s = summarize_locations(recs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].spl_db, 55.0);
  EXPECT_DOUBLE_EQ(s[0].duration_s, 4.0);
}

TEST(SplBins, InfeasibleReportsBindingConstraint) {
  try {
    find_spl_bins(uniform_instance(3, 100.0));
    FAIL();
  } catch (const ConstraintError& e) {
    EXPECT_NE(std::string(e.what()).find("locations"), std::string::npos);
  }
  try {
    find_spl_bins(uniform_instance(24, 1.0));  // 6 h per bin
    FAIL();
  } catch (const ConstraintError& e) {
    EXPECT_NE(std::string(e.what()).find(" h per bin"), std::string::npos);
  }
  // Every SPL identical: no valid cut at all.
  auto same = uniform_instance(30, 3.0);
  for (auto& r : same) r.spl_db = 50.0;
  EXPECT_THROW(find_spl_bins(same), ConstraintError);
}

TEST(SplBins, RejectsInvalidRecordings) {
  auto recs = uniform_instance(24, 2.1);
  recs[3].duration_s = 0.0;
  EXPECT_THROW(find_spl_bins(recs), InvalidArgument);
  recs = uniform_instance(24, 2.1);
  recs[3].spl_db = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(find_spl_bins(recs), InvalidArgument);
}

// ---- splits --------------------------------------------------------------------

TEST(Splits, TightInstanceTwoPerCell) {
  const auto recs = uniform_instance(24, 2.1);
  const auto p = find_spl_bins(recs);
  const auto a = assign_splits(recs, p);
  EXPECT_TRUE(check_assignment(recs, p, a, 2).empty());
  std::map<std::pair<Split, int>, int> cells;
  for (const auto& r : a.recordings) ++cells[{r.split, p.bin_of_location(r.location_id)}];
  for (const auto& [k, n] : cells) EXPECT_EQ(n, 2);
  // Equal thirds cannot be within 20% of 30:10:5.
  EXPECT_FALSE(a.warnings.empty());
}

TEST(Splits, LocationAtomicity) {
  auto recs = uniform_instance(24, 2.1);
  recs.push_back({"dup", recs[5].location_id, "z.wav", 1000.0, recs[5].spl_db, Split::unassigned});
  const auto p = find_spl_bins(recs);
  const auto a = assign_splits(recs, p);
  EXPECT_EQ(a.recordings[5].split, a.recordings.back().split);
  EXPECT_TRUE(check_assignment(recs, p, a, 2).empty());
}

TEST(Splits, RandomInstancesPassIndependentChecker) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    std::uniform_real_distribution<double> hours(0.5, 6.0), spl(40.0, 90.0);
    std::vector<NoiseRecording> recs;
    for (int i = 0; i < 200; ++i) {
      const std::string loc = "loc" + std::to_string(i % 150);
      recs.push_back({"r" + std::to_string(i), loc, "x.wav", hours(rng) * 3600.0, spl(rng), Split::unassigned});
    }
    // Recordings of one location share their SPL so the location mean is well defined.
    for (auto& r : recs) r.spl_db = recs[static_cast<std::size_t>(std::stoi(r.location_id.substr(3)))].spl_db;
    const auto p = find_spl_bins(recs);
    const auto a = assign_splits(recs, p);
    const auto problems = check_assignment(recs, p, a, 2);
    EXPECT_TRUE(problems.empty()) << seed << ": " << (problems.empty() ? "" : problems.front());
    // With spare locations the ratio target is reachable.
    EXPECT_LE(a.max_ratio_deviation, 0.2) << seed;
    EXPECT_TRUE(a.warnings.empty()) << seed;
  }
}

TEST(Splits, InfeasibleBin) {
  auto recs = uniform_instance(24, 2.1);
  auto p = find_spl_bins(recs);
  p.locations[0].resize(5);
  EXPECT_THROW(assign_splits(recs, p), ConstraintError);
}

// ---- leakage -------------------------------------------------------------------

TEST(Leak, StrictThreshold) {
  std::vector<LeakEstimate> c(4);
  c[0].est_snr_db = -20.0;
  c[1].est_snr_db = -6.0;
  c[2].est_snr_db = -6.000001;
  c[3].est_snr_db = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < c.size(); ++i) c[i].chunk_index = i;
  const auto r = filter_speech_leakage(c);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].chunk_index, 0u);
  EXPECT_EQ(r.kept[1].chunk_index, 2u);
  EXPECT_DOUBLE_EQ(r.rejected_fraction(), 0.5);
  c[0].est_snr_db = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(filter_speech_leakage(c).kept.front().chunk_index, 0u);
}

TEST(Leak, ChunkRanges) {
  const auto r = chunk_ranges(25 * 8000, 8000);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[2].first, 160000u);
  EXPECT_EQ(r[2].second, 200000u);
  // A 0.2 s tail joins the previous chunk.
  const auto t = chunk_ranges(static_cast<std::size_t>(20.2 * 8000), 8000);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].second, static_cast<std::size_t>(20.2 * 8000));
  // Exactly 0.4 s stays its own chunk.
  EXPECT_EQ(chunk_ranges(static_cast<std::size_t>(10.4 * 8000), 8000).size(), 2u);
  EXPECT_EQ(chunk_ranges(3000, 8000).size(), 1u);
}

TEST(Leak, InjectedSpeechRejectedAtInjectionRate) {
  const int rate = 8000;
  const std::size_t chunks = 40, len = static_cast<std::size_t>(10 * rate);
  std::vector<double> fg, res;
  std::vector<bool> injected(chunks, false);
  injected[3] = injected[27] = true;  // 5%
  for (std::size_t c = 0; c < chunks; ++c) {
    auto n = fixtures::white(len, 100 + c, 0.05);
    auto s = fixtures::speech_like(len, rate, 140.0, 200 + c);
    const double k = (injected[c] ? 0.05 : 0.0005) / fixtures::rms(s);
    for (double& v : s) v *= k;
    res.insert(res.end(), n.begin(), n.end());
    fg.insert(fg.end(), s.begin(), s.end());
  }
  const auto ranges = chunk_ranges(fg.size(), rate);
  ASSERT_EQ(ranges.size(), chunks);
  const auto snr = estimate_leakage(AudioBuffer::mono(fg, rate), AudioBuffer::mono(res, rate), ranges);
  std::vector<LeakEstimate> est;
  for (std::size_t c = 0; c < chunks; ++c) est.push_back({"r", c, "fg", "res", ranges[c].first, len, snr[c]});
  const auto r = filter_speech_leakage(est);
  EXPECT_DOUBLE_EQ(r.rejected_fraction(), 0.05);
  for (const auto& k : r.rejected) EXPECT_TRUE(injected[k.chunk_index]);
}

TEST(Leak, SilentStems) {
  const int rate = 8000;
  const auto n = fixtures::white(rate, 1, 0.1);
  const std::vector<double> zero(rate, 0.0);
  const std::vector<std::pair<std::size_t, std::size_t>> one{{0, static_cast<std::size_t>(rate)}};
  EXPECT_EQ(estimate_leakage(AudioBuffer::mono(zero, rate), AudioBuffer::mono(n, rate), one)[0],
            -std::numeric_limits<double>::infinity());
  EXPECT_EQ(estimate_leakage(AudioBuffer::mono(n, rate), AudioBuffer::mono(zero, rate), one)[0],
            std::numeric_limits<double>::infinity());
  EXPECT_THROW(estimate_leakage(AudioBuffer::mono(n, rate), AudioBuffer::mono(zero, 16000), one), InvalidArgument);
}
