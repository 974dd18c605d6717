#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "mini_corpus.hpp"
#include "mixkit/loudness.hpp"
#include "mixkit/manifest.hpp"
#include "mixkit/mixing.hpp"

using namespace mixkit;

namespace {

fixtures::MiniCorpus& corpus() {
  static fixtures::MiniCorpus c;
  return c;
}

}  // namespace

TEST(ClipSpan, MapsNativeRangeToTargetRate) {
  NoiseClip c;
  c.sample_rate_hz = 48000;
  c.file_frames = 480000;
  c.start_frame = 3;
  c.frame_count = 48000;
  const auto s = clip_span(c, 8000);
  EXPECT_EQ(s.begin, 1u);           // ceil(3 / 6)
  EXPECT_EQ(s.end, 8001u);          // ceil(48003 / 6)
  c.start_frame = 0;
  c.frame_count = 480000;
  EXPECT_EQ(clip_span(c, 8000).end, 80000u);
}

TEST(Draw, RangesAndDeterminism) {
  const NoisePool pool(corpus().index, Split::train, 8000);
  Rng a(1), b(1);
  for (int i = 0; i < 2000; ++i) {
    const auto d = draw_mixture(a, 12000, 20000, pool, MixMode::max);
    const auto e = draw_mixture(b, 12000, 20000, pool, MixMode::max);
    EXPECT_EQ(d.offset, e.offset);
    EXPECT_EQ(d.snr_db, e.snr_db);
    EXPECT_GE(d.snr_db, -6.0);
    EXPECT_LE(d.snr_db, 3.0);
    EXPECT_LE(d.pad_before, 16000u);
    EXPECT_LE(d.pad_after, 16000u);
    EXPECT_GE(d.rel_level_db, 0.0);
    EXPECT_LE(d.rel_level_db, 5.0);
    const auto span = clip_span(corpus().index.clips[d.clip], 8000);
    EXPECT_GE(d.offset, span.begin);
    EXPECT_LE(d.offset + d.pad_before + 20000 + d.pad_after, span.end);
    EXPECT_EQ(corpus().index.clips[d.clip].band, d.band);
  }
}

TEST(Draw, MinModeHasNoPadsAndUsesShorterLength) {
  const NoisePool pool(corpus().index, Split::train, 8000);
  Rng r(3);
  for (int i = 0; i < 200; ++i) {
    const auto d = draw_mixture(r, 12000, 20000, pool, MixMode::min, 2.5);
    EXPECT_EQ(d.pad_before, 0u);
    EXPECT_EQ(d.pad_after, 0u);
    EXPECT_EQ(d.rel_level_db, 2.5);
    EXPECT_LE(d.offset + 12000, clip_span(corpus().index.clips[d.clip], 8000).end);
  }
}

TEST(Draw, TooLongUtteranceFailsAfterRetries) {
  const NoisePool pool(corpus().index, Split::train, 8000);
  Rng r(4);
  try {
    draw_mixture(r, 200000, 10, pool, MixMode::max);
    FAIL();
  } catch (const ConstraintError& e) {
    EXPECT_NE(std::string(e.what()).find("100 attempts"), std::string::npos);
  }
}

TEST(Draw, PoolRespectsSplitAndEmptyBands) {
  NoiseIndex idx = corpus().index;
  for (auto& c : idx.clips) {
    if (c.band == 2) c.split = Split::test;
  }
  const NoisePool pool(idx, Split::train, 8000);
  EXPECT_EQ(pool.bands(), (std::vector<int>{0, 1, 3}));
  EXPECT_THROW(NoisePool(idx, Split::valid, 8000), InvalidArgument);
}

TEST(Draw, WithinBandSelectionFollowsLength) {
  const NoisePool pool(corpus().index, Split::train, 8000);
  Rng r(9);
  std::map<std::size_t, int> hits;
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++hits[pool.pick_clip(r, 1)];
  // Clip 0 of each band is 12 s, clip 1 is 11 s.
  const auto& ids = pool.clips_in_band(1);
  EXPECT_NEAR(static_cast<double>(hits[ids[0]]) / n, 12.0 / 23.0, 0.01);
}

TEST(Spec, SamplingIsDeterministicPerRow) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 8000);
  const auto pairs = corpus().pairs(4);
  const auto a = sample_mixture_spec(42, pairs[1], pool, MixMode::max, store);
  const auto b = sample_mixture_spec(42, pairs[1], pool, MixMode::max, store);
  EXPECT_EQ(manifest_csv({a}), manifest_csv({b}));
  const auto c = sample_mixture_spec(43, pairs[1], pool, MixMode::max, store);
  EXPECT_NE(manifest_csv({a}), manifest_csv({c}));
}

TEST(Spec, NegativeSuppliedLevelSwapsSpeakers) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 8000);
  SpeechPair p{"m", corpus().utterances[0], corpus().utterances[1], -2.0};
  const auto s = sample_mixture_spec(1, p, pool, MixMode::max, store);
  EXPECT_EQ(s.s1_path, corpus().utterances[1]);
  EXPECT_EQ(s.rel_level_db, 2.0);
  p.rel_level_db = 0.0;
  std::swap(p.s1_path, p.s2_path);  // u01 first: tie ordered by utterance id
  EXPECT_EQ(sample_mixture_spec(1, p, pool, MixMode::max, store).s1_path, corpus().utterances[0]);
  p.rel_level_db = 7.0;
  EXPECT_THROW(sample_mixture_spec(1, p, pool, MixMode::max, store), InvalidArgument);
}

TEST(Render, AdditivityAndFidelityMaxMode) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 8000);
  const auto rows = plan_dataset(corpus().pairs(10), pool, 7, MixMode::max, store);
  for (const auto& spec : rows) {
    const auto r = render_mixture(spec, store);
    EXPECT_EQ(r.mix, add(add(r.s1, r.s2), r.noise));
    const auto& m = r.mix.channel(0);
    const auto& s1 = r.s1.channel(0);
    const auto& s2 = r.s2.channel(0);
    const auto& n = r.noise.channel(0);
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(m[i] - ((s1[i] + s2[i]) + n[i]), 0.0);
    EXPECT_NEAR(snr_lufs(r.s1, r.noise).value, spec.noise_snr_db, 0.1) << spec.mixture_id;
    EXPECT_NEAR(snr_lufs(r.s1, r.s2).value, spec.rel_level_db, 0.1) << spec.mixture_id;
    EXPECT_EQ(r.mix.frames(), spec.to_samples(spec.pad_before_s) + spec.to_samples(spec.pad_after_s) +
                                  std::max(store.load(spec.s1_path, 8000)->frames(), store.load(spec.s2_path, 8000)->frames()));
    // Leading pad holds noise only.
    for (std::size_t i = 0; i < spec.to_samples(spec.pad_before_s); ++i) ASSERT_EQ(s1[i], 0.0);
  }
}

TEST(Render, MinModeTruncatesToShorterSpeaker) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 16000);
  const auto rows = plan_dataset(corpus().pairs(6), pool, 11, MixMode::min, store);
  for (const auto& spec : rows) {
    EXPECT_EQ(spec.pad_before_s, 0.0);
    EXPECT_EQ(spec.pad_after_s, 0.0);
    const auto r = render_mixture(spec, store);
    const auto l1 = store.load(spec.s1_path, 16000)->frames(), l2 = store.load(spec.s2_path, 16000)->frames();
    EXPECT_EQ(r.mix.frames(), std::min(l1, l2));
    EXPECT_EQ(r.mix, add(add(r.s1, r.s2), r.noise));
    EXPECT_NEAR(snr_lufs(r.s1, r.noise).value, spec.noise_snr_db, 0.1);
  }
}

TEST(Render, RowOrderDoesNotMatter) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 8000);
  auto pairs = corpus().pairs(6);
  const auto forward = plan_dataset(pairs, pool, 5, MixMode::max, store);
  std::reverse(pairs.begin(), pairs.end());
  auto backward = plan_dataset(pairs, pool, 5, MixMode::max, store);
  std::reverse(backward.begin(), backward.end());
  EXPECT_EQ(manifest_csv(forward), manifest_csv(backward));
  for (std::size_t i = 0; i < forward.size(); ++i) {
    AudioStore fresh(corpus().dir.path());
    EXPECT_EQ(render_mixture(forward[forward.size() - 1 - i], fresh).mix,
              render_mixture(backward[backward.size() - 1 - i], store).mix);
  }
}

TEST(Render, ManifestRoundTripRendersIdentically) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 16000);
  const auto rows = plan_dataset(corpus().pairs(3), pool, 99, MixMode::max, store);
  write_manifest(rows, corpus().dir / "m.csv");
  const auto back = read_manifest(corpus().dir / "m.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto a = render_mixture(rows[i], store);
    const auto b = render_mixture(back[i], store);
    EXPECT_EQ(a.mix.frames(), b.mix.frames());
    EXPECT_EQ(a.noise, b.noise);  // offsets and pads survive 6-decimal serialization exactly
    EXPECT_NEAR(snr_lufs(b.s1, b.noise).value, back[i].noise_snr_db, 0.1);
  }
}

TEST(Render, Errors) {
  AudioStore store(corpus().dir.path());
  const NoisePool pool(corpus().index, Split::train, 8000);
  auto spec = plan_dataset(corpus().pairs(1), pool, 1, MixMode::max, store)[0];
  auto bad = spec;
  bad.noise_offset_s = 11.9;
  EXPECT_THROW(render_mixture(bad, store), InvalidArgument);
  bad = spec;
  bad.noise_snr_db = 4.0;
  EXPECT_THROW(render_mixture(bad, store), InvalidArgument);
  bad = spec;
  bad.s1_path = "speech/missing.wav";
  EXPECT_THROW(render_mixture(bad, store), IoError);
  auto pairs = corpus().pairs(2);
  pairs[1].mixture_id = pairs[0].mixture_id;
  EXPECT_THROW(plan_dataset(pairs, pool, 1, MixMode::max, store), InvalidArgument);
}

TEST(AudioStore, EvictsUnderBudgetButStaysCorrect) {
  AudioStore small(corpus().dir.path(), 1);
  const auto a = small.load(corpus().utterances[0], 8000);
  const auto b = small.load(corpus().utterances[1], 8000);
  const auto a2 = small.load(corpus().utterances[0], 8000);
  EXPECT_EQ(*a, *a2);
  EXPECT_NE(a->frames(), b->frames());
}
