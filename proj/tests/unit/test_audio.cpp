#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "signals.hpp"
#include "mixkit/audio.hpp"

using namespace mixkit;

TEST(AudioBuffer, RejectsUnequalChannels) {
  EXPECT_THROW(AudioBuffer({{0.0, 1.0}, {0.0}}, 8000), InvalidArgument);
}

TEST(AudioBuffer, RejectsNonFinite) {
  EXPECT_THROW(AudioBuffer::mono({0.0, std::numeric_limits<double>::quiet_NaN()}, 8000), InvalidArgument);
  EXPECT_THROW(AudioBuffer::mono({std::numeric_limits<double>::infinity()}, 8000), InvalidArgument);
}

TEST(AudioBuffer, RejectsBadRate) { EXPECT_THROW(AudioBuffer::mono({0.0}, 0), InvalidArgument); }

TEST(GainDb, RejectsNonFinite) { EXPECT_THROW(GainDb(std::numeric_limits<double>::infinity()), InvalidArgument); }

TEST(ApplyGain, ZeroIsIdentity) {
  const auto x = AudioBuffer::mono(fixtures::white(100, 1), 8000);
  EXPECT_EQ(apply_gain(x, GainDb(0.0)), x);
}

TEST(ApplyGain, MinusSixDbHalves) {
  const auto x = AudioBuffer::mono({1.0}, 8000);
  const auto y = apply_gain(x, GainDb(20.0 * std::log10(0.5)));
  EXPECT_NEAR(y.channel(0)[0], 0.5, 1e-15);
  const auto z = apply_gain(x, GainDb(-6.0205));
  EXPECT_NEAR(z.channel(0)[0], 0.5, 1e-5);
}

TEST(ApplyGain, InverseComposition) {
  const auto x = AudioBuffer::mono(fixtures::white(256, 2), 16000);
  const auto y = apply_gain(apply_gain(x, GainDb(3.0)), GainDb(-3.0));
  for (std::size_t i = 0; i < x.frames(); ++i) {
    EXPECT_NEAR(y.channel(0)[i], x.channel(0)[i], 1e-12 * std::abs(x.channel(0)[i]) + 1e-300);
  }
}

TEST(ApplyGain, ComposesAdditively) {
  const auto x = AudioBuffer::mono(fixtures::white(256, 3), 16000);
  for (double g1 : {-12.0, -1.5, 0.0, 4.25}) {
    for (double g2 : {-7.0, 2.0, 9.5}) {
      const auto a = apply_gain(apply_gain(x, GainDb(g1)), GainDb(g2));
      const auto b = apply_gain(x, GainDb(g1 + g2));
      for (std::size_t i = 0; i < x.frames(); ++i) {
        EXPECT_NEAR(a.channel(0)[i], b.channel(0)[i], 1e-12 * std::abs(b.channel(0)[i]));
      }
    }
  }
}

TEST(PadOrTruncate, SameLengthIsIdentity) {
  const auto x = AudioBuffer::mono(fixtures::white(100, 4), 8000);
  EXPECT_EQ(pad_or_truncate(x, 100), x);
}

TEST(PadOrTruncate, PadsWithExactZeros) {
  const auto x = AudioBuffer::mono(fixtures::white(100, 5), 8000);
  const auto y = pad_or_truncate(x, 150, FitMode::pad_end_silence);
  ASSERT_EQ(y.frames(), 150u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(y.channel(0)[i], x.channel(0)[i]);
  for (std::size_t i = 100; i < 150; ++i) EXPECT_EQ(y.channel(0)[i], 0.0);
}

TEST(PadOrTruncate, TruncateKeepsPrefix) {
  const auto x = AudioBuffer::mono(fixtures::white(150, 6), 8000);
  const auto y = pad_or_truncate(x, 100, FitMode::truncate_end);
  ASSERT_EQ(y.frames(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(y.channel(0)[i], x.channel(0)[i]);
}

TEST(Slice, OutOfRangeThrows) {
  const auto x = AudioBuffer::mono(fixtures::white(10, 7), 8000);
  EXPECT_THROW(slice(x, 5, 6), InvalidArgument);
  EXPECT_EQ(slice(x, 5, 5).frames(), 5u);
}
