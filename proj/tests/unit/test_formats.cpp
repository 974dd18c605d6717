#include <gtest/gtest.h>

#include "instances.hpp"
#include "tempdir.hpp"
#include "mixkit/manifest.hpp"
#include "mixkit/tensor_io.hpp"

using namespace mixkit;

TEST(Fixed6, Formatting) {
  EXPECT_EQ(format_fixed6(1.0), "1.000000");
  EXPECT_EQ(format_fixed6(-0.0000001), "0.000000");
  EXPECT_EQ(format_fixed6(-2.5), "-2.500000");
  EXPECT_EQ(format_fixed6(1.0 / 16000.0), "0.000063");
}

TEST(Manifest, HeaderAndRoundTrip) {
  fixtures::TempDir dir;
  MixtureSpec s;
  s.mixture_id = "a";
  s.s1_path = "x/s1.wav";
  s.s2_path = "x/s2.wav";
  s.rel_level_db = 1.25;
  s.speaker_gain_db = -3.5;
  s.noise_path = "n.wav";
  s.noise_offset_s = 1.5;
  s.noise_snr_db = -2.0;
  s.pad_before_s = 0.25;
  s.pad_after_s = 2.0;
  write_manifest({s}, dir / "m.csv");
  const auto text = read_text(dir / "m.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), kManifestHeader);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_NE(text.find("a,x/s1.wav,x/s2.wav,1.250000,-3.500000,n.wav,1.500000,-2.000000,0.250000,2.000000,max,8000\n"),
            std::string::npos);
  const auto back = read_manifest(dir / "m.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(manifest_csv(back), text);
}

TEST(Manifest, RejectsMalformed) {
  fixtures::TempDir dir;
  write_text(dir / "bad.csv", "mixture_id,s1_path\nx,y\n");
  EXPECT_THROW(read_manifest(dir / "bad.csv"), IoError);
  write_text(dir / "bad2.csv", std::string(kManifestHeader) + "\na,b,c,zz,0,n,0,0,0,0,max,8000\n");
  EXPECT_THROW(read_manifest(dir / "bad2.csv"), IoError);
  write_text(dir / "bad3.csv", std::string(kManifestHeader) + "\na,b,c,9,0,n,0,0,0,0,max,8000\n");
  EXPECT_THROW(read_manifest(dir / "bad3.csv"), InvalidArgument);
  EXPECT_THROW(read_manifest(dir / "missing.csv"), IoError);
  MixtureSpec s;
  s.mixture_id = "has,comma";
  EXPECT_THROW(manifest_csv({s}), InvalidArgument);
}

TEST(PairList, OptionalLevelColumn) {
  fixtures::TempDir dir;
  write_text(dir / "p.csv", "mixture_id,s1_path,s2_path,rel_level_db\nm1,a.wav,b.wav,1.5\nm2,c.wav,d.wav,\n");
  const auto p = read_pair_list(dir / "p.csv");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(*p[0].rel_level_db, 1.5);
  EXPECT_FALSE(p[1].rel_level_db.has_value());
}

TEST(NoiseIndexJson, RoundTripAndDigest) {
  fixtures::TempDir dir;
  NoiseIndex idx;
  idx.edges = {50.0, 60.0, 70.5};
  idx.clips.push_back({"n/a.wav", "a", "L1", 2, Split::valid, 48000, 960000, 480000, 480000});
  write_text(dir / "i.json", noise_index_json(idx));
  const auto back = read_noise_index(dir / "i.json");
  EXPECT_EQ(index_digest(back), index_digest(idx));
  EXPECT_EQ(back.clips[0].split, Split::valid);
  idx.clips[0].frame_count = 1;
  EXPECT_NE(index_digest(back), index_digest(idx));
  write_text(dir / "bad.json", "{\"edges\": [1, 2]}");
  EXPECT_THROW(read_noise_index(dir / "bad.json"), IoError);
}

TEST(TensorIo, RealAndComplexRoundTrip) {
  fixtures::TempDir dir;
  const RealMatrix m = RealMatrix::Random(3, 5);
  dump_real(dir / "m", m);
  EXPECT_EQ(load_real(dir / "m"), m);

  Spectrogram s;
  s.config = StftConfig::for_rate(8000);
  s.bins = fixtures::random_complex(129, 7, 3);
  s.original_len = 100;
  dump_spectrogram(dir / "s", s);
  const auto back = load_spectrogram(dir / "s");
  EXPECT_EQ(back.bins, s.bins);
  EXPECT_EQ(back.config, s.config);
  EXPECT_EQ(back.original_len, 100u);
  // Row-major with interleaved parts: second value on disk is Im(X[0,0]).
  const auto raw = read_text(dir / "s.f64");
  double v[2];
  std::memcpy(v, raw.data(), sizeof v);
  EXPECT_EQ(v[1], s.bins(0, 0).imag());
  EXPECT_THROW(load_real(dir / "s"), IoError);
}
