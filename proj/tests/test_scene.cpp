#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "asyncsep/scene.hpp"
#include "asyncsep/stft.hpp"
#include "oracles.hpp"

using namespace asyncsep;

namespace {

SceneSpec one_source_scene(std::size_t channels, double delay, double gain = 1.0) {
  SceneSpec s;
  s.rate_hz = 8000.0;
  s.duration_s = 0.5;
  s.arrays.push_back({"a", channels, 0.0});
  SourceSpec src;
  src.id = "s";
  src.signal.type = "noise";
  src.signal.level = 0.2;
  src.paths["a"] = std::vector<ChannelPath>(channels, ChannelPath{gain, delay, {}});
  s.sources.push_back(src);
  return s;
}

SceneSpec demo_like(std::size_t sources, std::size_t arrays, std::size_t channels) {
  SceneSpec s;
  s.rate_hz = 8000.0;
  s.duration_s = 0.4;
  s.noise_level = 0.01;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 20.0), g(0.2, 1.0);
  for (std::size_t m = 0; m < arrays; ++m)
    s.arrays.push_back({"a" + std::to_string(m), channels, m == 0 ? 0.0 : 0.3});
  for (std::size_t k = 0; k < sources; ++k) {
    SourceSpec src;
    src.id = "s" + std::to_string(k);
    src.signal.type = "speech";
    src.signal.seed = k;
    for (const auto& a : s.arrays)
      for (std::size_t c = 0; c < channels; ++c)
        src.paths[a.id].push_back({g(rng), d(rng), {{d(rng), 0.3}}});
    s.sources.push_back(src);
  }
  return s;
}

}  // namespace

TEST(SceneSpec, DemoConfigsParseAndValidate) {
  const auto scene = load_scene(std::filesystem::path(ASYNCSEP_DEMO_DIR) / "demo_scene.json");
  EXPECT_EQ(scene.arrays.size(), 3u);
  EXPECT_EQ(scene.sources.size(), 3u);
  EXPECT_EQ(scene.length(), 240000u);
  EXPECT_DOUBLE_EQ(scene.arrays[1].sro_hz, 0.3);
  EXPECT_DOUBLE_EQ(scene.arrays[2].sro_hz, -0.3);
  const auto train = load_scene(std::filesystem::path(ASYNCSEP_DEMO_DIR) / "demo_train_scene.json");
  EXPECT_EQ(train.source_ids(), scene.source_ids());
  EXPECT_DOUBLE_EQ(train.duration_s, 5.0);
}

TEST(SceneSpec, ValidationCatchesBadSpecs) {
  auto s = one_source_scene(2, 1.0);
  s.sources[0].paths["a"].pop_back();
  EXPECT_THROW(s.validate(), ConfigError);
  s = one_source_scene(2, -1.0);
  EXPECT_THROW(s.validate(), ConfigError);
  s = one_source_scene(2, 1.0);
  s.sources.push_back(s.sources[0]);
  EXPECT_THROW(s.validate(), ConfigError);
  s = one_source_scene(2, 1.0);
  s.duration_s = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = one_source_scene(2, 1.0);
  s.sources[0].paths.erase("a");
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_scene(nlohmann::json{{"rate_hz", 8000}}), ConfigError);
}

TEST(SceneSpec, JsonRoundTripPreservesSynthesis) {
  const auto s = demo_like(2, 2, 2);
  const auto back = parse_scene(nlohmann::json(s));
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(s));
  const auto a = synthesize_scene(s, 3), b = synthesize_scene(back, 3);
  for (std::size_t m = 0; m < 2; ++m) EXPECT_EQ(a.recordings[m].samples, b.recordings[m].samples);
}

TEST(SynthesizeScene, NoSourcesNoNoiseIsSilent) {
  SceneSpec s;
  s.rate_hz = 8000.0;
  s.duration_s = 0.1;
  s.arrays.push_back({"a", 2, 0.3});
  const auto r = synthesize_scene(s, 1);
  ASSERT_EQ(r.recordings.size(), 1u);
  for (std::size_t c = 0; c < 2; ++c)
    for (double v : r.recordings[0].samples.channel(c)) EXPECT_EQ(v, 0.0);
}

TEST(SynthesizeScene, UnitPathReproducesSource) {
  const auto s = one_source_scene(3, 0.0);
  const auto r = synthesize_scene(s, 11);
  const auto dry = source_signal(s, 0, 11);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < dry.size(); ++t) ASSERT_EQ(r.recordings[0].samples(c, t), dry[t]);
}

TEST(SynthesizeScene, FractionalDelayShiftsTone) {
  auto s = one_source_scene(1, 10.5);
  s.sources[0].signal = {};
  s.sources[0].signal.type = "tone";
  s.sources[0].signal.level = 1.0;
  s.sources[0].signal.frequency_hz = 200.0;
  const auto r = synthesize_scene(s, 1);
  const double w = 2.0 * std::numbers::pi * 200.0 / s.rate_hz;
  for (std::size_t t = 20; t < s.length(); ++t)
    ASSERT_NEAR(r.recordings[0].samples(0, t), std::sqrt(2.0) * std::sin(w * (t - 10.5)), 1e-3);
}

TEST(SynthesizeScene, DeterministicGivenSeed) {
  const auto s = demo_like(3, 2, 2);
  const auto a = synthesize_scene(s, 9), b = synthesize_scene(s, 9), c = synthesize_scene(s, 10);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(a.recordings[m].samples, b.recordings[m].samples);
    EXPECT_NE(a.recordings[m].samples, c.recordings[m].samples);
  }
}

TEST(SynthesizeScene, MixtureConsistencyWithoutOffsetOrNoise) {
  auto s = without_sro(demo_like(3, 2, 2));
  s.noise_level = 0.0;
  const auto r = synthesize_scene(s, 4);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < s.length(); ++t) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 3; ++k) sum += r.images.at(m, k)(c, t);
        ASSERT_EQ(r.recordings[m].samples(c, t), sum);
      }
}

TEST(SynthesizeScene, RejectsMismatchedFileRate) {
  const auto dir = std::filesystem::temp_directory_path() / "asyncsep_scene_test";
  std::filesystem::create_directories(dir);
  write_wav((dir / "src.wav").string(), SampledSignal(1, 100, 16000.0));
  auto s = one_source_scene(1, 0.0);
  s.base_dir = dir;
  s.sources[0].signal.type = "file";
  s.sources[0].signal.path = "src.wav";
  EXPECT_THROW(synthesize_scene(s, 1), ConfigError);
  s.rate_hz = 16000.0;
  EXPECT_NO_THROW(synthesize_scene(s, 1));
  s.sources[0].signal.path = "missing.wav";
  EXPECT_THROW(synthesize_scene(s, 1), ConfigError);
}

TEST(ApplySro, ZeroIsIdentityAndOneClockPerArray) {
  MultichannelRecording rec{"a", SampledSignal(2, 16000, 16000.0), 0.0};
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t t = 0; t < 16000; ++t) rec.samples(0, t) = rec.samples(1, t) = g(rng);
  EXPECT_EQ(apply_sro(rec, 0.0).samples, rec.samples);
  const auto out = apply_sro(rec, 0.3);
  EXPECT_DOUBLE_EQ(out.sro_hz, 0.3);
  for (std::size_t t = 0; t < 16000; ++t) ASSERT_EQ(out.samples(0, t), out.samples(1, t));
}

TEST(ApplySro, CommutesWithChannelSelection) {
  const auto s = demo_like(2, 1, 3);
  const auto r = synthesize_scene(without_sro(s), 1);
  const auto full = apply_sro(r.recordings[0], -0.3);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t pick[] = {c};
    MultichannelRecording one{"a", r.recordings[0].samples.select(pick), 0.0};
    EXPECT_EQ(apply_sro(one, -0.3).samples, full.samples.select(pick));
  }
}

TEST(ApplySro, TerminalDriftAfterFifteenSeconds) {
  auto s = one_source_scene(1, 0.0);
  s.rate_hz = 16000.0;
  s.duration_s = 15.0;
  s.sources[0].signal.type = "speech";
  const auto r = synthesize_scene(s, 1);
  const auto shifted = apply_sro(r.recordings[0], 0.3);
  const std::size_t from = s.length() - 8000;
  std::vector<double> x(r.recordings[0].samples.channel(0).begin() + from,
                        r.recordings[0].samples.channel(0).end());
  std::vector<double> y(shifted.samples.channel(0).begin() + from, shifted.samples.channel(0).end());
  EXPECT_NEAR(oracle::correlation_peak_lag(x, y, 12), 4.5, 0.1);
}

TEST(MixImages, SumsImagesExactly) {
  SourceImageSet set;
  set.arrays = {"a"};
  set.sources = {"p", "q", "r"};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  set.images.resize(1);
  for (int k = 0; k < 3; ++k) {
    SampledSignal img(2, 64, 8000.0);
    for (std::size_t c = 0; c < 2; ++c)
      for (auto& v : img.channel(c)) v = g(rng);
    set.images[0].push_back(img);
  }
  const auto mixed = mix_images(set, "a", 0.0, 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 64; ++t)
      EXPECT_EQ(mixed.samples(c, t),
                set.images[0][0](c, t) + set.images[0][1](c, t) + set.images[0][2](c, t));

  SourceImageSet single = set;
  single.images[0].resize(1);
  EXPECT_EQ(mix_images(single, 0, 0.0, 1).samples, set.images[0][0]);

  SourceImageSet opposite = single;
  SampledSignal neg = set.images[0][0];
  neg *= -1.0;
  opposite.images[0].push_back(neg);
  const auto cancelled = mix_images(opposite, 0, 0.0, 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (double v : cancelled.samples.channel(c)) EXPECT_EQ(v, 0.0);

  EXPECT_THROW(mix_images(set, "zzz", 0.0, 1), ConfigError);
  const auto noisy = mix_images(set, 0, 0.5, 1);
  EXPECT_EQ(noisy.samples, mix_images(set, 0, 0.5, 1).samples);
  EXPECT_NE(noisy.samples, mixed.samples);
}

TEST(PerturbDelays, JittersButKeepsDelaysValid) {
  const auto s = demo_like(2, 2, 2);
  const auto p = perturb_delays(s, 2.0, 1);
  EXPECT_NO_THROW(p.validate());
  EXPECT_NE(nlohmann::json(p), nlohmann::json(s));
  EXPECT_EQ(nlohmann::json(p), nlohmann::json(perturb_delays(s, 2.0, 1)));
}
