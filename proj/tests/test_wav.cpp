#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "asyncsep/wav.hpp"

using namespace asyncsep;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "asyncsep_wav_test";
  fs::create_directories(dir);
  return dir / name;
}

SampledSignal random_signal(std::size_t channels, std::size_t length) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  SampledSignal s(channels, length, 16000.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (auto& v : s.channel(c)) v = u(rng);
  return s;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Wav, Float32RoundTrip) {
  const auto x = random_signal(3, 500);
  const auto p = temp_path("f32.wav");
  write_wav(p.string(), x);
  const auto y = read_wav(p.string());
  ASSERT_EQ(y.channels(), 3u);
  ASSERT_EQ(y.length(), 500u);
  EXPECT_EQ(y.rate_hz(), 16000.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 500; ++t) EXPECT_NEAR(y(c, t), x(c, t), 1e-7);
}

TEST(Wav, Pcm16RoundTrip) {
  const auto x = random_signal(2, 300);
  const auto p = temp_path("pcm16.wav");
  write_wav(p.string(), x, WavEncoding::kPcm16);
  const auto y = read_wav(p.string());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 300; ++t) EXPECT_NEAR(y(c, t), x(c, t), 1.0 / 32768.0);
}

TEST(Wav, ReadsExtensible24Bit) {
  // Hand-built WAVE_FORMAT_EXTENSIBLE, mono, 24-bit, two samples.
  std::vector<unsigned char> b = {'R', 'I', 'F', 'F', 0, 0, 0, 0, 'W', 'A', 'V', 'E',
                                  'f', 'm', 't', ' ', 40, 0, 0, 0,
                                  0xFE, 0xFF, 1, 0, 0x80, 0x3E, 0, 0, 0x80, 0xBB, 0, 0,
                                  3, 0, 24, 0, 22, 0, 24, 0, 4, 0, 0, 0,
                                  1, 0, 0, 0, 0, 0, 0x10, 0, 0x80, 0, 0, 0xAA, 0, 0x38, 0x9B, 0x71,
                                  'd', 'a', 't', 'a', 6, 0, 0, 0,
                                  0x00, 0x00, 0x40,   // +0.5
                                  0x00, 0x00, 0xC0};  // -0.5
  const auto p = temp_path("ext24.wav");
  write_bytes(p, b);
  const auto y = read_wav(p.string());
  ASSERT_EQ(y.length(), 2u);
  EXPECT_EQ(y.rate_hz(), 16000.0);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 1), -0.5);
}

TEST(Wav, RejectsGarbageAndMissingFiles) {
  const auto p = temp_path("garbage.wav");
  write_bytes(p, {'n', 'o', 'p', 'e'});
  EXPECT_THROW(read_wav(p.string()), ConfigError);
  EXPECT_THROW(read_wav(temp_path("does_not_exist.wav").string()), ConfigError);
}
