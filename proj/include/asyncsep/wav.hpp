#ifndef ASYNCSEP_WAV_HPP
#define ASYNCSEP_WAV_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/signal.hpp"

namespace asyncsep {

enum class WavEncoding { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

// Reads RIFF/WAVE with PCM 16/24/32-bit integer or IEEE 32/64-bit float
// samples (plain or WAVE_FORMAT_EXTENSIBLE). Integer data is scaled to [-1, 1).
inline SampledSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open WAV file '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError("'" + path + "': " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::size_t size = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, buf.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw fail("short fmt chunk");
      format = detail::le16(chunk + 8);
      channels = detail::le16(chunk + 10);
      rate = detail::le32(chunk + 12);
      bits = detail::le16(chunk + 22);
      if (format == 0xFFFE) {
        if (avail < 26) throw fail("short extensible fmt chunk");
        format = detail::le16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw fail("missing or invalid fmt chunk");
  if (!data) throw fail("missing data chunk");

  const bool is_float = format == 3;
  if (!(format == 1 && (bits == 16 || bits == 24 || bits == 32)) &&
      !(is_float && (bits == 32 || bits == 64)))
    throw fail("unsupported sample format " + std::to_string(format) + "/" +
               std::to_string(bits) + " bit");
  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  SampledSignal out(channels, frames, static_cast<double>(rate));
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (t * channels + c) * width;
      double v = 0.0;
      if (is_float && bits == 32) {
        v = std::bit_cast<float>(detail::le32(p));
      } else if (is_float) {
        const std::uint64_t u = std::uint64_t(detail::le32(p)) |
                                std::uint64_t(detail::le32(p + 4)) << 32;
        v = std::bit_cast<double>(u);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = p[0] | p[1] << 8 | p[2] << 16;
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(detail::le32(p)) / 2147483648.0;
      }
      out(c, t) = v;
    }
  return out;
}

inline void write_wav(const std::string& path, const SampledSignal& signal,
                      WavEncoding encoding = WavEncoding::kFloat32) {
  const auto channels = static_cast<std::uint16_t>(signal.channels());
  if (channels == 0) throw ConfigError("cannot write a WAV file with no channels");
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(signal.rate_hz()));
  const std::uint32_t block = channels * (bits / 8u);
  const std::uint32_t data_size = static_cast<std::uint32_t>(signal.length()) * block;

  std::vector<unsigned char> b;
  b.reserve(44 + data_size);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put32(b, 36 + data_size);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(b, 16);
  detail::put16(b, encoding == WavEncoding::kPcm16 ? 1 : 3);
  detail::put16(b, channels);
  detail::put32(b, rate);
  detail::put32(b, rate * block);
  detail::put16(b, static_cast<std::uint16_t>(block));
  detail::put16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put32(b, data_size);
  for (std::size_t t = 0; t < signal.length(); ++t)
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = signal(c, t);
      if (encoding == WavEncoding::kPcm16) {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        detail::put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
      } else {
        detail::put32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!os) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace asyncsep

#endif  // ASYNCSEP_WAV_HPP
