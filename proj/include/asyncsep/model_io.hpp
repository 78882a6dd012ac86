#ifndef ASYNCSEP_MODEL_IO_HPP
#define ASYNCSEP_MODEL_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "asyncsep/errors.hpp"
#include "asyncsep/model.hpp"
#include "asyncsep/stft.hpp"

namespace asyncsep {

// Binary model container, little-endian:
//
//   char[8]  magic "ASEPMODL"
//   u32      version (1)
//   u32      M arrays, u32 K sources, u32 bins, u32 has_pooled
//   u32      window length, u32 hop, u32 shape (0 hann, 1 sqrt-hann)
//   f64      rate_hz, f64 noise_factor
//   M (+1 if pooled) x { u32 channels, u32 n, char[n] id }
//   K x { u32 n, char[n] id }
//   per array block (pooled last):
//     K x bins x (channels x channels complex, row-major, f64 re, f64 im)
//     bins x f64 noise_floor
//   K x bins x f64 long-term average spectrum lambda_k[f]
//
// High/low state variances and the noise spectrum are rebuilt from lambda
// and noise_factor on load.
struct ModelBundle {
  SpatialModel spatial;
  StateSpectrumModel states;
  WindowSpec window;
  double rate_hz = 16000.0;
};

inline constexpr std::array<char, 8> kModelMagic = {'A', 'S', 'E', 'P',
                                                    'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw ConfigError("corrupt model file (string length)");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void raw(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw ConfigError("truncated model file");
  }

 private:
  std::istream& is_;
};

}  // namespace detail

inline void write_model(std::ostream& os, const ModelBundle& bundle) {
  static_assert(std::endian::native == std::endian::little);
  const auto& sp = bundle.spatial;
  detail::BinaryWriter w(os);
  w.raw(kModelMagic.data(), kModelMagic.size());
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(sp.num_arrays()));
  w.u32(static_cast<std::uint32_t>(sp.num_sources()));
  w.u32(static_cast<std::uint32_t>(sp.bins));
  w.u32(sp.pooled ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(bundle.window.length));
  w.u32(static_cast<std::uint32_t>(bundle.window.hop));
  w.u32(bundle.window.shape == WindowShape::kHann ? 0u : 1u);
  w.f64(bundle.rate_hz);
  w.f64(bundle.states.noise_factor);

  std::vector<const ArrayCovariances*> blocks;
  for (const auto& a : sp.arrays) blocks.push_back(&a);
  if (sp.pooled) blocks.push_back(&*sp.pooled);
  for (const auto* a : blocks) {
    w.u32(static_cast<std::uint32_t>(a->channels));
    w.str(a->id);
  }
  for (const auto& s : sp.sources) w.str(s);
  for (const auto* a : blocks) {
    for (std::size_t k = 0; k < sp.num_sources(); ++k)
      for (std::size_t f = 0; f < sp.bins; ++f) {
        const auto& r = a->at(k, f);
        for (Eigen::Index i = 0; i < r.rows(); ++i)
          for (Eigen::Index j = 0; j < r.cols(); ++j) {
            w.f64(r(i, j).real());
            w.f64(r(i, j).imag());
          }
      }
    for (double v : a->noise_floor) w.f64(v);
  }
  for (const auto& lambda : bundle.states.average)
    for (double v : lambda) w.f64(v);
  if (!os) throw ConfigError("failed writing model");
}

inline ModelBundle read_model(std::istream& is) {
  detail::BinaryReader r(is);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kModelMagic) throw ConfigError("not a model file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw ConfigError("unsupported model version " + std::to_string(version));

  ModelBundle b;
  const std::uint32_t m = r.u32(), k = r.u32(), bins = r.u32(), pooled = r.u32();
  if (m == 0 || k == 0 || bins == 0 || m > 4096 || k > 4096 || bins > (1u << 20))
    throw ConfigError("corrupt model header");
  b.window.length = r.u32();
  b.window.hop = r.u32();
  b.window.shape = r.u32() == 0 ? WindowShape::kHann : WindowShape::kSqrtHann;
  b.window.validate();
  if (b.window.bins() != bins) throw ConfigError("model window/bin mismatch");
  b.rate_hz = r.f64();
  const double noise_factor = r.f64();

  auto& sp = b.spatial;
  sp.bins = bins;
  std::vector<ArrayCovariances> blocks(m + pooled);
  for (auto& a : blocks) {
    a.channels = r.u32();
    if (a.channels == 0 || a.channels > 1024) throw ConfigError("corrupt channel count");
    a.id = r.str();
  }
  for (std::uint32_t i = 0; i < k; ++i) sp.sources.push_back(r.str());
  for (auto& a : blocks) {
    const auto c = static_cast<Eigen::Index>(a.channels);
    a.covariances.assign(k, std::vector<Eigen::MatrixXcd>(bins));
    for (std::uint32_t s = 0; s < k; ++s)
      for (std::uint32_t f = 0; f < bins; ++f) {
        auto& mat = a.covariances[s][f];
        mat.resize(c, c);
        for (Eigen::Index i = 0; i < c; ++i)
          for (Eigen::Index j = 0; j < c; ++j) {
            const double re = r.f64();
            mat(i, j) = Complex(re, r.f64());
          }
      }
    a.noise_floor.resize(bins);
    for (auto& v : a.noise_floor) v = r.f64();
  }
  if (pooled) {
    sp.pooled = std::move(blocks.back());
    blocks.pop_back();
  }
  sp.arrays = std::move(blocks);

  auto& st = b.states;
  st.num_sources = k;
  st.bins = bins;
  st.average.assign(k, std::vector<double>(bins));
  for (auto& lambda : st.average)
    for (auto& v : lambda) v = r.f64();
  st.derive_levels(noise_factor);
  return b;
}

inline void save_model(const std::string& path, const ModelBundle& bundle) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_model(os, bundle);
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open model '" + path + "'");
  return read_model(is);
}

// Human-readable digest of a trained model.
inline void write_model_summary(std::ostream& os, const ModelBundle& b,
                                const CovarianceReport* report = nullptr) {
  const auto& sp = b.spatial;
  os << "model v" << kModelVersion << "\n"
     << "window " << to_string(b.window.shape) << " length " << b.window.length
     << " hop " << b.window.hop << " rate " << b.rate_hz << " Hz\n"
     << "bins " << sp.bins << "  states " << b.states.num_states()
     << " (" << sp.num_sources() << " directional + noise)"
     << "  noise factor " << b.states.noise_factor << "\n";
  os << "arrays:";
  for (const auto& a : sp.arrays) os << " " << a.id << "(" << a.channels << "ch)";
  if (sp.pooled) os << " [pooled " << sp.pooled->channels << "ch]";
  os << "\nsources:\n";
  for (std::size_t k = 0; k < sp.num_sources(); ++k) {
    double total = 0.0;
    for (double v : b.states.average[k]) total += v;
    os << "  " << sp.sources[k] << "  mean power "
       << total / static_cast<double>(sp.bins) << "\n";
  }
  if (report) {
    os << "silent-bin fallbacks: " << report->fallbacks.size() << "\n";
    const std::size_t shown = std::min<std::size_t>(report->fallbacks.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& fb = report->fallbacks[i];
      os << "  " << fb.array << "/" << fb.source << " bin " << fb.bin << "\n";
    }
  }
}

}  // namespace asyncsep

#endif  // ASYNCSEP_MODEL_IO_HPP
