#ifndef ASYNCSEP_SCENE_HPP
#define ASYNCSEP_SCENE_HPP

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/resample.hpp"
#include "asyncsep/signal.hpp"
#include "asyncsep/wav.hpp"

namespace asyncsep {

inline constexpr int kSceneVersion = 1;

struct EchoTap {
  double delay = 0.0;  // samples
  double gain = 0.0;
};

// Acoustic path from a source to one microphone: a fractional delay and
// gain for the direct sound plus discrete echoes.
struct ChannelPath {
  double gain = 1.0;
  double delay = 0.0;  // samples
  std::vector<EchoTap> echoes;
};

// Dry source waveform. Types: "speech" (voiced syllables with random
// formants), "noise" (white Gaussian), "tone", "impulse", "file" (WAV).
struct SourceSignalSpec {
  std::string type = "speech";
  std::string path;
  double level = 0.1;  // RMS for speech/noise/tone, peak for impulse
  double f0_min_hz = 100.0;
  double f0_max_hz = 200.0;
  double frequency_hz = 440.0;
  double at_s = 0.0;
  std::uint64_t seed = 0;
};

struct SourceSpec {
  std::string id;
  SourceSignalSpec signal;
  std::map<std::string, std::vector<ChannelPath>> paths;  // array id -> per channel
};

struct ArraySpec {
  std::string id;
  std::size_t channels = 1;
  double sro_hz = 0.0;
};

struct SceneSpec {
  double rate_hz = 16000.0;
  double duration_s = 1.0;
  double noise_level = 0.0;  // per-channel white noise standard deviation
  int lagrange_order = kDefaultLagrangeOrder;
  std::vector<ArraySpec> arrays;
  std::vector<SourceSpec> sources;
  std::filesystem::path base_dir;  // for relative source file paths

  std::size_t length() const {
    return static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  }

  std::size_t array_index(const std::string& id) const {
    for (std::size_t m = 0; m < arrays.size(); ++m)
      if (arrays[m].id == id) return m;
    throw ConfigError("unknown array '" + id + "'");
  }

  std::vector<std::string> array_ids() const {
    std::vector<std::string> out;
    for (const auto& a : arrays) out.push_back(a.id);
    return out;
  }
  std::vector<std::string> source_ids() const {
    std::vector<std::string> out;
    for (const auto& s : sources) out.push_back(s.id);
    return out;
  }

  void validate() const {
    if (!(rate_hz > 0.0)) throw ConfigError("scene rate_hz must be positive");
    if (!(duration_s > 0.0)) throw ConfigError("scene duration_s must be positive");
    if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be non-negative");
    if (lagrange_order < 1) throw ConfigError("lagrange_order must be at least 1");
    if (arrays.empty()) throw ConfigError("scene has no arrays");
    std::set<std::string> ids;
    for (const auto& a : arrays) {
      if (a.id.empty() || !ids.insert(a.id).second)
        throw ConfigError("array ids must be unique and non-empty");
      if (a.channels == 0) throw ConfigError("array '" + a.id + "' has no channels");
      if (!std::isfinite(a.sro_hz) || std::abs(a.sro_hz) >= rate_hz)
        throw ConfigError("array '" + a.id + "' sro_hz out of range");
    }
    ids.clear();
    for (const auto& s : sources) {
      if (s.id.empty() || s.id == "noise" || !ids.insert(s.id).second)
        throw ConfigError("source ids must be unique, non-empty and not 'noise'");
      for (const auto& a : arrays) {
        const auto it = s.paths.find(a.id);
        if (it == s.paths.end())
          throw ConfigError("source '" + s.id + "' has no paths for array '" + a.id + "'");
        if (it->second.size() != a.channels)
          throw ConfigError("source '" + s.id + "' needs exactly " +
                            std::to_string(a.channels) + " paths for array '" + a.id + "'");
        for (const auto& p : it->second) {
          if (!(p.delay >= 0.0) || !std::isfinite(p.gain))
            throw ConfigError("source '" + s.id + "': delays must be >= 0");
          for (const auto& e : p.echoes)
            if (!(e.delay >= 0.0) || !std::isfinite(e.gain))
              throw ConfigError("source '" + s.id + "': echo delays must be >= 0");
        }
      }
      if (s.paths.size() != arrays.size())
        throw ConfigError("source '" + s.id + "' references unknown arrays");
    }
  }
};

// ---- configuration file ------------------------------------------------

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"version", kSceneVersion},
                     {"rate_hz", s.rate_hz},
                     {"duration_s", s.duration_s},
                     {"noise_level", s.noise_level},
                     {"lagrange_order", s.lagrange_order}};
  for (const auto& a : s.arrays)
    j["arrays"].push_back({{"id", a.id}, {"channels", a.channels}, {"sro_hz", a.sro_hz}});
  for (const auto& src : s.sources) {
    nlohmann::json sig{{"type", src.signal.type}, {"level", src.signal.level}};
    if (src.signal.type == "speech") {
      sig["f0_hz"] = {src.signal.f0_min_hz, src.signal.f0_max_hz};
      sig["seed"] = src.signal.seed;
    } else if (src.signal.type == "noise") {
      sig["seed"] = src.signal.seed;
    } else if (src.signal.type == "tone") {
      sig["frequency_hz"] = src.signal.frequency_hz;
    } else if (src.signal.type == "impulse") {
      sig["at_s"] = src.signal.at_s;
    } else if (src.signal.type == "file") {
      sig["path"] = src.signal.path;
    }
    nlohmann::json paths = nlohmann::json::object();
    for (const auto& [array, list] : src.paths) {
      for (const auto& p : list) {
        nlohmann::json pj{{"gain", p.gain}, {"delay", p.delay}};
        for (const auto& e : p.echoes) pj["echoes"].push_back({{"delay", e.delay}, {"gain", e.gain}});
        paths[array].push_back(pj);
      }
    }
    j["sources"].push_back({{"id", src.id}, {"signal", sig}, {"paths", paths}});
  }
}

inline SceneSpec parse_scene(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {}) {
  SceneSpec s;
  s.base_dir = base_dir;
  try {
    const int version = j.value("version", kSceneVersion);
    if (version != kSceneVersion)
      throw ConfigError("unsupported scene version " + std::to_string(version));
    s.rate_hz = j.at("rate_hz").get<double>();
    s.duration_s = j.at("duration_s").get<double>();
    s.noise_level = j.value("noise_level", 0.0);
    s.lagrange_order = j.value("lagrange_order", kDefaultLagrangeOrder);
    for (const auto& a : j.at("arrays"))
      s.arrays.push_back({a.at("id").get<std::string>(), a.at("channels").get<std::size_t>(),
                          a.value("sro_hz", 0.0)});
    for (const auto& src : j.value("sources", nlohmann::json::array())) {
      SourceSpec spec;
      spec.id = src.at("id").get<std::string>();
      const auto& sig = src.at("signal");
      spec.signal.type = sig.at("type").get<std::string>();
      spec.signal.level = sig.value("level", 0.1);
      spec.signal.seed = sig.value("seed", std::uint64_t{0});
      spec.signal.frequency_hz = sig.value("frequency_hz", 440.0);
      spec.signal.at_s = sig.value("at_s", 0.0);
      spec.signal.path = sig.value("path", std::string{});
      if (sig.contains("f0_hz")) {
        spec.signal.f0_min_hz = sig["f0_hz"].at(0).get<double>();
        spec.signal.f0_max_hz = sig["f0_hz"].at(1).get<double>();
      }
      for (const auto& [array, list] : src.at("paths").items()) {
        auto& out = spec.paths[array];
        for (const auto& p : list) {
          ChannelPath cp{p.value("gain", 1.0), p.value("delay", 0.0), {}};
          for (const auto& e : p.value("echoes", nlohmann::json::array()))
            cp.echoes.push_back({e.at("delay").get<double>(), e.at("gain").get<double>()});
          out.push_back(std::move(cp));
        }
      }
      s.sources.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  s.validate();
  return s;
}

inline SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open scene config '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scene config '" + path.string() + "': " + e.what());
  }
  return parse_scene(j, path.parent_path());
}

// ---- synthesis ---------------------------------------------------------

struct MultichannelRecording {
  std::string array;
  SampledSignal samples;
  double sro_hz = 0.0;  // device clock offset already applied
};

// Ground-truth source images, images[m][k], at a common clock.
struct SourceImageSet {
  std::vector<std::string> arrays;
  std::vector<std::string> sources;
  std::vector<std::vector<SampledSignal>> images;

  const SampledSignal& at(std::size_t m, std::size_t k) const { return images.at(m).at(k); }
};

namespace detail {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

inline void normalize_rms(std::vector<double>& x, double level) {
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (energy <= 0.0) return;
  const double g = level / std::sqrt(energy / static_cast<double>(x.size()));
  for (auto& v : x) v *= g;
}

// Sequence of voiced syllables separated by pauses. Each syllable is a
// harmonic complex with a gliding pitch and three random formants, so
// different talkers overlap little in time-frequency.
inline std::vector<double> speech_like(const SourceSignalSpec& spec, std::size_t length,
                                       double rate_hz, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  std::normal_distribution<double> breath(0.0, 1.0);
  std::vector<double> x(length, 0.0);
  const double nyquist = 0.5 * rate_hz;
  const double top = std::min(5000.0, 0.9 * nyquist);

  std::size_t t = static_cast<std::size_t>(range(0.0, 0.3) * rate_hz);
  while (t < length) {
    if (u(rng) < 0.3) {
      t += static_cast<std::size_t>(range(0.1, 0.45) * rate_hz);
      continue;
    }
    const auto dur = static_cast<std::size_t>(range(0.12, 0.35) * rate_hz);
    const double f0_start = range(spec.f0_min_hz, spec.f0_max_hz);
    const double f0_end = std::clamp(f0_start * range(0.85, 1.15), 0.5 * spec.f0_min_hz,
                                     1.5 * spec.f0_max_hz);
    const double formants[3] = {range(300, 900), range(900, 2400), range(2400, 3400)};
    const double weights[3] = {1.0, 0.6, 0.3};
    const auto n_harm = static_cast<std::size_t>(top / std::max(f0_start, f0_end));
    std::vector<double> amp(n_harm + 1, 0.0), phase(n_harm + 1, 0.0);
    for (std::size_t h = 1; h <= n_harm; ++h) {
      phase[h] = range(0.0, 2.0 * std::numbers::pi);
      const double fh = h * 0.5 * (f0_start + f0_end);
      double a = 0.02;
      for (int i = 0; i < 3; ++i) {
        const double z = (fh - formants[i]) / 180.0;
        a += weights[i] * std::exp(-0.5 * z * z);
      }
      amp[h] = a / std::sqrt(static_cast<double>(h));
    }
    const auto edge = static_cast<std::size_t>(0.03 * rate_hz);
    double f0_phase = 0.0;
    for (std::size_t i = 0; i < dur && t + i < length; ++i) {
      const double frac = static_cast<double>(i) / static_cast<double>(dur);
      const double f0 = f0_start + (f0_end - f0_start) * frac;
      f0_phase += 2.0 * std::numbers::pi * f0 / rate_hz;
      double env = 1.0;
      if (i < edge) env = std::sin(0.5 * std::numbers::pi * i / edge);
      else if (dur - i < edge) env = std::sin(0.5 * std::numbers::pi * (dur - i) / edge);
      double v = 0.0;
      for (std::size_t h = 1; h <= n_harm; ++h)
        if (h * f0 < nyquist) v += amp[h] * std::sin(h * f0_phase + phase[h]);
      x[t + i] = env * env * (v + 0.01 * breath(rng));
    }
    t += dur;
  }
  return x;
}

}  // namespace detail

// Dry waveform of source k, `length` samples long.
inline std::vector<double> source_signal(const SceneSpec& scene, std::size_t k,
                                         std::uint64_t seed) {
  const auto& spec = scene.sources.at(k).signal;
  const std::size_t length = scene.length();
  std::vector<double> x(length, 0.0);
  auto rng = detail::make_rng(seed, spec.seed, k);
  if (spec.type == "speech") {
    if (!(spec.f0_min_hz > 0.0 && spec.f0_max_hz >= spec.f0_min_hz))
      throw ConfigError("speech source needs 0 < f0_min <= f0_max");
    x = detail::speech_like(spec, length, scene.rate_hz, rng);
    detail::normalize_rms(x, spec.level);
  } else if (spec.type == "noise") {
    std::normal_distribution<double> g(0.0, spec.level);
    for (auto& v : x) v = g(rng);
  } else if (spec.type == "tone") {
    for (std::size_t t = 0; t < length; ++t)
      x[t] = spec.level * std::sqrt(2.0) *
             std::sin(2.0 * std::numbers::pi * spec.frequency_hz * t / scene.rate_hz);
  } else if (spec.type == "impulse") {
    const auto at = static_cast<std::size_t>(std::llround(spec.at_s * scene.rate_hz));
    if (at < length) x[at] = spec.level;
  } else if (spec.type == "file") {
    std::filesystem::path p(spec.path);
    if (p.is_relative()) p = scene.base_dir / p;
    const auto wav = read_wav(p.string());
    if (wav.rate_hz() != scene.rate_hz)
      throw ConfigError("source file '" + p.string() + "' is at " +
                        std::to_string(wav.rate_hz()) + " Hz, scene expects " +
                        std::to_string(scene.rate_hz));
    for (std::size_t t = 0; t < std::min(length, wav.length()); ++t) {
      double v = 0.0;
      for (std::size_t c = 0; c < wav.channels(); ++c) v += wav(c, t);
      x[t] = v / static_cast<double>(wav.channels());
    }
  } else {
    throw ConfigError("unknown source signal type '" + spec.type + "'");
  }
  return x;
}

// Source images at the nominal clock: every channel is the dry source
// through its delay/gain/echo path.
inline SourceImageSet render_images(const SceneSpec& scene, std::uint64_t seed) {
  scene.validate();
  SourceImageSet out;
  out.arrays = scene.array_ids();
  out.sources = scene.source_ids();
  out.images.resize(scene.arrays.size());
  std::vector<std::vector<double>> dry;
  for (std::size_t k = 0; k < scene.sources.size(); ++k)
    dry.push_back(source_signal(scene, k, seed));
  for (std::size_t m = 0; m < scene.arrays.size(); ++m) {
    const auto& array = scene.arrays[m];
    for (std::size_t k = 0; k < scene.sources.size(); ++k) {
      SampledSignal img(array.channels, scene.length(), scene.rate_hz);
      const auto& paths = scene.sources[k].paths.at(array.id);
      for (std::size_t c = 0; c < array.channels; ++c) {
        add_delayed(dry[k], paths[c].delay, paths[c].gain, img.channel(c),
                    scene.lagrange_order);
        for (const auto& e : paths[c].echoes)
          add_delayed(dry[k], paths[c].delay + e.delay, paths[c].gain * e.gain,
                      img.channel(c), scene.lagrange_order);
      }
      out.images[m].push_back(std::move(img));
    }
  }
  return out;
}

// Sample-wise sum of the array's images plus seeded white Gaussian noise.
inline MultichannelRecording mix_images(const SourceImageSet& images, std::size_t m,
                                        double noise_level, std::uint64_t seed) {
  if (m >= images.images.size() || images.images[m].empty())
    throw ConfigError("no source images for array index " + std::to_string(m));
  MultichannelRecording rec{images.arrays.at(m), images.images[m][0], 0.0};
  for (std::size_t k = 1; k < images.images[m].size(); ++k) rec.samples += images.images[m][k];
  if (noise_level > 0.0) {
    auto rng = detail::make_rng(seed, 0x6e6f697365ULL, m);
    std::normal_distribution<double> g(0.0, noise_level);
    for (std::size_t c = 0; c < rec.samples.channels(); ++c)
      for (auto& v : rec.samples.channel(c)) v += g(rng);
  }
  return rec;
}

inline MultichannelRecording mix_images(const SourceImageSet& images, const std::string& array,
                                        double noise_level, std::uint64_t seed) {
  for (std::size_t m = 0; m < images.arrays.size(); ++m)
    if (images.arrays[m] == array) return mix_images(images, m, noise_level, seed);
  throw ConfigError("no source images for array '" + array + "'");
}

// One device clock: every channel goes through the same resampler.
inline MultichannelRecording apply_sro(const MultichannelRecording& rec, double sro_hz,
                                       int order = kDefaultLagrangeOrder) {
  return {rec.array, lagrange_resample(rec.samples, sro_hz, order), rec.sro_hz + sro_hz};
}

// Ground-truth images as the devices would record them.
inline SourceImageSet device_clock_images(const SourceImageSet& images,
                                          const SceneSpec& scene) {
  SourceImageSet out = images;
  for (std::size_t m = 0; m < out.images.size(); ++m) {
    const double sro = scene.arrays.at(m).sro_hz;
    for (auto& img : out.images[m]) img = lagrange_resample(img, sro, scene.lagrange_order);
  }
  return out;
}

struct SceneRender {
  SourceImageSet images;                        // nominal clock
  std::vector<MultichannelRecording> recordings;  // device clock
};

inline SceneRender synthesize_scene(const SceneSpec& scene, std::uint64_t seed) {
  SceneRender out;
  out.images = render_images(scene, seed);
  for (std::size_t m = 0; m < scene.arrays.size(); ++m) {
    const auto noisy = scene.sources.empty()
                           ? MultichannelRecording{scene.arrays[m].id,
                                                   SampledSignal(scene.arrays[m].channels,
                                                                 scene.length(), scene.rate_hz),
                                                   0.0}
                           : mix_images(out.images, m, scene.noise_level, seed);
    auto rec = noisy;
    if (scene.sources.empty() && scene.noise_level > 0.0) {
      auto rng = detail::make_rng(seed, 0x6e6f697365ULL, m);
      std::normal_distribution<double> g(0.0, scene.noise_level);
      for (std::size_t c = 0; c < rec.samples.channels(); ++c)
        for (auto& v : rec.samples.channel(c)) v += g(rng);
    }
    out.recordings.push_back(apply_sro(rec, scene.arrays[m].sro_hz, scene.lagrange_order));
  }
  return out;
}

inline SceneSpec with_sro(SceneSpec scene, const std::map<std::string, double>& sro_hz) {
  for (const auto& [id, v] : sro_hz) scene.arrays.at(scene.array_index(id)).sro_hz = v;
  scene.validate();
  return scene;
}

inline SceneSpec without_sro(SceneSpec scene) {
  for (auto& a : scene.arrays) a.sro_hz = 0.0;
  return scene;
}

// Copy with every direct-path delay jittered by N(0, jitter^2) samples
// (clamped at 0); used to train covariances that tolerate small motion.
inline SceneSpec perturb_delays(SceneSpec scene, double jitter, std::uint64_t seed) {
  auto rng = detail::make_rng(seed, 0x6a6974746572ULL, 0);
  std::normal_distribution<double> g(0.0, jitter);
  for (auto& s : scene.sources)
    for (auto& [array, list] : s.paths)
      for (auto& p : list) p.delay = std::max(0.0, p.delay + g(rng));
  return scene;
}

}  // namespace asyncsep

#endif  // ASYNCSEP_SCENE_HPP
