#ifndef ASYNCSEP_EXPERIMENT_HPP
#define ASYNCSEP_EXPERIMENT_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "asyncsep/classifier.hpp"
#include "asyncsep/metrics.hpp"
#include "asyncsep/model.hpp"
#include "asyncsep/model_io.hpp"
#include "asyncsep/scene.hpp"
#include "asyncsep/separator.hpp"
#include "asyncsep/stft.hpp"

namespace asyncsep {

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Trains spatial and state models from one or more sets of ground-truth
// images at the nominal clock; extra sets are pooled frame-wise.
inline ModelBundle train_models(std::span<const SourceImageSet> image_sets,
                                const WindowSpec& window, double noise_factor = 1.0,
                                CovarianceReport* report = nullptr) {
  if (image_sets.empty()) throw ConfigError("no training images");
  const auto& first = image_sets[0];
  TrainingImages training(first.arrays, first.sources);
  double rate = 0.0;
  for (const auto& set : image_sets) {
    if (set.arrays != first.arrays || set.sources != first.sources)
      throw ConfigError("training sets disagree on arrays or sources");
    for (std::size_t m = 0; m < set.arrays.size(); ++m)
      for (std::size_t k = 0; k < set.sources.size(); ++k) {
        rate = set.at(m, k).rate_hz();
        training.add(m, k, stft(set.at(m, k), window));
      }
  }
  ModelBundle bundle;
  bundle.window = window;
  bundle.rate_hz = rate;
  bundle.spatial = estimate_spatial_covariance(training, true, report);
  bundle.states = build_state_model(training, bundle.spatial, noise_factor);
  return bundle;
}

struct ExperimentOptions {
  std::vector<FilterMode> modes{std::begin(kAllModes), std::end(kAllModes)};
  std::uint64_t seed = 1;
  WindowSpec window{4096, 1024, WindowShape::kHann};
  double noise_factor = 1.0;
  std::size_t training_variants = 1;  // >1 adds delay-jittered training scenes
  double training_jitter = 0.0;       // samples
};

struct ModeResult {
  FilterMode mode = FilterMode::kTvDistributed;
  std::vector<std::vector<double>> sdr;  // [array][source]
  double mean_sdr = 0.0;
  double mixture_residual = 0.0;
  double seconds = 0.0;
};

struct ConditionResult {
  std::string name;             // "sro" or "no-sro"
  std::vector<double> sro_hz;   // per array
  std::vector<std::vector<double>> unprocessed;
  double unprocessed_mean = 0.0;
  std::vector<ModeResult> modes;

  const ModeResult& mode(FilterMode m) const {
    for (const auto& r : modes)
      if (r.mode == m) return r;
    throw ConfigError("mode " + to_string(m) + " was not run");
  }
};

struct ExperimentReport {
  std::vector<std::string> arrays;
  std::vector<std::string> sources;
  std::vector<ConditionResult> conditions;
  std::string config_digest;
  double train_seconds = 0.0;
  double total_seconds = 0.0;

  const ConditionResult& condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw ConfigError("condition '" + name + "' not in report");
  }
};

inline double mean_of(const std::vector<std::vector<double>>& table) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& row : table)
    for (double v : row) {
      acc += v;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : 0.0;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Trains on `train_scene`, then separates `scene` under every requested
// mode, once with the scene's sample-rate offsets and once with all offsets
// zeroed (only the latter when the scene has none). Each estimate is scored
// against the ground-truth image resampled to its device clock.
inline ExperimentReport run_experiment(const SceneSpec& scene, const SceneSpec& train_scene,
                                       const ExperimentOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  scene.validate();
  train_scene.validate();
  if (scene.source_ids() != train_scene.source_ids() ||
      scene.array_ids() != train_scene.array_ids())
    throw ConfigError("test and training scenes must share source and array ids");
  for (std::size_t m = 0; m < scene.arrays.size(); ++m)
    if (scene.arrays[m].channels != train_scene.arrays[m].channels)
      throw ConfigError("test and training scenes disagree on channel counts");
  if (scene.sources.empty()) throw ConfigError("scene has no sources");

  ExperimentReport report;
  report.arrays = scene.array_ids();
  report.sources = scene.source_ids();
  {
    std::ostringstream digest;
    digest << nlohmann::json(scene).dump() << nlohmann::json(train_scene).dump()
           << options.seed << options.window.length << options.window.hop
           << options.noise_factor << options.training_variants << options.training_jitter;
    for (auto m : options.modes) digest << to_string(m);
    report.config_digest = fnv1a_hex(digest.str());
  }

  const std::uint64_t train_seed = options.seed ^ 0x747261696eULL;
  std::vector<SourceImageSet> train_sets;
  train_sets.push_back(render_images(train_scene, train_seed));
  for (std::size_t v = 1; v < options.training_variants; ++v)
    train_sets.push_back(render_images(
        perturb_delays(train_scene, options.training_jitter, train_seed + v), train_seed + v));
  const auto model = train_models(train_sets, options.window, options.noise_factor);
  report.train_seconds = detail::seconds_since(t_start);

  const auto images = render_images(scene, options.seed);
  std::vector<MultichannelRecording> nominal;
  for (std::size_t m = 0; m < scene.arrays.size(); ++m)
    nominal.push_back(mix_images(images, m, scene.noise_level, options.seed));

  std::vector<SceneSpec> variants;
  bool any_sro = false;
  for (const auto& a : scene.arrays) any_sro |= a.sro_hz != 0.0;
  if (any_sro) variants.push_back(scene);
  variants.push_back(without_sro(scene));

  for (const auto& variant : variants) {
    ConditionResult cond;
    cond.name = &variant == &variants.back() ? "no-sro" : "sro";
    const auto truth = device_clock_images(images, variant);
    std::vector<SpectrogramTensor> observations;
    std::vector<MultichannelRecording> recordings;
    for (std::size_t m = 0; m < variant.arrays.size(); ++m) {
      cond.sro_hz.push_back(variant.arrays[m].sro_hz);
      recordings.push_back(apply_sro(nominal[m], variant.arrays[m].sro_hz, variant.lagrange_order));
      observations.push_back(stft(recordings.back().samples, options.window));
    }
    cond.unprocessed.resize(variant.arrays.size());
    for (std::size_t m = 0; m < variant.arrays.size(); ++m)
      for (std::size_t k = 0; k < variant.sources.size(); ++k)
        cond.unprocessed[m].push_back(sdr(truth.at(m, k), recordings[m].samples));
    cond.unprocessed_mean = mean_of(cond.unprocessed);

    for (FilterMode mode : options.modes) {
      const auto t0 = std::chrono::steady_clock::now();
      ModeResult r;
      r.mode = mode;
      const auto result = separate(observations, model.spatial, model.states, mode);
      r.mixture_residual = mixture_residual(result, observations);
      r.sdr.resize(variant.arrays.size());
      for (std::size_t m = 0; m < variant.arrays.size(); ++m)
        for (std::size_t k = 0; k < variant.sources.size(); ++k)
          r.sdr[m].push_back(sdr(truth.at(m, k), istft(result.images[m][k])));
      r.mean_sdr = mean_of(r.sdr);
      r.seconds = detail::seconds_since(t0);
      cond.modes.push_back(std::move(r));
    }
    report.conditions.push_back(std::move(cond));
  }
  report.total_seconds = detail::seconds_since(t_start);
  return report;
}

inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

inline nlohmann::json db_json(double v) {
  if (std::isfinite(v)) return v;
  return format_db(v);
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json j{{"version", 1},
                   {"config_digest", r.config_digest},
                   {"arrays", r.arrays},
                   {"sources", r.sources},
                   {"train_seconds", r.train_seconds},
                   {"total_seconds", r.total_seconds}};
  auto table = [&](const std::vector<std::vector<double>>& t) {
    nlohmann::json out = nlohmann::json::object();
    for (std::size_t m = 0; m < t.size(); ++m)
      for (std::size_t k = 0; k < t[m].size(); ++k)
        out[r.arrays[m]][r.sources[k]] = db_json(t[m][k]);
    return out;
  };
  for (const auto& c : r.conditions) {
    nlohmann::json cj{{"name", c.name},
                      {"sro_hz", c.sro_hz},
                      {"unprocessed_mean_sdr_db", db_json(c.unprocessed_mean)},
                      {"unprocessed_sdr_db", table(c.unprocessed)}};
    for (const auto& m : c.modes)
      cj["modes"].push_back({{"mode", to_string(m.mode)},
                             {"mean_sdr_db", db_json(m.mean_sdr)},
                             {"sdr_db", table(m.sdr)},
                             {"mixture_residual", m.mixture_residual},
                             {"seconds", m.seconds}});
    j["conditions"].push_back(cj);
  }
  return j;
}

inline void write_report_table(std::ostream& os, const ExperimentReport& r) {
  os << "config " << r.config_digest << "  train " << format_db(r.train_seconds)
     << " s  total " << format_db(r.total_seconds) << " s\n";
  for (const auto& c : r.conditions) {
    os << "\n[" << c.name << "] sro_hz:";
    for (std::size_t m = 0; m < c.sro_hz.size(); ++m)
      os << " " << r.arrays[m] << "=" << c.sro_hz[m];
    int width = 9;
    for (const auto& a : r.arrays)
      for (const auto& s : r.sources)
        width = std::max(width, static_cast<int>(a.size() + s.size()) + 3);
    os << "\n  " << std::left << std::setw(16) << "mode" << std::right << std::setw(10)
       << "mean";
    for (const auto& a : r.arrays)
      for (const auto& s : r.sources) os << std::setw(width) << (a + "/" + s);
    os << "\n";
    auto row = [&](const std::string& name, double mean,
                   const std::vector<std::vector<double>>& t) {
      os << "  " << std::left << std::setw(16) << name << std::right << std::setw(10)
         << format_db(mean);
      for (const auto& v : t)
        for (double x : v) os << std::setw(width) << format_db(x);
      os << "\n";
    };
    row("unprocessed", c.unprocessed_mean, c.unprocessed);
    for (const auto& m : c.modes) row(to_string(m.mode), m.mean_sdr, m.sdr);
  }
}

}  // namespace asyncsep

#endif  // ASYNCSEP_EXPERIMENT_HPP
