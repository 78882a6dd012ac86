#ifndef ASYNCSEP_PIPELINE_HPP
#define ASYNCSEP_PIPELINE_HPP

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "asyncsep/classifier.hpp"
#include "asyncsep/errors.hpp"
#include "asyncsep/experiment.hpp"
#include "asyncsep/metrics.hpp"
#include "asyncsep/model_io.hpp"
#include "asyncsep/scene.hpp"
#include "asyncsep/separator.hpp"
#include "asyncsep/stft.hpp"
#include "asyncsep/wav.hpp"

// On-disk layout shared by the CLI subcommands.
//
//   <scene dir>/manifest.json              arrays, sources, rate, seed
//   <scene dir>/scene.json                 effective scene config
//   <scene dir>/recordings/<array>.wav     device-clock mixtures
//   <scene dir>/truth/<array>__<src>.wav   device-clock source images
//   <estimates>/<array>__<src>.wav         separated images (+ __noise)
//   <estimates>/manifest.json              mode, model and seed info
//
// All WAV output is 32-bit float at the nominal rate.
namespace asyncsep {

namespace fs = std::filesystem;

inline std::string image_file_name(const std::string& array, const std::string& source) {
  return array + "__" + source + ".wav";
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void simulate_to_dir(const SceneSpec& scene, const fs::path& out_dir, std::uint64_t seed) {
  const auto render = synthesize_scene(scene, seed);
  const auto truth = device_clock_images(render.images, scene);
  ensure_dir(out_dir / "recordings");
  ensure_dir(out_dir / "truth");
  for (const auto& rec : render.recordings)
    write_wav((out_dir / "recordings" / (rec.array + ".wav")).string(), rec.samples);
  for (std::size_t m = 0; m < truth.arrays.size(); ++m)
    for (std::size_t k = 0; k < truth.sources.size(); ++k)
      write_wav((out_dir / "truth" / image_file_name(truth.arrays[m], truth.sources[k])).string(),
                truth.at(m, k));
  nlohmann::json manifest{{"version", 1},   {"kind", "scene"},
                          {"seed", seed},   {"rate_hz", scene.rate_hz},
                          {"sources", scene.source_ids()}};
  for (const auto& a : scene.arrays)
    manifest["arrays"].push_back({{"id", a.id}, {"channels", a.channels}, {"sro_hz", a.sro_hz}});
  write_json_file(out_dir / "manifest.json", manifest);
  write_json_file(out_dir / "scene.json", nlohmann::json(scene));
}

// Ground-truth images of a simulated scene directory.
inline SourceImageSet load_truth_dir(const fs::path& dir) {
  if (!fs::is_regular_file(dir / "manifest.json"))
    throw ConfigError("'" + dir.string() + "' has no manifest.json (run simulate first)");
  const auto manifest = read_json_file(dir / "manifest.json");
  SourceImageSet set;
  try {
    for (const auto& a : manifest.at("arrays")) set.arrays.push_back(a.at("id").get<std::string>());
    set.sources = manifest.at("sources").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad manifest in '" + dir.string() + "': " + e.what());
  }
  if (set.arrays.empty() || set.sources.empty())
    throw ConfigError("'" + dir.string() + "' lists no arrays or sources");
  set.images.resize(set.arrays.size());
  for (std::size_t m = 0; m < set.arrays.size(); ++m)
    for (const auto& s : set.sources)
      set.images[m].push_back(read_wav((dir / "truth" / image_file_name(set.arrays[m], s)).string()));
  return set;
}

inline ModelBundle train_from_dirs(const std::vector<fs::path>& dirs, const fs::path& model_path,
                                   const WindowSpec& window, double noise_factor,
                                   std::ostream* log = nullptr) {
  if (dirs.empty()) throw ConfigError("no training directories");
  std::vector<SourceImageSet> sets;
  for (const auto& d : dirs) sets.push_back(load_truth_dir(d));
  CovarianceReport report;
  auto bundle = train_models(sets, window, noise_factor, &report);
  save_model(model_path.string(), bundle);
  std::ofstream summary(model_path.string() + ".txt");
  write_model_summary(summary, bundle, &report);
  if (log) write_model_summary(*log, bundle, &report);
  return bundle;
}

inline fs::path recording_path(const fs::path& dir, const std::string& array) {
  const auto nested = dir / "recordings" / (array + ".wav");
  return fs::exists(nested) ? nested : dir / (array + ".wav");
}

struct SeparateOptions {
  FilterMode mode = FilterMode::kTvDistributed;
  std::optional<double> noise_factor;
  bool export_posteriors = false;
};

inline SeparationResult separate_dir(const fs::path& model_path, const fs::path& recordings_dir,
                                     const fs::path& out_dir, const SeparateOptions& options) {
  auto bundle = load_model(model_path.string());
  if (options.noise_factor) bundle.states.set_noise_factor(*options.noise_factor);
  std::vector<SpectrogramTensor> observations;
  for (const auto& a : bundle.spatial.arrays) {
    const auto wav = read_wav(recording_path(recordings_dir, a.id).string());
    if (wav.rate_hz() != bundle.rate_hz)
      throw ConfigError("recording '" + a.id + "' rate differs from the model's");
    observations.push_back(stft(wav, bundle.window));
  }
  for (const auto& o : observations)
    if (o.frames() != observations[0].frames())
      throw ConfigError("recordings have different lengths");
  auto result = separate(observations, bundle.spatial, bundle.states, options.mode);
  ensure_dir(out_dir);
  for (std::size_t m = 0; m < result.arrays.size(); ++m) {
    for (std::size_t k = 0; k < result.sources.size(); ++k)
      write_wav((out_dir / image_file_name(result.arrays[m], result.sources[k])).string(),
                istft(result.images[m][k]));
    write_wav((out_dir / image_file_name(result.arrays[m], "noise")).string(),
              istft(result.images[m].back()));
  }
  write_json_file(out_dir / "manifest.json",
                  {{"version", 1},
                   {"kind", "estimates"},
                   {"mode", to_string(options.mode)},
                   {"model", model_path.string()},
                   {"arrays", result.arrays},
                   {"sources", result.sources},
                   {"mixture_residual", mixture_residual(result, observations)}});
  if (options.export_posteriors && result.posteriors) {
    std::ofstream bin(out_dir / "posteriors.bin", std::ios::binary);
    write_posteriors(bin, *result.posteriors);
    std::vector<std::string> names = result.sources;
    names.push_back("noise");
    std::ofstream txt(out_dir / "posteriors.txt");
    write_posterior_histogram(txt, *result.posteriors, names);
  }
  return result;
}

struct EvaluationEntry {
  std::string name;  // file stem, <array>__<source>
  double sdr_db = 0.0;
};

struct EvaluationReport {
  std::vector<EvaluationEntry> entries;
  double mean_sdr_db = 0.0;
};

// Scores every <array>__<source>.wav in the truth directory (or its truth/
// subdirectory) against the same-named estimate. Noise images are skipped.
// A scene directory may be passed for either argument.
inline EvaluationReport evaluate_dirs(fs::path estimates_dir, fs::path truth_dir) {
  if (fs::is_directory(truth_dir / "truth")) truth_dir /= "truth";
  if (fs::is_directory(estimates_dir / "truth")) estimates_dir /= "truth";
  if (!fs::is_directory(truth_dir)) throw ConfigError("no truth directory '" + truth_dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(truth_dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".wav" && name.find("__") != std::string::npos &&
        !e.path().stem().string().ends_with("__noise"))
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no source images in '" + truth_dir.string() + "'");
  EvaluationReport report;
  for (const auto& f : files) {
    const auto est = estimates_dir / f.filename();
    if (!fs::exists(est)) throw ConfigError("missing estimate '" + est.string() + "'");
    const auto ref = read_wav(f.string());
    const auto hat = read_wav(est.string());
    report.entries.push_back({f.stem().string(), sdr(ref, hat)});
    report.mean_sdr_db += report.entries.back().sdr_db;
  }
  report.mean_sdr_db /= static_cast<double>(report.entries.size());
  return report;
}

inline nlohmann::json evaluation_to_json(const EvaluationReport& r) {
  nlohmann::json j{{"version", 1}, {"mean_sdr_db", db_json(r.mean_sdr_db)}};
  j["sdr_db"] = nlohmann::json::object();
  for (const auto& e : r.entries) j["sdr_db"][e.name] = db_json(e.sdr_db);
  return j;
}

inline void write_evaluation_table(std::ostream& os, const EvaluationReport& r) {
  for (const auto& e : r.entries)
    os << std::left << std::setw(32) << e.name << std::right << std::setw(10)
       << format_db(e.sdr_db) << "\n";
  os << std::left << std::setw(32) << "mean" << std::right << std::setw(10)
     << format_db(r.mean_sdr_db) << "\n";
}

}  // namespace asyncsep

#endif  // ASYNCSEP_PIPELINE_HPP
