// Command-line front end: simulate | train | separate | evaluate | experiment.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/experiment.hpp"
#include "asyncsep/pipeline.hpp"
#include "asyncsep/scene.hpp"
#include "asyncsep/separator.hpp"
#include "asyncsep/stft.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::map<std::string, double> parse_sro_overrides(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw asyncsep::ConfigError("--sro-override expects ARRAY=HZ, got '" + item + "'");
    try {
      std::size_t used = 0;
      const double v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      out[item.substr(0, eq)] = v;
    } catch (const std::logic_error&) {
      throw asyncsep::ConfigError("bad offset in --sro-override '" + item + "'");
    }
  }
  return out;
}

struct StftFlags {
  std::size_t length = 4096;
  double overlap = 0.75;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--stft-len", length, "STFT frame length in samples")->capture_default_str();
    cmd->add_option("--overlap", overlap, "frame overlap fraction")->capture_default_str();
  }
  asyncsep::WindowSpec window() const {
    auto w = asyncsep::WindowSpec::from_overlap(length, overlap);
    w.validate();
    return w;
  }
};

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  CLI::App app{"Source separation for asynchronous multi-device microphone arrays"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::vector<std::string> sro_items;

  auto* sim = app.add_subcommand("simulate", "render a scene config to recordings and truth images");
  std::string scene_path, out_dir;
  sim->add_option("scene", scene_path, "scene config (JSON)")->required();
  sim->add_option("out", out_dir, "output directory")->required();
  sim->add_option("--seed", seed, "random seed")->capture_default_str();
  sim->add_option("--sro-override", sro_items, "per-array offset, ARRAY=HZ (repeatable)");

  auto* train = app.add_subcommand("train", "estimate spatial and state models from truth images");
  std::vector<std::string> image_dirs;
  std::string model_path;
  double noise_gain = 1.0;
  StftFlags train_stft;
  train->add_option("images", image_dirs, "simulated scene directories (pooled)")->required();
  train->add_option("--model", model_path, "output model file")->required();
  train->add_option("--noise-gain", noise_gain, "diffuse-noise power relative to mean source power")
      ->capture_default_str();
  train_stft.add_to(train);

  auto* sep = app.add_subcommand("separate", "apply the separation filters to recordings");
  std::string sep_model, rec_dir, sep_out, mode_name = "tv-distributed";
  std::optional<double> sep_noise_gain;
  bool export_posteriors = false;
  sep->add_option("model", sep_model, "model file from train")->required();
  sep->add_option("recordings", rec_dir, "scene directory or directory of <array>.wav")->required();
  sep->add_option("out", sep_out, "output directory")->required();
  sep->add_option("--mode", mode_name, "static-local | static-pooled | tv-local | tv-distributed")
      ->capture_default_str();
  sep->add_option("--noise-gain", sep_noise_gain, "override the model's noise gain");
  sep->add_flag("--export-posteriors", export_posteriors, "write posteriors.bin and posteriors.txt");

  auto* eval = app.add_subcommand("evaluate", "score estimates against truth images (SDR)");
  std::string est_dir, truth_dir, report_path;
  eval->add_option("estimates", est_dir, "directory of estimated images")->required();
  eval->add_option("truth", truth_dir, "scene directory or truth directory")->required();
  eval->add_option("--report", report_path, "write a JSON report here");

  auto* exp = app.add_subcommand("experiment", "train, separate and score every filter mode");
  std::string exp_scene, exp_train, exp_report;
  std::vector<std::string> exp_modes;
  double exp_noise_gain = 1.0;
  StftFlags exp_stft;
  exp->add_option("scene", exp_scene, "test scene config")->required();
  exp->add_option("train_scene", exp_train, "training scene config")->required();
  exp->add_option("--mode", exp_modes, "filter modes (default: all)");
  exp->add_option("--seed", seed, "random seed")->capture_default_str();
  exp->add_option("--sro-override", sro_items, "per-array offset, ARRAY=HZ (repeatable)");
  exp->add_option("--noise-gain", exp_noise_gain, "diffuse-noise power relative to mean source power")
      ->capture_default_str();
  exp->add_option("--report", exp_report, "write a JSON report here");
  exp_stft.add_to(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (sim->parsed()) {
      auto scene = asyncsep::with_sro(asyncsep::load_scene(scene_path),
                                      parse_sro_overrides(sro_items));
      asyncsep::simulate_to_dir(scene, out_dir, seed);
      std::cout << "wrote " << scene.arrays.size() << " recordings and "
                << scene.arrays.size() * scene.sources.size() << " images to " << out_dir << "\n";
    } else if (train->parsed()) {
      std::vector<fs::path> dirs(image_dirs.begin(), image_dirs.end());
      asyncsep::train_from_dirs(dirs, model_path, train_stft.window(), noise_gain, &std::cout);
    } else if (sep->parsed()) {
      asyncsep::SeparateOptions opt;
      opt.mode = asyncsep::parse_filter_mode(mode_name);
      opt.noise_factor = sep_noise_gain;
      opt.export_posteriors = export_posteriors;
      const auto result = asyncsep::separate_dir(sep_model, rec_dir, sep_out, opt);
      std::cout << "separated " << result.sources.size() << " sources on "
                << result.arrays.size() << " arrays (" << mode_name << ") into " << sep_out << "\n";
    } else if (eval->parsed()) {
      const auto report = asyncsep::evaluate_dirs(est_dir, truth_dir);
      asyncsep::write_evaluation_table(std::cout, report);
      if (!report_path.empty())
        asyncsep::write_json_file(report_path, asyncsep::evaluation_to_json(report));
    } else if (exp->parsed()) {
      auto scene = asyncsep::with_sro(asyncsep::load_scene(exp_scene),
                                      parse_sro_overrides(sro_items));
      const auto train_scene = asyncsep::load_scene(exp_train);
      asyncsep::ExperimentOptions opt;
      opt.seed = seed;
      opt.window = exp_stft.window();
      opt.noise_factor = exp_noise_gain;
      if (!exp_modes.empty()) {
        opt.modes.clear();
        for (const auto& m : exp_modes) opt.modes.push_back(asyncsep::parse_filter_mode(m));
      }
      const auto report = asyncsep::run_experiment(scene, train_scene, opt);
      asyncsep::write_report_table(std::cout, report);
      if (!exp_report.empty())
        asyncsep::write_json_file(exp_report, asyncsep::report_to_json(report));
    }
  } catch (const asyncsep::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const asyncsep::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
