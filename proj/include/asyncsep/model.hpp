#ifndef ASYNCSEP_MODEL_HPP
#define ASYNCSEP_MODEL_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/stft.hpp"

namespace asyncsep {

inline constexpr double kSilenceGate = 1e-6;        // -60 dB
inline constexpr double kDiagonalLoading = 1e-9;    // relative to trace
inline constexpr double kHighGain = 10.0;           // +10 dB
inline constexpr double kLowGain = 0.1;             // -10 dB
inline constexpr double kSpectrumFloor = 1e-12;     // relative to the peak

// Training STFTs of ground-truth source images. clips[m][k] may hold
// several clips (e.g. perturbed-geometry variants) whose frames are pooled.
struct TrainingImages {
  std::vector<std::string> arrays;
  std::vector<std::string> sources;
  std::vector<std::vector<std::vector<SpectrogramTensor>>> clips;

  TrainingImages() = default;
  TrainingImages(std::vector<std::string> array_ids,
                 std::vector<std::string> source_ids)
      : arrays(std::move(array_ids)),
        sources(std::move(source_ids)),
        clips(arrays.size(),
              std::vector<std::vector<SpectrogramTensor>>(sources.size())) {}

  void add(std::size_t m, std::size_t k, SpectrogramTensor spec) {
    clips.at(m).at(k).push_back(std::move(spec));
  }
};

// Unit-trace spatial covariances of every source at one array, per bin,
// plus a per-bin multiplier on the spatially white noise power.
struct ArrayCovariances {
  std::string id;
  std::size_t channels = 0;
  std::vector<std::vector<Eigen::MatrixXcd>> covariances;  // [source][bin]
  std::vector<double> noise_floor;                          // [bin]

  const Eigen::MatrixXcd& at(std::size_t k, std::size_t f) const {
    return covariances[k][f];
  }
};

struct SpatialModel {
  std::vector<std::string> sources;
  std::size_t bins = 0;
  std::vector<ArrayCovariances> arrays;
  // All arrays' channels stacked as if they shared one clock.
  std::optional<ArrayCovariances> pooled;

  std::size_t num_arrays() const { return arrays.size(); }
  std::size_t num_sources() const { return sources.size(); }
};

// (array, source, bin) triples whose training frames were all silent.
struct CovarianceReport {
  struct Fallback {
    std::string array;
    std::string source;
    std::size_t bin;
  };
  std::vector<Fallback> fallbacks;
};

namespace detail {

// Gated, trace-normalized sum of outer products over the given tiles.
// Returns false (and writes identity / C) when every tile is gated out.
template <typename TileFn>
bool accumulate_covariance(std::size_t count, std::size_t channels,
                           TileFn&& tile_at, Eigen::MatrixXcd& out) {
  const auto c = static_cast<Eigen::Index>(channels);
  double mean_energy = 0.0;
  for (std::size_t i = 0; i < count; ++i) mean_energy += tile_at(i).squaredNorm();
  if (count > 0) mean_energy /= static_cast<double>(count);

  out = Eigen::MatrixXcd::Zero(c, c);
  double trace = 0.0;
  if (mean_energy > 0.0) {
    const double gate = kSilenceGate * mean_energy;
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::VectorXcd x = tile_at(i);
      const double e = x.squaredNorm();
      if (!(e >= gate) || e == 0.0) continue;
      for (Eigen::Index col = 0; col < c; ++col)
        for (Eigen::Index row = col; row < c; ++row)
          out(row, col) += x(row) * std::conj(x(col));
      trace += e;
    }
  }
  if (!(trace > 0.0)) {
    out = Eigen::MatrixXcd::Identity(c, c) / static_cast<double>(channels);
    return false;
  }
  for (Eigen::Index col = 0; col < c; ++col) {
    out(col, col) = out(col, col).real() / trace;
    for (Eigen::Index row = col + 1; row < c; ++row) {
      out(row, col) /= trace;
      out(col, row) = std::conj(out(row, col));
    }
  }
  return true;
}

}  // namespace detail

// Trace-normalized, silence-gated spatial covariance of every (array,
// source, bin). With `include_pooled`, also estimates the covariance of the
// channel-stacked array, which requires all arrays to have clip-wise
// aligned frames.
inline SpatialModel estimate_spatial_covariance(
    const TrainingImages& training, bool include_pooled = true,
    CovarianceReport* report = nullptr) {
  if (training.arrays.empty() || training.sources.empty())
    throw ConfigError("training set has no arrays or no sources");
  SpatialModel model;
  model.sources = training.sources;

  std::size_t bins = 0;
  for (std::size_t m = 0; m < training.arrays.size(); ++m) {
    for (std::size_t k = 0; k < training.sources.size(); ++k) {
      const auto& clips = training.clips.at(m).at(k);
      if (clips.empty())
        throw ConfigError("no training clip for array '" + training.arrays[m] +
                          "', source '" + training.sources[k] + "'");
      for (const auto& clip : clips) {
        if (clip.frames() == 0) throw ConfigError("training clip has no frames");
        if (bins == 0) bins = clip.bins();
        if (clip.bins() != bins || clip.channels() != clips[0].channels() ||
            clip.channels() != training.clips[m][0][0].channels())
          throw ConfigError("inconsistent training clip shapes at array '" +
                            training.arrays[m] + "'");
      }
    }
  }
  model.bins = bins;

  auto note = [&](const std::string& array, std::size_t k, std::size_t f) {
    if (report) report->fallbacks.push_back({array, training.sources[k], f});
  };

  for (std::size_t m = 0; m < training.arrays.size(); ++m) {
    ArrayCovariances ac;
    ac.id = training.arrays[m];
    ac.channels = training.clips[m][0][0].channels();
    ac.noise_floor.assign(bins, 1.0);
    ac.covariances.resize(training.sources.size());
    for (std::size_t k = 0; k < training.sources.size(); ++k) {
      const auto& clips = training.clips[m][k];
      std::vector<std::pair<std::size_t, std::size_t>> index;  // (clip, frame)
      for (std::size_t j = 0; j < clips.size(); ++j)
        for (std::size_t n = 0; n < clips[j].frames(); ++n) index.emplace_back(j, n);
      ac.covariances[k].resize(bins);
      for (std::size_t f = 0; f < bins; ++f) {
        const bool ok = detail::accumulate_covariance(
            index.size(), ac.channels,
            [&](std::size_t i) -> Eigen::VectorXcd {
              return clips[index[i].first].tile(index[i].second, f);
            },
            ac.covariances[k][f]);
        if (!ok) note(ac.id, k, f);
      }
    }
    model.arrays.push_back(std::move(ac));
  }

  if (include_pooled) {
    const auto& first = training.clips[0][0];
    bool aligned = true;
    for (std::size_t m = 0; m < training.arrays.size() && aligned; ++m)
      for (std::size_t k = 0; k < training.sources.size() && aligned; ++k) {
        const auto& clips = training.clips[m][k];
        if (clips.size() != first.size()) aligned = false;
        for (std::size_t j = 0; aligned && j < clips.size(); ++j)
          if (clips[j].frames() != first[j].frames()) aligned = false;
      }
    if (!aligned)
      throw ConfigError("pooled covariance needs frame-aligned clips on every array");

    ArrayCovariances ac;
    ac.id = "pooled";
    for (const auto& a : model.arrays) ac.channels += a.channels;
    ac.noise_floor.assign(bins, 1.0);
    ac.covariances.resize(training.sources.size());
    for (std::size_t k = 0; k < training.sources.size(); ++k) {
      std::vector<std::pair<std::size_t, std::size_t>> index;
      for (std::size_t j = 0; j < first.size(); ++j)
        for (std::size_t n = 0; n < first[j].frames(); ++n) index.emplace_back(j, n);
      ac.covariances[k].resize(bins);
      Eigen::VectorXcd stacked(static_cast<Eigen::Index>(ac.channels));
      for (std::size_t f = 0; f < bins; ++f) {
        const bool ok = detail::accumulate_covariance(
            index.size(), ac.channels,
            [&](std::size_t i) -> Eigen::VectorXcd {
              Eigen::Index off = 0;
              for (std::size_t m = 0; m < training.arrays.size(); ++m) {
                const auto t = training.clips[m][k][index[i].first].tile(index[i].second, f);
                stacked.segment(off, t.size()) = t;
                off += t.size();
              }
              return stacked;
            },
            ac.covariances[k][f]);
        if (!ok) note(ac.id, k, f);
      }
    }
    model.pooled = std::move(ac);
  }
  return model;
}

// Two-level state-conditional variances. States 0..K-1 mark directional
// source k as dominant; state K is the diffuse-noise-only state.
struct StateSpectrumModel {
  std::size_t num_sources = 0;
  std::size_t bins = 0;
  std::vector<std::vector<double>> average;  // lambda_k[f]
  std::vector<std::vector<double>> high;     // [source][bin]
  std::vector<std::vector<double>> low;      // [source][bin]
  std::vector<double> noise_spectrum;        // [bin]
  double noise_factor = 1.0;

  std::size_t num_states() const { return num_sources + 1; }
  std::size_t noise_state() const { return num_sources; }

  double variance(std::size_t k, std::size_t s, std::size_t f) const {
    return k == s ? high[k][f] : low[k][f];
  }

  // Directional powers for state s followed by the noise power.
  void state_powers(std::size_t s, std::size_t f, std::span<double> out) const {
    for (std::size_t k = 0; k < num_sources; ++k) out[k] = variance(k, s, f);
    out[num_sources] = noise_spectrum[f];
  }

  void set_noise_factor(double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor))
      throw ConfigError("noise factor must be positive");
    for (std::size_t f = 0; f < bins; ++f) {
      double mean = 0.0;
      for (std::size_t k = 0; k < num_sources; ++k) mean += average[k][f];
      noise_spectrum[f] = factor * mean / static_cast<double>(num_sources);
    }
    noise_factor = factor;
  }

  // Rebuilds high/low/noise from `average`, clamping empty bins.
  void derive_levels(double factor) {
    double global_peak = 0.0;
    for (const auto& a : average)
      for (double v : a) global_peak = std::max(global_peak, v);
    high.assign(num_sources, std::vector<double>(bins));
    low.assign(num_sources, std::vector<double>(bins));
    noise_spectrum.assign(bins, 0.0);
    for (std::size_t k = 0; k < num_sources; ++k) {
      double peak = *std::max_element(average[k].begin(), average[k].end());
      if (!(peak > 0.0)) peak = global_peak > 0.0 ? global_peak : 1.0;
      const double floor = kSpectrumFloor * peak;
      for (std::size_t f = 0; f < bins; ++f) {
        average[k][f] = std::max(average[k][f], floor);
        high[k][f] = kHighGain * average[k][f];
        low[k][f] = kLowGain * average[k][f];
      }
    }
    set_noise_factor(factor);
  }
};

// lambda_k[f] is the mean |c|^2 over all frames and channels of every
// array's (and clip's) image of source k.
inline StateSpectrumModel build_state_model(const TrainingImages& training,
                                            const SpatialModel& spatial,
                                            double noise_factor = 1.0) {
  if (spatial.num_sources() != training.sources.size())
    throw ConfigError("spatial model and training set disagree on sources");
  StateSpectrumModel model;
  model.num_sources = training.sources.size();
  model.bins = spatial.bins;
  model.average.assign(model.num_sources, std::vector<double>(model.bins, 0.0));
  for (std::size_t k = 0; k < model.num_sources; ++k) {
    double count = 0.0;
    for (std::size_t m = 0; m < training.arrays.size(); ++m) {
      for (const auto& clip : training.clips.at(m).at(k)) {
        if (clip.bins() != model.bins) throw ConfigError("bin count mismatch");
        for (std::size_t n = 0; n < clip.frames(); ++n)
          for (std::size_t f = 0; f < model.bins; ++f)
            model.average[k][f] += clip.tile(n, f).squaredNorm();
        count += static_cast<double>(clip.frames() * clip.channels());
      }
    }
    if (count == 0.0)
      throw ConfigError("no training frames for source '" + training.sources[k] + "'");
    for (auto& v : model.average[k]) v /= count;
  }
  model.derive_levels(noise_factor);
  return model;
}

// Sigma_k powers[k] R_k + powers[K] * floor * I / C, plus trace-relative
// diagonal loading. `powers` has one entry per directional source followed
// by the noise power. Writes the loaded noise term to `noise_term` if given.
inline void regularized_sum(const ArrayCovariances& array,
                            std::span<const double> powers, std::size_t f,
                            Eigen::MatrixXcd& out,
                            Eigen::MatrixXcd* noise_term = nullptr) {
  const std::size_t k_dir = array.covariances.size();
  const auto c = static_cast<Eigen::Index>(array.channels);
  out.setZero(c, c);
  for (std::size_t k = 0; k < k_dir; ++k) out.noalias() += powers[k] * array.at(k, f);
  double trace = 0.0;
  for (Eigen::Index i = 0; i < c; ++i) trace += out(i, i).real();
  const double white = powers[k_dir] * array.noise_floor[f] / static_cast<double>(c);
  trace += white * static_cast<double>(c);
  double diag = white + kDiagonalLoading * trace;
  if (!(diag > 0.0)) diag = std::numeric_limits<double>::min();
  for (Eigen::Index i = 0; i < c; ++i) out(i, i) += diag;
  if (noise_term) {
    noise_term->setZero(c, c);
    noise_term->diagonal().setConstant(diag);
  }
}

inline Eigen::MatrixXcd regularized_sum(const SpatialModel& spatial,
                                        std::span<const double> powers,
                                        std::size_t m, std::size_t f) {
  Eigen::MatrixXcd out;
  regularized_sum(spatial.arrays.at(m), powers, f, out);
  return out;
}

}  // namespace asyncsep

#endif  // ASYNCSEP_MODEL_HPP
