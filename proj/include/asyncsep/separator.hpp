#ifndef ASYNCSEP_SEPARATOR_HPP
#define ASYNCSEP_SEPARATOR_HPP

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncsep/classifier.hpp"
#include "asyncsep/errors.hpp"
#include "asyncsep/linalg.hpp"
#include "asyncsep/model.hpp"
#include "asyncsep/stft.hpp"

namespace asyncsep {

// static-local:   time-invariant powers, each array on its own.
// static-pooled:  time-invariant powers, all channels treated as one array.
// tv-local:       posteriors and filter from each array alone.
// tv-distributed: posteriors from all arrays, filter per array.
enum class FilterMode { kStaticLocal, kStaticPooled, kTvLocal, kTvDistributed };

inline std::string to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::kStaticLocal: return "static-local";
    case FilterMode::kStaticPooled: return "static-pooled";
    case FilterMode::kTvLocal: return "tv-local";
    case FilterMode::kTvDistributed: return "tv-distributed";
  }
  return "?";
}

inline FilterMode parse_filter_mode(const std::string& name) {
  for (auto m : {FilterMode::kStaticLocal, FilterMode::kStaticPooled,
                 FilterMode::kTvLocal, FilterMode::kTvDistributed})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown filter mode '" + name +
                    "' (expected static-local, static-pooled, tv-local or "
                    "tv-distributed)");
}

inline constexpr FilterMode kAllModes[] = {
    FilterMode::kStaticLocal, FilterMode::kStaticPooled, FilterMode::kTvLocal,
    FilterMode::kTvDistributed};

// Scratch space for one tile of Wiener filtering.
struct WienerWorkspace {
  Eigen::MatrixXcd mixture;
  Eigen::MatrixXcd noise;
  Eigen::VectorXcd whitened;
  HermitianCholesky chol;
};

// c_k = p_k R_k S^{-1} x for every directional source, and the noise image
// (loaded white-noise term) S^{-1} x, sharing one factorization of S.
// `images` receives K + 1 vectors.
inline void mwf_apply(const Eigen::Ref<const Eigen::VectorXcd>& x,
                      const ArrayCovariances& array,
                      std::span<const double> powers, std::size_t f,
                      std::vector<Eigen::VectorXcd>& images,
                      WienerWorkspace& ws) {
  const std::size_t k_dir = array.covariances.size();
  regularized_sum(array, powers, f, ws.mixture, &ws.noise);
  if (!ws.chol.compute(ws.mixture))
    throw NumericalError("mixture covariance not positive definite at bin " +
                         std::to_string(f));
  ws.whitened = x;
  ws.chol.solve_in_place(ws.whitened);
  images.resize(k_dir + 1);
  for (std::size_t k = 0; k < k_dir; ++k)
    images[k].noalias() = powers[k] * (array.at(k, f) * ws.whitened);
  images[k_dir].noalias() = ws.noise * ws.whitened;
}

inline std::vector<Eigen::VectorXcd> mwf_apply(
    const Eigen::Ref<const Eigen::VectorXcd>& x, const ArrayCovariances& array,
    std::span<const double> powers, std::size_t f) {
  WienerWorkspace ws;
  std::vector<Eigen::VectorXcd> images;
  mwf_apply(x, array, powers, f, images, ws);
  return images;
}

// Filters every tile of one array's STFT. Output holds K + 1 tensors, the
// last being the noise image.
inline std::vector<SpectrogramTensor> apply_filters(const SpectrogramTensor& x,
                                                    const ArrayCovariances& array,
                                                    const PowerEstimate& powers) {
  if (x.channels() != array.channels || x.bins() != array.noise_floor.size() ||
      powers.frames != x.frames() || powers.bins != x.bins() ||
      powers.sources != array.covariances.size() + 1)
    throw ConfigError("filter inputs have inconsistent shapes for array '" +
                      array.id + "'");
  std::vector<SpectrogramTensor> out(
      powers.sources, SpectrogramTensor(x.frames(), x.channels(), x.window(),
                                        x.rate_hz(), x.signal_length()));
  WienerWorkspace ws;
  std::vector<Eigen::VectorXcd> images;
  for (std::size_t n = 0; n < x.frames(); ++n)
    for (std::size_t f = 0; f < x.bins(); ++f) {
      const auto tile = x.tile(n, f);
      detail::check_finite(tile);
      mwf_apply(tile, array, powers.at(n, f), f, images, ws);
      for (std::size_t k = 0; k < out.size(); ++k) out[k].tile(n, f) = images[k];
    }
  return out;
}

struct SeparationResult {
  FilterMode mode = FilterMode::kTvDistributed;
  std::vector<std::string> arrays;
  std::vector<std::string> sources;  // directional only; noise is images[m].back()
  std::vector<std::vector<SpectrogramTensor>> images;  // [array][source + noise]
  std::optional<PosteriorMap> posteriors;  // tv-distributed only
};

inline SpectrogramTensor stack_channels(std::span<const SpectrogramTensor> parts) {
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.frames() != parts[0].frames() || p.bins() != parts[0].bins())
      throw ConfigError("cannot stack unaligned spectrograms");
    channels += p.channels();
  }
  SpectrogramTensor out(parts[0].frames(), channels, parts[0].window(),
                        parts[0].rate_hz(), parts[0].signal_length());
  for (std::size_t n = 0; n < out.frames(); ++n)
    for (std::size_t f = 0; f < out.bins(); ++f) {
      Eigen::Index off = 0;
      for (const auto& p : parts) {
        const auto t = p.tile(n, f);
        out.tile(n, f).segment(off, t.size()) = t;
        off += t.size();
      }
    }
  return out;
}

inline SpectrogramTensor channel_slice(const SpectrogramTensor& x,
                                       std::size_t first, std::size_t count) {
  SpectrogramTensor out(x.frames(), count, x.window(), x.rate_hz(), x.signal_length());
  for (std::size_t n = 0; n < x.frames(); ++n)
    for (std::size_t f = 0; f < x.bins(); ++f)
      out.tile(n, f) = x.tile(n, f).segment(static_cast<Eigen::Index>(first),
                                            static_cast<Eigen::Index>(count));
  return out;
}

// Source-image estimates for every (array, source) under the given mode.
inline SeparationResult separate(std::span<const SpectrogramTensor> observations,
                                 const SpatialModel& spatial,
                                 const StateSpectrumModel& states, FilterMode mode) {
  const auto all = detail::all_arrays(spatial);
  detail::check_aligned(observations, spatial, all);
  if (states.num_sources != spatial.num_sources() || states.bins != spatial.bins)
    throw ConfigError("state model does not match spatial model");

  SeparationResult result;
  result.mode = mode;
  result.sources = spatial.sources;
  for (const auto& a : spatial.arrays) result.arrays.push_back(a.id);
  result.images.resize(spatial.num_arrays());
  const std::size_t frames = observations[0].frames();

  switch (mode) {
    case FilterMode::kStaticLocal: {
      const auto powers = static_power_estimates(states, frames);
      for (std::size_t m : all)
        result.images[m] = apply_filters(observations[m], spatial.arrays[m], powers);
      break;
    }
    case FilterMode::kStaticPooled: {
      if (!spatial.pooled) throw ConfigError("model has no pooled covariances");
      const auto powers = static_power_estimates(states, frames);
      const auto merged = stack_channels(observations);
      const auto images = apply_filters(merged, *spatial.pooled, powers);
      std::size_t first = 0;
      for (std::size_t m : all) {
        const std::size_t c = observations[m].channels();
        for (const auto& img : images)
          result.images[m].push_back(channel_slice(img, first, c));
        first += c;
      }
      break;
    }
    case FilterMode::kTvLocal: {
      for (std::size_t m : all) {
        const std::size_t only[] = {m};
        const auto gamma = classify(observations, spatial, states, only);
        const auto powers = source_power_estimates(gamma, states);
        result.images[m] = apply_filters(observations[m], spatial.arrays[m], powers);
      }
      break;
    }
    case FilterMode::kTvDistributed: {
      auto gamma = classify(observations, spatial, states, all);
      const auto powers = source_power_estimates(gamma, states);
      for (std::size_t m : all)
        result.images[m] = apply_filters(observations[m], spatial.arrays[m], powers);
      result.posteriors = std::move(gamma);
      break;
    }
  }
  return result;
}

// Largest per-tile |sum_k c_k - x| / |x| over all arrays of a result.
inline double mixture_residual(const SeparationResult& result,
                               std::span<const SpectrogramTensor> observations) {
  double worst = 0.0;
  for (std::size_t m = 0; m < result.images.size(); ++m) {
    const auto& x = observations[m];
    Eigen::VectorXcd sum(static_cast<Eigen::Index>(x.channels()));
    for (std::size_t n = 0; n < x.frames(); ++n)
      for (std::size_t f = 0; f < x.bins(); ++f) {
        sum.setZero();
        for (const auto& img : result.images[m]) sum += img.tile(n, f);
        const double err = (sum - x.tile(n, f)).norm();
        const double ref = x.tile(n, f).norm();
        if (err == 0.0) continue;
        worst = std::max(worst, ref > 0.0 ? err / ref : INFINITY);
      }
  }
  return worst;
}

}  // namespace asyncsep

#endif  // ASYNCSEP_SEPARATOR_HPP
