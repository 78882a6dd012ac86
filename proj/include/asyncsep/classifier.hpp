#ifndef ASYNCSEP_CLASSIFIER_HPP
#define ASYNCSEP_CLASSIFIER_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/linalg.hpp"
#include "asyncsep/model.hpp"
#include "asyncsep/stft.hpp"

namespace asyncsep {

// Per-tile state log-likelihoods and posteriors, indexed [frame, bin, state].
struct PosteriorMap {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t states = 0;
  std::vector<double> gamma;
  std::vector<double> log_likelihoods;

  std::size_t offset(std::size_t n, std::size_t f) const {
    return (n * bins + f) * states;
  }
  std::span<const double> gamma_at(std::size_t n, std::size_t f) const {
    return {gamma.data() + offset(n, f), states};
  }
  std::span<const double> log_likelihood_at(std::size_t n, std::size_t f) const {
    return {log_likelihoods.data() + offset(n, f), states};
  }
};

// Source powers per tile, indexed [frame, bin, source]; the last source
// slot holds the diffuse noise power.
struct PowerEstimate {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t sources = 0;  // directional + 1
  std::vector<double> sigma2;

  std::span<const double> at(std::size_t n, std::size_t f) const {
    return {sigma2.data() + (n * bins + f) * sources, sources};
  }
  std::span<double> at(std::size_t n, std::size_t f) {
    return {sigma2.data() + (n * bins + f) * sources, sources};
  }
};

// Softmax with max subtraction: gamma_s = exp(L_s - logsumexp(L)).
inline void posteriors(std::span<const double> log_likelihoods,
                       std::span<double> gamma) {
  const double peak = *std::max_element(log_likelihoods.begin(), log_likelihoods.end());
  double total = 0.0;
  for (std::size_t s = 0; s < log_likelihoods.size(); ++s) {
    gamma[s] = std::exp(log_likelihoods[s] - peak);
    total += gamma[s];
  }
  for (auto& g : gamma) g /= total;
}

inline std::vector<double> posteriors(std::span<const double> log_likelihoods) {
  std::vector<double> gamma(log_likelihoods.size());
  posteriors(log_likelihoods, gamma);
  return gamma;
}

// Cholesky factors of the state-conditional mixture covariance for every
// (array, bin, state). These do not depend on the frame, so a whole
// spectrogram reuses them.
class StateCovarianceCache {
 public:
  StateCovarianceCache(const SpatialModel& spatial,
                       const StateSpectrumModel& states,
                       std::span<const std::size_t> arrays)
      : arrays_(arrays.begin(), arrays.end()),
        bins_(spatial.bins),
        states_(states.num_states()) {
    if (states.num_sources != spatial.num_sources() || states.bins != spatial.bins)
      throw ConfigError("state model does not match spatial model");
    factors_.resize(arrays_.size() * bins_ * states_);
    log_norm_.resize(factors_.size());
    std::vector<double> powers(states.num_sources + 1);
    Eigen::MatrixXcd s_mat;
    for (std::size_t a = 0; a < arrays_.size(); ++a) {
      const auto& ac = spatial.arrays.at(arrays_[a]);
      const double c_log_pi =
          static_cast<double>(ac.channels) * std::log(std::numbers::pi);
      for (std::size_t f = 0; f < bins_; ++f)
        for (std::size_t s = 0; s < states_; ++s) {
          states.state_powers(s, f, powers);
          regularized_sum(ac, powers, f, s_mat);
          const std::size_t i = index(a, f, s);
          if (!factors_[i].compute(s_mat))
            throw NumericalError("state covariance not positive definite at array '" +
                                 ac.id + "', bin " + std::to_string(f));
          log_norm_[i] = c_log_pi + factors_[i].log_determinant();
        }
    }
  }

  std::size_t num_arrays() const { return arrays_.size(); }
  std::size_t num_states() const { return states_; }
  std::size_t array_index(std::size_t a) const { return arrays_[a]; }

  // -x^H S^{-1} x - log det(pi S) for local array slot a.
  double log_likelihood(std::size_t a, std::size_t f, std::size_t s,
                        const Eigen::Ref<const Eigen::VectorXcd>& x) {
    const std::size_t i = index(a, f, s);
    return -factors_[i].quadratic_form(x) - log_norm_[i];
  }

 private:
  std::size_t index(std::size_t a, std::size_t f, std::size_t s) const {
    return (a * bins_ + f) * states_ + s;
  }

  std::vector<std::size_t> arrays_;
  std::size_t bins_;
  std::size_t states_;
  std::vector<HermitianCholesky> factors_;
  std::vector<double> log_norm_;
};

namespace detail {

inline void check_aligned(std::span<const SpectrogramTensor> obs,
                          const SpatialModel& spatial,
                          std::span<const std::size_t> arrays) {
  if (arrays.empty()) throw ConfigError("no arrays selected");
  if (obs.size() != spatial.num_arrays())
    throw ConfigError("observation count does not match the model's arrays");
  for (std::size_t m : arrays) {
    if (m >= obs.size()) throw ConfigError("array index out of range");
    if (obs[m].frames() != obs[arrays[0]].frames() || obs[m].bins() != spatial.bins)
      throw ConfigError("observations are not frame/bin aligned across arrays");
    if (obs[m].channels() != spatial.arrays[m].channels)
      throw ConfigError("channel count of array '" + spatial.arrays[m].id +
                        "' does not match the model");
  }
}

inline void check_finite(const Eigen::Ref<const Eigen::VectorXcd>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x(i).real()) || !std::isfinite(x(i).imag()))
      throw NumericalError("non-finite observation");
}

inline std::vector<std::size_t> all_arrays(const SpatialModel& spatial) {
  std::vector<std::size_t> out(spatial.num_arrays());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace detail

// log p_s[n, f] summed over the selected arrays (all arrays by default).
inline double state_log_likelihood(std::span<const SpectrogramTensor> observations,
                                   const SpatialModel& spatial,
                                   const StateSpectrumModel& states, std::size_t n,
                                   std::size_t f, std::size_t s,
                                   std::span<const std::size_t> arrays = {}) {
  const auto selected =
      arrays.empty() ? detail::all_arrays(spatial)
                     : std::vector<std::size_t>(arrays.begin(), arrays.end());
  detail::check_aligned(observations, spatial, selected);
  std::vector<double> powers(states.num_sources + 1);
  states.state_powers(s, f, powers);
  Eigen::MatrixXcd s_mat;
  HermitianCholesky chol;
  double total = 0.0;
  for (std::size_t m : selected) {
    const auto& ac = spatial.arrays[m];
    const auto x = observations[m].tile(n, f);
    detail::check_finite(x);
    regularized_sum(ac, powers, f, s_mat);
    if (!chol.compute(s_mat)) throw NumericalError("state covariance not positive definite");
    total -= chol.quadratic_form(x) +
             static_cast<double>(ac.channels) * std::log(std::numbers::pi) +
             chol.log_determinant();
  }
  return total;
}

// Joint state classification over the selected arrays (all by default).
inline PosteriorMap classify(std::span<const SpectrogramTensor> observations,
                             const SpatialModel& spatial,
                             const StateSpectrumModel& states,
                             std::span<const std::size_t> arrays = {}) {
  const auto selected =
      arrays.empty() ? detail::all_arrays(spatial)
                     : std::vector<std::size_t>(arrays.begin(), arrays.end());
  detail::check_aligned(observations, spatial, selected);
  StateCovarianceCache cache(spatial, states, selected);

  PosteriorMap out;
  out.frames = observations[selected[0]].frames();
  out.bins = spatial.bins;
  out.states = states.num_states();
  out.gamma.resize(out.frames * out.bins * out.states);
  out.log_likelihoods.resize(out.gamma.size());
  for (std::size_t n = 0; n < out.frames; ++n)
    for (std::size_t f = 0; f < out.bins; ++f) {
      const std::size_t off = out.offset(n, f);
      std::span<double> ll(out.log_likelihoods.data() + off, out.states);
      std::fill(ll.begin(), ll.end(), 0.0);
      for (std::size_t a = 0; a < selected.size(); ++a) {
        const auto x = observations[selected[a]].tile(n, f);
        detail::check_finite(x);
        for (std::size_t s = 0; s < out.states; ++s)
          ll[s] += cache.log_likelihood(a, f, s, x);
      }
      posteriors(ll, std::span<double>(out.gamma.data() + off, out.states));
    }
  return out;
}

// sigma2_k[n, f] = Sigma_s gamma_s[n, f] sigma2_{k|s}[f]; the noise slot is
// the fixed noise spectrum.
inline PowerEstimate source_power_estimates(const PosteriorMap& gamma,
                                            const StateSpectrumModel& states) {
  if (gamma.states != states.num_states() || gamma.bins != states.bins)
    throw ConfigError("posterior map does not match the state model");
  PowerEstimate out;
  out.frames = gamma.frames;
  out.bins = gamma.bins;
  out.sources = states.num_sources + 1;
  out.sigma2.resize(out.frames * out.bins * out.sources);
  for (std::size_t n = 0; n < out.frames; ++n)
    for (std::size_t f = 0; f < out.bins; ++f) {
      const auto g = gamma.gamma_at(n, f);
      auto p = out.at(n, f);
      for (std::size_t k = 0; k < states.num_sources; ++k) {
        double acc = 0.0;
        for (std::size_t s = 0; s < gamma.states; ++s) acc += g[s] * states.variance(k, s, f);
        p[k] = acc;
      }
      p[states.num_sources] = states.noise_spectrum[f];
    }
  return out;
}

// Time-invariant powers lambda_k[f] (the static filter baseline).
inline PowerEstimate static_power_estimates(const StateSpectrumModel& states,
                                            std::size_t frames) {
  PowerEstimate out;
  out.frames = frames;
  out.bins = states.bins;
  out.sources = states.num_sources + 1;
  out.sigma2.resize(out.frames * out.bins * out.sources);
  for (std::size_t n = 0; n < frames; ++n)
    for (std::size_t f = 0; f < out.bins; ++f) {
      auto p = out.at(n, f);
      for (std::size_t k = 0; k < states.num_sources; ++k) p[k] = states.average[k][f];
      p[states.num_sources] = states.noise_spectrum[f];
    }
  return out;
}

// Binary posterior dump, little-endian: char[8] "ASEPGAMA", u32 version (1),
// u32 frames, u32 bins, u32 states, then frames*bins*states f32 values in
// [frame][bin][state] order.
inline void write_posteriors(std::ostream& os, const PosteriorMap& map) {
  static_assert(std::endian::native == std::endian::little);
  const char magic[8] = {'A', 'S', 'E', 'P', 'G', 'A', 'M', 'A'};
  os.write(magic, 8);
  const std::uint32_t header[4] = {1u, static_cast<std::uint32_t>(map.frames),
                                   static_cast<std::uint32_t>(map.bins),
                                   static_cast<std::uint32_t>(map.states)};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  std::vector<float> packed(map.gamma.begin(), map.gamma.end());
  os.write(reinterpret_cast<const char*>(packed.data()),
           static_cast<std::streamsize>(packed.size() * sizeof(float)));
}

// Share of tiles won by each state and the distribution of winning
// posterior mass, as fixed-width text bars.
inline void write_posterior_histogram(std::ostream& os, const PosteriorMap& map,
                                      std::span<const std::string> state_names) {
  constexpr int kBuckets = 10;
  constexpr int kWidth = 50;
  std::vector<std::size_t> wins(map.states, 0);
  std::vector<std::size_t> confidence(kBuckets, 0);
  const std::size_t tiles = map.frames * map.bins;
  for (std::size_t n = 0; n < map.frames; ++n)
    for (std::size_t f = 0; f < map.bins; ++f) {
      const auto g = map.gamma_at(n, f);
      const auto best = std::max_element(g.begin(), g.end());
      ++wins[static_cast<std::size_t>(best - g.begin())];
      const int b = std::min(kBuckets - 1, static_cast<int>(*best * kBuckets));
      ++confidence[static_cast<std::size_t>(b)];
    }
  auto bar = [&](std::size_t count) {
    const double share = tiles ? static_cast<double>(count) / static_cast<double>(tiles) : 0.0;
    os << std::string(static_cast<std::size_t>(std::lround(share * kWidth)), '#')
       << " " << std::fixed << std::setprecision(1) << 100.0 * share << "%\n";
  };
  os << "dominant state (" << tiles << " tiles)\n";
  for (std::size_t s = 0; s < map.states; ++s) {
    const std::string name = s < state_names.size() ? state_names[s] : "state" + std::to_string(s);
    os << "  " << std::left << std::setw(12) << name << " ";
    bar(wins[s]);
  }
  os << "max posterior\n";
  for (int b = 0; b < kBuckets; ++b) {
    os << "  [" << std::fixed << std::setprecision(1) << b / 10.0 << ", "
       << (b + 1) / 10.0 << (b + 1 == kBuckets ? "] " : ") ") << " ";
    bar(confidence[static_cast<std::size_t>(b)]);
  }
}

}  // namespace asyncsep

#endif  // ASYNCSEP_CLASSIFIER_HPP
