#ifndef ASYNCSEP_RESAMPLE_HPP
#define ASYNCSEP_RESAMPLE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "asyncsep/errors.hpp"
#include "asyncsep/signal.hpp"

namespace asyncsep {

inline constexpr int kDefaultLagrangeOrder = 4;

// Evaluates the order-`order` Lagrange polynomial through the samples
// nearest to fractional index `position`. Samples outside the sequence are
// zero. Odd orders use the symmetric stencil around floor(position), even
// orders the one centred on the nearest integer.
inline double lagrange_interpolate(std::span<const double> x, double position,
                                   int order) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const double base = order % 2 == 1 ? std::floor(position) - (order - 1) / 2
                                     : std::round(position) - order / 2;
  const auto first = static_cast<std::ptrdiff_t>(base);
  if (first + order < 0 || first >= n) return 0.0;

  // Exactly on a node: avoid 0/0 in the weights.
  const double delta = position - base;
  if (delta == std::floor(delta) && delta >= 0 && delta <= order) {
    const auto t = first + static_cast<std::ptrdiff_t>(delta);
    return (t >= 0 && t < n) ? x[static_cast<std::size_t>(t)] : 0.0;
  }

  double acc = 0.0;
  for (int j = 0; j <= order; ++j) {
    const std::ptrdiff_t t = first + j;
    if (t < 0 || t >= n) continue;
    double weight = 1.0;
    for (int i = 0; i <= order; ++i) {
      if (i != j) weight *= (delta - i) / static_cast<double>(j - i);
    }
    acc += weight * x[static_cast<std::size_t>(t)];
  }
  return acc;
}

// Resamples every channel as if captured by a clock running at
// rate_hz + rate_offset_hz: output sample t reads the input at
// t * rate_hz / (rate_hz + rate_offset_hz). Length is preserved; positions
// past the end read zeros.
inline SampledSignal lagrange_resample(const SampledSignal& signal,
                                       double rate_offset_hz,
                                       int order = kDefaultLagrangeOrder) {
  if (order < 1) throw ConfigError("Lagrange order must be at least 1");
  if (!std::isfinite(rate_offset_hz) ||
      std::abs(rate_offset_hz) >= signal.rate_hz())
    throw ConfigError("rate offset " + std::to_string(rate_offset_hz) +
                      " Hz must be smaller in magnitude than the sample rate");
  if (rate_offset_hz == 0.0) return signal;

  const double ratio = signal.rate_hz() / (signal.rate_hz() + rate_offset_hz);
  SampledSignal out(signal.channels(), signal.length(), signal.rate_hz());
  for (std::size_t c = 0; c < signal.channels(); ++c) {
    const auto x = signal.channel(c);
    auto y = out.channel(c);
    for (std::size_t t = 0; t < y.size(); ++t)
      y[t] = lagrange_interpolate(x, static_cast<double>(t) * ratio, order);
  }
  return out;
}

// y[t] += gain * x(t - delay) for a non-negative fractional delay.
inline void add_delayed(std::span<const double> x, double delay, double gain,
                        std::span<double> y,
                        int order = kDefaultLagrangeOrder) {
  if (!(delay >= 0.0)) throw ConfigError("delays must be non-negative");
  const double whole = std::floor(delay);
  const double frac = delay - whole;
  const auto shift = static_cast<std::size_t>(whole);
  for (std::size_t t = shift; t < y.size(); ++t) {
    const double pos = static_cast<double>(t - shift) - frac;
    y[t] += gain * (frac == 0.0 ? (t - shift < x.size() ? x[t - shift] : 0.0)
                                : lagrange_interpolate(x, pos, order));
  }
}

}  // namespace asyncsep

#endif  // ASYNCSEP_RESAMPLE_HPP
