#ifndef ASYNCSEP_METRICS_HPP
#define ASYNCSEP_METRICS_HPP

#include <cmath>
#include <limits>

#include "asyncsep/errors.hpp"
#include "asyncsep/signal.hpp"

namespace asyncsep {

// 10 log10(sum |c|^2 / sum |c_hat - c|^2) over all samples and channels.
// Returns +inf when the estimate is exact.
inline double sdr(const SampledSignal& reference, const SampledSignal& estimate) {
  if (reference.channels() != estimate.channels() ||
      reference.length() != estimate.length())
    throw ConfigError("SDR needs reference and estimate of equal shape");
  double signal = 0.0, error = 0.0;
  for (std::size_t c = 0; c < reference.channels(); ++c) {
    const auto r = reference.channel(c);
    const auto e = estimate.channel(c);
    for (std::size_t t = 0; t < r.size(); ++t) {
      signal += r[t] * r[t];
      const double d = e[t] - r[t];
      error += d * d;
    }
  }
  if (signal == 0.0) throw ConfigError("SDR is undefined for an all-zero reference");
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

}  // namespace asyncsep

#endif  // ASYNCSEP_METRICS_HPP
