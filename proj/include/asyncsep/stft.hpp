#ifndef ASYNCSEP_STFT_HPP
#define ASYNCSEP_STFT_HPP

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"
#include "asyncsep/signal.hpp"

namespace asyncsep {

using Complex = std::complex<double>;

enum class WindowShape { kHann, kSqrtHann };

inline std::string to_string(WindowShape shape) {
  return shape == WindowShape::kHann ? "hann" : "sqrt-hann";
}

// Frame length, hop and analysis window. The same window is used for
// synthesis, so validity means the summed squared window is constant.
struct WindowSpec {
  std::size_t length = 4096;
  std::size_t hop = 1024;
  WindowShape shape = WindowShape::kHann;

  static WindowSpec from_overlap(std::size_t length, double overlap,
                                 WindowShape shape = WindowShape::kHann) {
    if (!(overlap >= 0.0 && overlap < 1.0))
      throw ConfigError("overlap must lie in [0, 1)");
    const double hop = std::round(static_cast<double>(length) * (1.0 - overlap));
    return {length, static_cast<std::size_t>(std::max(1.0, hop)), shape};
  }

  std::size_t bins() const { return length / 2 + 1; }

  // Periodic window of the configured shape.
  std::vector<double> coefficients() const {
    std::vector<double> w(length);
    for (std::size_t i = 0; i < length; ++i) {
      const double hann =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                               static_cast<double>(length));
      w[i] = shape == WindowShape::kHann ? hann : std::sqrt(hann);
    }
    return w;
  }

  // Throws unless the hop divides the length and the squared window
  // overlap-adds to a constant.
  void validate() const {
    if (length < 2 || length % 2 != 0)
      throw ConfigError("window length must be even and at least 2");
    if (hop == 0 || length % hop != 0)
      throw ConfigError("hop " + std::to_string(hop) +
                        " must divide window length " + std::to_string(length));
    const auto w = coefficients();
    double lo = INFINITY, hi = 0.0;
    for (std::size_t n = 0; n < hop; ++n) {
      double acc = 0.0;
      for (std::size_t t = n; t < length; t += hop) acc += w[t] * w[t];
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
    }
    if (!(lo > 0.0) || hi / lo - 1.0 > 1e-9)
      throw ConfigError(to_string(shape) + " window of length " +
                        std::to_string(length) + " is not overlap-add "
                        "constant at hop " + std::to_string(hop));
  }

  bool operator==(const WindowSpec&) const = default;
};

// Complex one-sided STFT coefficients indexed [frame, bin, channel]. The
// channel index is innermost so tile(n, f) is a contiguous vector.
class SpectrogramTensor {
 public:
  SpectrogramTensor() = default;

  SpectrogramTensor(std::size_t frames, std::size_t channels, WindowSpec window,
                    double rate_hz, std::size_t signal_length)
      : frames_(frames),
        bins_(window.bins()),
        channels_(channels),
        window_(window),
        rate_hz_(rate_hz),
        signal_length_(signal_length),
        coeffs_(frames * window.bins() * channels, Complex(0.0, 0.0)) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }
  const WindowSpec& window() const { return window_; }
  double rate_hz() const { return rate_hz_; }
  // Length of the analysed signal before edge padding.
  std::size_t signal_length() const { return signal_length_; }

  Complex& operator()(std::size_t n, std::size_t f, std::size_t c) {
    return coeffs_[(n * bins_ + f) * channels_ + c];
  }
  Complex operator()(std::size_t n, std::size_t f, std::size_t c) const {
    return coeffs_[(n * bins_ + f) * channels_ + c];
  }

  Eigen::Map<Eigen::VectorXcd> tile(std::size_t n, std::size_t f) {
    return {coeffs_.data() + (n * bins_ + f) * channels_,
            static_cast<Eigen::Index>(channels_)};
  }
  Eigen::Map<const Eigen::VectorXcd> tile(std::size_t n, std::size_t f) const {
    return {coeffs_.data() + (n * bins_ + f) * channels_,
            static_cast<Eigen::Index>(channels_)};
  }

  std::vector<Complex>& data() { return coeffs_; }
  const std::vector<Complex>& data() const { return coeffs_; }

  bool same_shape(const SpectrogramTensor& o) const {
    return frames_ == o.frames_ && bins_ == o.bins_ && channels_ == o.channels_;
  }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t channels_ = 0;
  WindowSpec window_;
  double rate_hz_ = 1.0;
  std::size_t signal_length_ = 0;
  std::vector<Complex> coeffs_;
};

// The signal is zero-padded by one window length on each side before framing.
inline std::size_t stft_frame_count(std::size_t signal_length,
                                    const WindowSpec& window) {
  const std::size_t padded = signal_length + 2 * window.length;
  return (padded - window.length) / window.hop + 1;
}

inline SpectrogramTensor stft(const SampledSignal& signal,
                              const WindowSpec& window) {
  window.validate();
  const std::size_t len = window.length;
  if (signal.length() < len)
    throw ConfigError("signal of " + std::to_string(signal.length()) +
                      " samples is shorter than one frame (" +
                      std::to_string(len) + ")");
  const std::size_t frames = stft_frame_count(signal.length(), window);
  SpectrogramTensor out(frames, signal.channels(), window, signal.rate_hz(),
                        signal.length());
  const auto w = window.coefficients();

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(len);
  std::vector<Complex> spectrum;
  for (std::size_t c = 0; c < signal.channels(); ++c) {
    const auto x = signal.channel(c);
    for (std::size_t n = 0; n < frames; ++n) {
      // Frame n starts at padded index n*hop, i.e. original index n*hop - len.
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(n * window.hop) -
          static_cast<std::ptrdiff_t>(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::ptrdiff_t t = start + static_cast<std::ptrdiff_t>(i);
        frame[i] = (t >= 0 && t < static_cast<std::ptrdiff_t>(x.size()))
                       ? w[i] * x[static_cast<std::size_t>(t)]
                       : 0.0;
      }
      fft.fwd(spectrum, frame);
      for (std::size_t f = 0; f < out.bins(); ++f) out(n, f, c) = spectrum[f];
    }
  }
  return out;
}

// Weighted overlap-add with the analysis window, normalized by the summed
// squared window. Returns the original (unpadded) extent.
inline SampledSignal istft(const SpectrogramTensor& spec) {
  const WindowSpec& window = spec.window();
  window.validate();
  const std::size_t len = window.length;
  const std::size_t padded = (spec.frames() - 1) * window.hop + len;
  const std::size_t n_out = spec.signal_length();
  if (spec.frames() == 0 || padded < n_out + len)
    throw ConfigError("spectrogram does not cover its signal extent");
  const auto w = window.coefficients();

  std::vector<double> wsum(padded, 0.0);
  for (std::size_t n = 0; n < spec.frames(); ++n)
    for (std::size_t i = 0; i < len; ++i)
      wsum[n * window.hop + i] += w[i] * w[i];

  SampledSignal out(spec.channels(), n_out, spec.rate_hz());
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> spectrum(spec.bins());
  std::vector<double> frame;
  std::vector<double> acc(padded);
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n = 0; n < spec.frames(); ++n) {
      for (std::size_t f = 0; f < spec.bins(); ++f) spectrum[f] = spec(n, f, c);
      fft.inv(frame, spectrum, len);
      for (std::size_t i = 0; i < len; ++i)
        acc[n * window.hop + i] += w[i] * frame[i];
    }
    auto y = out.channel(c);
    for (std::size_t t = 0; t < n_out; ++t) y[t] = acc[t + len] / wsum[t + len];
  }
  return out;
}

// Mean of |X|^2 over frames and channels, per bin.
inline std::vector<double> long_term_average_spectrum(
    const SpectrogramTensor& spec) {
  if (spec.frames() == 0) throw ConfigError("spectrogram has no frames");
  std::vector<double> out(spec.bins(), 0.0);
  for (std::size_t n = 0; n < spec.frames(); ++n)
    for (std::size_t f = 0; f < spec.bins(); ++f)
      for (std::size_t c = 0; c < spec.channels(); ++c)
        out[f] += std::norm(spec(n, f, c));
  const double count = static_cast<double>(spec.frames() * spec.channels());
  for (auto& v : out) v /= count;
  return out;
}

}  // namespace asyncsep

#endif  // ASYNCSEP_STFT_HPP
