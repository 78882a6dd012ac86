#ifndef ASYNCSEP_SIGNAL_HPP
#define ASYNCSEP_SIGNAL_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "asyncsep/errors.hpp"

namespace asyncsep {

// Multichannel real-valued time series at a nominal sample rate. Channels
// are stored contiguously, one vector per channel, all of equal length.
class SampledSignal {
 public:
  SampledSignal() = default;

  SampledSignal(std::size_t channels, std::size_t length, double rate_hz)
      : rate_hz_(rate_hz), data_(channels, std::vector<double>(length, 0.0)) {
    if (!(rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
  }

  SampledSignal(std::vector<std::vector<double>> data, double rate_hz)
      : rate_hz_(rate_hz), data_(std::move(data)) {
    if (!(rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
    for (const auto& ch : data_) {
      if (ch.size() != data_.front().size())
        throw ConfigError("all channels must have equal length");
    }
  }

  std::size_t channels() const { return data_.size(); }
  std::size_t length() const { return data_.empty() ? 0 : data_[0].size(); }
  double rate_hz() const { return rate_hz_; }
  double duration_s() const { return static_cast<double>(length()) / rate_hz_; }

  std::span<double> channel(std::size_t c) { return data_.at(c); }
  std::span<const double> channel(std::size_t c) const { return data_.at(c); }

  double& operator()(std::size_t c, std::size_t t) { return data_[c][t]; }
  double operator()(std::size_t c, std::size_t t) const { return data_[c][t]; }

  // New signal holding only the listed channels, in order.
  SampledSignal select(std::span<const std::size_t> which) const {
    std::vector<std::vector<double>> out;
    out.reserve(which.size());
    for (std::size_t c : which) out.push_back(data_.at(c));
    return SampledSignal(std::move(out), rate_hz_);
  }

  // Stacks the channels of several equal-length, equal-rate signals.
  static SampledSignal concat_channels(std::span<const SampledSignal> parts) {
    if (parts.empty()) throw ConfigError("nothing to concatenate");
    std::vector<std::vector<double>> out;
    for (const auto& p : parts) {
      if (p.length() != parts[0].length() || p.rate_hz() != parts[0].rate_hz())
        throw ConfigError("concatenated signals must share length and rate");
      for (std::size_t c = 0; c < p.channels(); ++c) out.push_back(p.data_[c]);
    }
    return SampledSignal(std::move(out), parts[0].rate_hz());
  }

  SampledSignal& operator+=(const SampledSignal& other) {
    if (other.channels() != channels() || other.length() != length())
      throw ConfigError("signal shapes differ");
    for (std::size_t c = 0; c < channels(); ++c)
      for (std::size_t t = 0; t < length(); ++t) data_[c][t] += other.data_[c][t];
    return *this;
  }

  SampledSignal& operator*=(double gain) {
    for (auto& ch : data_)
      for (auto& v : ch) v *= gain;
    return *this;
  }

  bool operator==(const SampledSignal&) const = default;

 private:
  double rate_hz_ = 1.0;
  std::vector<std::vector<double>> data_;
};

}  // namespace asyncsep

#endif  // ASYNCSEP_SIGNAL_HPP
