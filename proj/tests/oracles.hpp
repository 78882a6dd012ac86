// Independent reference computations and fixture generators for tests.
// Nothing here calls the Cholesky, softmax or filter code under test.
#ifndef ASYNCSEP_TESTS_ORACLES_HPP
#define ASYNCSEP_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "asyncsep/model.hpp"
#include "asyncsep/stft.hpp"

namespace oracle {

using asyncsep::Complex;

inline Eigen::VectorXcd random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale / std::sqrt(2.0));
  Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

// Random Hermitian positive definite matrix with unit trace.
inline Eigen::MatrixXcd random_unit_trace_hpd(std::size_t n, std::mt19937_64& rng,
                                              double loading = 0.05) {
  const auto c = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd b(c, c);
  for (Eigen::Index j = 0; j < c; ++j) b.col(j) = random_vector(n, rng);
  Eigen::MatrixXcd r = b * b.adjoint() + loading * Eigen::MatrixXcd::Identity(c, c);
  r /= r.trace().real();
  return 0.5 * (r + r.adjoint());
}

// Sum of random sinusoids below `max_hz`.
inline asyncsep::SampledSignal bandlimited(std::size_t length, double rate, double max_hz,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  asyncsep::SampledSignal s(1, length, rate);
  for (int i = 0; i < 40; ++i) {
    const double f = 50.0 + (max_hz - 50.0) * u(rng);
    const double ph = 2.0 * std::numbers::pi * u(rng);
    for (std::size_t t = 0; t < length; ++t)
      s(0, t) += 0.05 * std::sin(2.0 * std::numbers::pi * f * t / rate + ph);
  }
  return s;
}

// Direct construction of the regularized state covariance.
inline Eigen::MatrixXcd mixture_covariance(const std::vector<Eigen::MatrixXcd>& r,
                                           const std::vector<double>& powers,
                                           double noise_floor = 1.0) {
  const auto c = r.front().rows();
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(c, c);
  for (std::size_t k = 0; k < r.size(); ++k) s += powers[k] * r[k];
  s += powers.back() * noise_floor / static_cast<double>(c) * Eigen::MatrixXcd::Identity(c, c);
  const double trace = s.trace().real();
  s += asyncsep::kDiagonalLoading * trace * Eigen::MatrixXcd::Identity(c, c);
  return s;
}

// The dense references below work in extended precision so that their own
// rounding stays well under the tolerances they are checked against.
using MatrixXcl = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXcl = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, 1>;

// -x^H S^-1 x - log det(pi S) via explicit inverse and LU determinant.
inline double dense_log_likelihood(const Eigen::MatrixXcd& s, const Eigen::VectorXcd& x) {
  const MatrixXcl sl = s.cast<std::complex<long double>>();
  const VectorXcl xl = x.cast<std::complex<long double>>();
  Eigen::FullPivLU<MatrixXcl> lu(sl);
  const MatrixXcl inv = lu.inverse();
  const long double quad = (xl.adjoint() * inv * xl)(0, 0).real();
  long double log_det = 0.0L;
  for (Eigen::Index i = 0; i < sl.rows(); ++i) log_det += std::log(std::abs(lu.matrixLU()(i, i)));
  const long double c = static_cast<long double>(s.rows());
  return static_cast<double>(-quad - c * std::log(std::numbers::pi_v<long double>) - log_det);
}

// Wiener images p_k R_k S^-1 x plus the residual (noise) image, by inverse.
inline std::vector<Eigen::VectorXcd> dense_wiener(const std::vector<Eigen::MatrixXcd>& r,
                                                  const std::vector<double>& powers,
                                                  const Eigen::VectorXcd& x,
                                                  double noise_floor = 1.0) {
  const auto c = r.front().rows();
  MatrixXcl directional = MatrixXcl::Zero(c, c);
  std::vector<MatrixXcl> rl;
  for (std::size_t k = 0; k < r.size(); ++k) {
    rl.push_back(r[k].cast<std::complex<long double>>());
    directional += static_cast<long double>(powers[k]) * rl.back();
  }
  const long double white = static_cast<long double>(powers.back()) * noise_floor / c;
  const long double trace = directional.trace().real() + white * c;
  const long double diag = white + static_cast<long double>(asyncsep::kDiagonalLoading) * trace;
  const MatrixXcl s = directional + diag * MatrixXcl::Identity(c, c);
  const VectorXcl w = Eigen::FullPivLU<MatrixXcl>(s).inverse() * x.cast<std::complex<long double>>();
  std::vector<Eigen::VectorXcd> out;
  for (std::size_t k = 0; k < r.size(); ++k)
    out.push_back((static_cast<long double>(powers[k]) * (rl[k] * w)).cast<Complex>());
  out.push_back((diag * w).cast<Complex>());
  return out;
}

inline double relative_error(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

// State model with lambda_k[f] = lambda everywhere.
inline asyncsep::StateSpectrumModel flat_states(std::size_t sources, std::size_t bins,
                                                double lambda = 1.0, double noise_factor = 1.0) {
  asyncsep::StateSpectrumModel st;
  st.num_sources = sources;
  st.bins = bins;
  st.average.assign(sources, std::vector<double>(bins, lambda));
  st.derive_levels(noise_factor);
  return st;
}

// Tensor with window of length 2*(bins-1), filled by the caller.
inline asyncsep::SpectrogramTensor blank_tensor(std::size_t frames, std::size_t bins,
                                                std::size_t channels) {
  asyncsep::WindowSpec w{2 * (bins - 1), (bins - 1) / 2, asyncsep::WindowShape::kHann};
  return asyncsep::SpectrogramTensor(frames, channels, w, 16000.0, 2 * (bins - 1));
}

// STFT-domain scene obeying W-disjoint orthogonality by construction: each
// tile has one active source with steering a_{m,k}[f] and CN(0, high) gain,
// plus white noise `snr_db` below the active power.
struct PlantedScene {
  asyncsep::SpatialModel spatial;
  asyncsep::StateSpectrumModel states;
  std::vector<asyncsep::SpectrogramTensor> observations;
  std::vector<std::size_t> active;  // [n * bins + f]
  std::vector<double> energy;       // summed over arrays
};

inline PlantedScene planted_scene(std::size_t arrays, std::size_t channels, std::size_t sources,
                                  std::size_t frames, std::size_t bins, double snr_db,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PlantedScene p;
  p.states = flat_states(sources, bins);
  p.spatial.bins = bins;
  for (std::size_t k = 0; k < sources; ++k) p.spatial.sources.push_back("s" + std::to_string(k));
  std::vector<std::vector<std::vector<Eigen::VectorXcd>>> steer(arrays);
  const auto c = static_cast<Eigen::Index>(channels);
  for (std::size_t m = 0; m < arrays; ++m) {
    asyncsep::ArrayCovariances ac;
    ac.id = "a" + std::to_string(m);
    ac.channels = channels;
    ac.noise_floor.assign(bins, 1.0);
    ac.covariances.assign(sources, std::vector<Eigen::MatrixXcd>(bins));
    steer[m].assign(sources, std::vector<Eigen::VectorXcd>(bins));
    for (std::size_t k = 0; k < sources; ++k)
      for (std::size_t f = 0; f < bins; ++f) {
        Eigen::VectorXcd a = random_vector(channels, rng);
        a /= a.norm();
        steer[m][k][f] = a;
        Eigen::MatrixXcd r = a * a.adjoint() + 0.01 * Eigen::MatrixXcd::Identity(c, c);
        ac.covariances[k][f] = r / r.trace().real();
      }
    p.spatial.arrays.push_back(std::move(ac));
    p.observations.push_back(blank_tensor(frames, bins, channels));
  }
  const double high = p.states.high[0][0];
  const double noise_var = high * std::pow(10.0, -snr_db / 10.0) / static_cast<double>(channels);
  std::uniform_int_distribution<std::size_t> pick(0, sources - 1);
  p.active.resize(frames * bins);
  p.energy.assign(frames * bins, 0.0);
  for (std::size_t n = 0; n < frames; ++n)
    for (std::size_t f = 0; f < bins; ++f) {
      const std::size_t k = pick(rng);
      p.active[n * bins + f] = k;
      const Complex z = random_vector(1, rng, std::sqrt(high))(0);
      for (std::size_t m = 0; m < arrays; ++m) {
        Eigen::VectorXcd x = z * steer[m][k][f] + random_vector(channels, rng, std::sqrt(noise_var));
        p.observations[m].tile(n, f) = x;
        p.energy[n * bins + f] += x.squaredNorm();
      }
    }
  return p;
}

// Indices of tiles in the top quartile of energy.
inline std::vector<std::size_t> top_quartile(const std::vector<double>& energy) {
  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[sorted.size() * 3 / 4];
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < energy.size(); ++i)
    if (energy[i] >= threshold) out.push_back(i);
  return out;
}

// Fractional lag of the cross-correlation peak of y against x over
// [-max_lag, max_lag], refined by a parabola through the peak neighbours.
inline double correlation_peak_lag(const std::vector<double>& x, const std::vector<double>& y,
                                   int max_lag) {
  const int n = static_cast<int>(std::min(x.size(), y.size()));
  std::vector<double> corr(2 * max_lag + 1, 0.0);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int t = std::max(0, lag); t < std::min(n, n + lag); ++t) acc += y[t] * x[t - lag];
    corr[lag + max_lag] = acc;
  }
  int best = 1;
  for (int i = 1; i < 2 * max_lag; ++i)
    if (corr[i] > corr[best]) best = i;
  const double a = corr[best - 1], b = corr[best], c = corr[best + 1];
  const double denom = a - 2 * b + c;
  const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return best - max_lag + shift;
}

}  // namespace oracle

#endif  // ASYNCSEP_TESTS_ORACLES_HPP
