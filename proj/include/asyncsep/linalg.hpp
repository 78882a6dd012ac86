#ifndef ASYNCSEP_LINALG_HPP
#define ASYNCSEP_LINALG_HPP

#include <Eigen/Core>

#include <cmath>
#include <complex>

#include "asyncsep/errors.hpp"

namespace asyncsep {

// Lower-triangular Cholesky factor S = L L^H of a Hermitian positive
// definite matrix. Storage is reused across compute() calls of equal size,
// which keeps the per-tile loops allocation free.
class HermitianCholesky {
 public:
  // Returns false if S is not numerically positive definite. Only the lower
  // triangle of S is read.
  bool compute(const Eigen::MatrixXcd& s) {
    const Eigen::Index n = s.rows();
    factor_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double d = s(j, j).real();
      for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(factor_(j, k));
      if (!(d > 0.0)) return false;
      const double ljj = std::sqrt(d);
      factor_(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        std::complex<double> v = s(i, j);
        for (Eigen::Index k = 0; k < j; ++k)
          v -= factor_(i, k) * std::conj(factor_(j, k));
        factor_(i, j) = v / ljj;
      }
      for (Eigen::Index i = 0; i < j; ++i) factor_(i, j) = 0.0;
    }
    return true;
  }

  // Solves S y = b in place.
  void solve_in_place(Eigen::Ref<Eigen::VectorXcd> b) const {
    const Eigen::Index n = factor_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      std::complex<double> v = b(i);
      for (Eigen::Index k = 0; k < i; ++k) v -= factor_(i, k) * b(k);
      b(i) = v / factor_(i, i).real();
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      std::complex<double> v = b(i);
      for (Eigen::Index k = i + 1; k < n; ++k) v -= std::conj(factor_(k, i)) * b(k);
      b(i) = v / factor_(i, i).real();
    }
  }

  // x^H S^{-1} x = |L^{-1} x|^2, via forward substitution only.
  double quadratic_form(const Eigen::Ref<const Eigen::VectorXcd>& x) {
    const Eigen::Index n = factor_.rows();
    scratch_.resize(n);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::complex<double> v = x(i);
      for (Eigen::Index k = 0; k < i; ++k) v -= factor_(i, k) * scratch_(k);
      scratch_(i) = v / factor_(i, i).real();
      acc += std::norm(scratch_(i));
    }
    return acc;
  }

  double log_determinant() const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < factor_.rows(); ++i)
      acc += std::log(factor_(i, i).real());
    return 2.0 * acc;
  }

  const Eigen::MatrixXcd& factor() const { return factor_; }

 private:
  Eigen::MatrixXcd factor_;
  Eigen::VectorXcd scratch_;
};

}  // namespace asyncsep

#endif  // ASYNCSEP_LINALG_HPP
