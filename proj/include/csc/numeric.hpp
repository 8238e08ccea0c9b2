#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "csc/errors.hpp"

namespace csc {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Which proximal map a pursuit step uses: S_b (signed) or S_b^+ (ReLU(z - b)).
enum class Shrinkage { kSigned, kNonneg };

namespace detail {

template <typename Derived>
void require_nonneg_threshold(const Eigen::MatrixBase<Derived>& b) {
  if ((b.array() < 0).any()) {
    throw InvalidThresholdError("threshold must be nonnegative");
  }
}

template <typename Scalar>
void require_nonneg_threshold(Scalar b) {
  if (b < Scalar(0)) throw InvalidThresholdError("threshold must be nonnegative");
}

template <typename A, typename B>
void require_same_length(const Eigen::MatrixBase<A>& a,
                         const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("length mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

}  // namespace detail

/// Soft thresholding S_b(z) with a scalar threshold.
template <typename Derived>
Vector<typename Derived::Scalar> soft_threshold(
    const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar b) {
  using Scalar = typename Derived::Scalar;
  detail::require_nonneg_threshold(b);
  Vector<Scalar> out = z;
  for (Index i = 0; i < out.size(); ++i) {
    const Scalar v = out[i];
    out[i] = v > b ? v - b : (v < -b ? v + b : Scalar(0));
  }
  return out;
}

/// Soft thresholding with a per-entry threshold vector.
template <typename Derived, typename Thr>
Vector<typename Derived::Scalar> soft_threshold(
    const Eigen::MatrixBase<Derived>& z, const Eigen::MatrixBase<Thr>& b) {
  using Scalar = typename Derived::Scalar;
  detail::require_same_length(z, b);
  detail::require_nonneg_threshold(b);
  Vector<Scalar> out = z;
  for (Index i = 0; i < out.size(); ++i) {
    const Scalar v = out[i];
    const Scalar t = b[i];
    out[i] = v > t ? v - t : (v < -t ? v + t : Scalar(0));
  }
  return out;
}

/// S_b^+(z) = max(z - b, 0), i.e. ReLU(z - b).
template <typename Derived>
Vector<typename Derived::Scalar> soft_threshold_nonneg(
    const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar b) {
  using Scalar = typename Derived::Scalar;
  detail::require_nonneg_threshold(b);
  return (z.array() - b).cwiseMax(Scalar(0)).matrix();
}

template <typename Derived, typename Thr>
Vector<typename Derived::Scalar> soft_threshold_nonneg(
    const Eigen::MatrixBase<Derived>& z, const Eigen::MatrixBase<Thr>& b) {
  using Scalar = typename Derived::Scalar;
  detail::require_same_length(z, b);
  detail::require_nonneg_threshold(b);
  return (z.array() - b.array()).cwiseMax(Scalar(0)).matrix();
}

template <typename Derived, typename Thr>
Vector<typename Derived::Scalar> shrink(Shrinkage op,
                                        const Eigen::MatrixBase<Derived>& z,
                                        const Eigen::MatrixBase<Thr>& b) {
  return op == Shrinkage::kNonneg ? soft_threshold_nonneg(z, b)
                                  : soft_threshold(z, b);
}

template <typename Derived>
Vector<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return z.array().cwiseMax(Scalar(0)).matrix();
}

inline constexpr Index kSpectralBlock = 8;

struct SpectralOptions {
  double tol = 1e-10;
  long max_iter = 10000;
  std::uint64_t seed = 0x5eedULL;
};

/// Largest eigenvalue of a symmetric PSD operator by block power iteration
/// with Rayleigh-Ritz extraction.
///
/// `apply` maps a Vector<Scalar> of length `dim` to M times it. The first
/// block column is the normalized all-ones vector plus seeded noise of
/// magnitude 1e-3; the rest are seeded noise. Carrying a small block keeps
/// convergence fast when the top eigenvalues cluster, as they do for
/// convolutional Gram operators. Iteration stops once the top Ritz residual
/// certifies tol * max(1, lambda), or the extrapolated remaining rise of the
/// Ritz value falls below that.
template <typename Scalar, typename Apply>
Scalar spectral_lmax(Apply&& apply, Index dim, const SpectralOptions& opts = {}) {
  if (dim < 1) throw ShapeError("spectral_lmax: dim must be >= 1");
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Index block = std::min<Index>(kSpectralBlock, dim);
  Matrix<Scalar> v(dim, block);
  const Scalar base = Scalar(1) / std::sqrt(Scalar(dim));
  for (Index i = 0; i < dim; ++i) v(i, 0) = base + Scalar(1e-3 * unif(rng));
  for (Index j = 1; j < block; ++j)
    for (Index i = 0; i < dim; ++i) v(i, j) = Scalar(unif(rng));
  v = Eigen::HouseholderQR<Matrix<Scalar>>(v).householderQ() * Matrix<Scalar>::Identity(dim, block);

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Matrix<Scalar> w(dim, block);
  Vector<Scalar> top = v.col(0);
  Scalar lambda = 0, prev_step = 0;
  for (long it = 0; it < opts.max_iter; ++it) {
    for (Index j = 0; j < block; ++j) w.col(j) = apply(Vector<Scalar>(v.col(j)));
    if (!w.allFinite()) {
      throw ConvergenceError("spectral_lmax: nonfinite iterate", static_cast<double>(lambda),
                             std::vector<double>(top.data(), top.data() + top.size()));
    }
    Matrix<Scalar> h = v.transpose() * w;
    h = (Scalar(0.5) * (h + h.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> ritz(h);
    const Scalar theta = ritz.eigenvalues()[block - 1];
    const Vector<Scalar> y = ritz.eigenvectors().col(block - 1);
    top = v * y;
    const Scalar scale = std::max(Scalar(1), std::abs(theta));
    if (w.norm() == Scalar(0)) return Scalar(0);
    if ((w * y - theta * top).norm() <= Scalar(opts.tol) * scale) return theta;
    if (it > 0) {
      const Scalar step = theta - lambda;
      if (std::abs(step) <= Scalar(8) * eps * scale) return theta;
      // A falling Ritz value only happens at the rounding floor.
      if (step <= 0 && -step <= Scalar(opts.tol) * scale) return std::max(theta, lambda);
      if (it > 1 && step > 0 && prev_step > 0) {
        const Scalar q = step / prev_step;
        // The tail estimate runs low while several rates mix; keep a margin.
        if (q < Scalar(1) && step * q / (Scalar(1) - q) <= Scalar(0.1 * opts.tol) * scale) {
          return theta;
        }
      }
      prev_step = step;
    }
    lambda = theta;
    v = Eigen::HouseholderQR<Matrix<Scalar>>(w).householderQ() *
        Matrix<Scalar>::Identity(dim, block);
  }
  throw ConvergenceError("spectral_lmax: no convergence within max_iter",
                         static_cast<double>(lambda),
                         std::vector<double>(top.data(), top.data() + top.size()));
}

/// Convenience overload for an explicit symmetric matrix.
template <typename Derived>
typename Derived::Scalar spectral_lmax(const Eigen::MatrixBase<Derived>& m,
                                       const SpectralOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) throw ShapeError("spectral_lmax: matrix not square");
  return spectral_lmax<Scalar>(
      [&m](const Vector<Scalar>& v) -> Vector<Scalar> { return m * v; },
      m.rows(), opts);
}

inline constexpr Index kMaxJacobiDim = 512;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending.
template <typename Derived>
Vector<typename Derived::Scalar> symmetric_eigs(const Eigen::MatrixBase<Derived>& m_in,
                                                double tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  const Index n = m_in.rows();
  if (n != m_in.cols()) throw ShapeError("symmetric_eigs: matrix not square");
  if (n > kMaxJacobiDim) {
    throw SizeError("symmetric_eigs: dimension " + std::to_string(n) +
                    " exceeds Jacobi limit " + std::to_string(kMaxJacobiDim));
  }
  Matrix<Scalar> a = m_in;
  const Scalar scale = std::max(Scalar(1), a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(tol) * scale) {
    throw ShapeError("symmetric_eigs: matrix not symmetric within tolerance");
  }
  a = Scalar(0.5) * (a + a.transpose()).eval();

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int sweep = 0; sweep < 100; ++sweep) {
    Scalar off = 0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= eps * eps * std::max(Scalar(1), a.squaredNorm())) break;

    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector<Scalar> eigs = a.diagonal();
  std::sort(eigs.data(), eigs.data() + eigs.size());
  return eigs;
}

/// Largest absolute difference between two multisets of reals of equal size.
template <typename Scalar>
Scalar multiset_deviation(Vector<Scalar> a, Vector<Scalar> b) {
  if (a.size() != b.size()) return std::numeric_limits<Scalar>::infinity();
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  return a.size() == 0 ? Scalar(0) : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace csc
