#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "csc/dictionary.hpp"
#include "csc/errors.hpp"
#include "csc/models.hpp"
#include "csc/numeric.hpp"
#include "csc/pursuit.hpp"

namespace csc {

/// Uniqueness bound 1/2 (1 + 1/mu); +infinity for mu = 0.
template <typename Scalar>
Scalar lemma1_threshold_from_mu(Scalar mu) {
  if (mu <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return Scalar(0.5) * (Scalar(1) + Scalar(1) / mu);
}

template <LinearDictionary Dict>
typename Dict::Scalar lemma1_threshold(const Dict& dict) {
  return lemma1_threshold_from_mu(mutual_coherence(dict));
}

/// eps0^2 * prod_k 4 / (1 - (2 stripe_k - 1) mu_k).
inline double lemma2_bound(const std::vector<double>& mus, const std::vector<Index>& stripes,
                           double eps0) {
  if (mus.size() != stripes.size()) throw ShapeError("lemma2_bound: mus/stripes length mismatch");
  double bound = eps0 * eps0;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    const double denom = 1.0 - (2.0 * static_cast<double>(stripes[k]) - 1.0) * mus[k];
    if (!(denom > 0.0)) {
      throw BoundInapplicableError("lemma2_bound: stripe condition violated at layer " +
                                       std::to_string(k + 1),
                                   k + 1);
    }
    bound *= 4.0 / denom;
  }
  return bound;
}

template <typename Scalar>
struct SpectrumCheck {
  Vector<Scalar> a_eigs;  // eigenvalues of A A^T
  Vector<Scalar> b_eigs;  // eigenvalues of B = [[I, A^T], [A, A A^T]]
  Index zero_count_expected = 0;
  /// eig(B) against {0 x cols(A)} u {lambda_i(A A^T) + 1}.
  Scalar max_abs_deviation = 0;
  /// eig(B) against {0 x rows(A)} u {lambda_j(A^T A) + 1}, the spectrum of
  /// M M^T with M = [I; A] of rank cols(A).
  Scalar rank_deviation = 0;
  /// |lambda_max(B) - (lambda_max(A A^T) + 1)|.
  Scalar lmax_deviation = 0;
  bool pass = false;
};

template <typename Scalar>
Matrix<Scalar> lemma3_block(const Matrix<Scalar>& a) {
  const Index n = a.rows(), m = a.cols();
  Matrix<Scalar> b(m + n, m + n);
  b.topLeftCorner(m, m).setIdentity();
  b.topRightCorner(m, n) = a.transpose();
  b.bottomLeftCorner(n, m) = a;
  b.bottomRightCorner(n, n) = a * a.transpose();
  return b;
}

template <typename Scalar>
SpectrumCheck<Scalar> lemma3_check(const Matrix<Scalar>& a, double tol) {
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == Scalar(0)) {
    throw ShapeError("lemma3_check: A must be nonzero");
  }
  const Index n = a.rows(), m = a.cols();
  SpectrumCheck<Scalar> out;
  out.zero_count_expected = m;
  out.a_eigs = symmetric_eigs((a * a.transpose()).eval(), 1e-9);
  out.b_eigs = symmetric_eigs(lemma3_block(a), 1e-9);

  Vector<Scalar> claimed(m + n);
  claimed.head(m).setZero();
  claimed.tail(n) = out.a_eigs.array() + Scalar(1);
  out.max_abs_deviation = multiset_deviation(out.b_eigs, claimed);

  const Vector<Scalar> gram_eigs = symmetric_eigs((a.transpose() * a).eval(), 1e-9);
  Vector<Scalar> ranked(m + n);
  ranked.head(n).setZero();
  ranked.tail(m) = gram_eigs.array() + Scalar(1);
  out.rank_deviation = multiset_deviation(out.b_eigs, ranked);

  out.lmax_deviation = std::abs(out.b_eigs.maxCoeff() - (out.a_eigs.maxCoeff() + Scalar(1)));
  out.pass = out.max_abs_deviation < Scalar(tol);
  return out;
}

template <typename Scalar>
struct ReconstructionReport {
  Vector<Scalar> xi;          // D G
  Vector<Scalar> target;      // the signal being reconstructed
  Vector<Scalar> thresholds;  // 2 beta per dimension
  Scalar beta = 0;
  std::vector<bool> unsuccess_mask;
  Index unsuccess_count = 0;
};

/// A dimension is unsuccessful when |xi_j - target_j| > 2 beta_j.
template <typename Scalar>
ReconstructionReport<Scalar> reconstruction_report_from(const Vector<Scalar>& target,
                                                        const Vector<Scalar>& xi,
                                                        const Vector<Scalar>& beta_per_dim) {
  if (target.size() != xi.size() || beta_per_dim.size() != xi.size()) {
    throw ShapeError("reconstruction_report: shape mismatch");
  }
  ReconstructionReport<Scalar> rep;
  rep.xi = xi;
  rep.target = target;
  rep.thresholds = Scalar(2) * beta_per_dim;
  rep.beta = beta_per_dim.size() ? beta_per_dim[0] : Scalar(0);
  rep.unsuccess_mask.resize(static_cast<std::size_t>(xi.size()));
  for (Index j = 0; j < xi.size(); ++j) {
    const bool bad = std::abs(xi[j] - target[j]) > rep.thresholds[j];
    rep.unsuccess_mask[static_cast<std::size_t>(j)] = bad;
    rep.unsuccess_count += bad ? 1 : 0;
  }
  return rep;
}

template <typename Scalar>
ReconstructionReport<Scalar> reconstruction_report_from(const Vector<Scalar>& target,
                                                        const Vector<Scalar>& xi, Scalar beta) {
  return reconstruction_report_from(target, xi, Vector<Scalar>::Constant(xi.size(), beta).eval());
}

struct ReportOptions {
  /// Accept per-entry beta; dimension j then uses beta_j, the regularization
  /// of column j, which is the identity column of dimension j in an
  /// identity-augmented dictionary.
  bool per_dimension_beta = false;
};

template <LinearDictionary Dict>
ReconstructionReport<typename Dict::Scalar> reconstruction_report(
    const LassoProblem<Dict>& problem, const Vector<typename Dict::Scalar>& code,
    const ReportOptions& options = {}) {
  using Scalar = typename Dict::Scalar;
  if (code.size() != problem.dict.cols()) throw ShapeError("reconstruction_report: code length");
  const Vector<Scalar> xi = problem.dict.apply(code);
  if (problem.uniform_beta) return reconstruction_report_from(problem.signal, xi, problem.scalar_beta());
  if (!options.per_dimension_beta) {
    throw ShapeError("reconstruction_report: per-entry beta requires per_dimension_beta");
  }
  if (problem.beta.size() < xi.size()) throw ShapeError("reconstruction_report: beta too short");
  return reconstruction_report_from(problem.signal, xi, problem.beta.head(xi.size()).eval());
}

template <typename Scalar>
struct Theorem1Comparison {
  Vector<Scalar> eta;  // (identity corrections | gamma_ml)
  Scalar f_ml = 0;
  Scalar f_msd = 0;
  /// sum over unsuccessful dims of -delta^2/2 + beta |delta|.
  Scalar predicted_gap = 0;
  ReconstructionReport<Scalar> report;
};

/// Builds the identity-augmented code eta from an ML code and evaluates both
/// Lasso objectives under the same beta.
template <LinearDictionary Dict>
Theorem1Comparison<typename Dict::Scalar> theorem1_compare(
    const LassoProblem<Dict>& ml_problem, const Vector<typename Dict::Scalar>& gamma_ml) {
  using Scalar = typename Dict::Scalar;
  const Scalar beta = ml_problem.scalar_beta();
  Theorem1Comparison<Scalar> out;
  out.report = reconstruction_report(ml_problem, gamma_ml);
  out.f_ml = lasso_objective(ml_problem, gamma_ml);

  const Index n = ml_problem.dict.rows();
  out.eta = Vector<Scalar>::Zero(n + gamma_ml.size());
  out.eta.tail(gamma_ml.size()) = gamma_ml;
  for (Index j = 0; j < n; ++j) {
    if (!out.report.unsuccess_mask[static_cast<std::size_t>(j)]) continue;
    const Scalar delta = out.report.xi[j] - ml_problem.signal[j];
    out.eta[j] = -delta;
    out.predicted_gap += -Scalar(0.5) * delta * delta + beta * std::abs(delta);
  }
  const LassoProblem<IdentityAugmented<Dict>> msd_problem(IdentityAugmented<Dict>(ml_problem.dict),
                                                          ml_problem.signal, beta);
  out.f_msd = lasso_objective(msd_problem, out.eta);
  return out;
}

/// Max |layered thresholding over [I, F^T] with threshold (0, .., -b)  -
/// concatenate(X, ReLU(conv(X, F) + b))| for a network-mode MSD layer.
/// X is a feature stack, so it is expected to be nonnegative.
template <typename Scalar>
Scalar proposition1_check(const LayerParams<Scalar>& layer, const Vector<Scalar>& x) {
  const MSDDictionary<Scalar> dict(layer.kernel_bank);
  const Index n = dict.rows();
  const Index p = layer.kernel_bank.out_positions();
  Vector<Scalar> threshold(dict.cols());
  threshold.head(n).setZero();
  threshold.tail(dict.cols() - n) = layer.threshold().replicate(p, 1);

  // S^+ with a possibly negative threshold is ReLU(z - threshold).
  const Vector<Scalar> z = dict.apply_adjoint(x);
  const Vector<Scalar> block = relu((z - threshold).eval());
  const Vector<Scalar> via_lasso = dict.to_feature_stack(block);

  const Vector<Scalar> fresh =
      relu((layer.kernel_bank.apply_adjoint(x) + layer.bias.replicate(p, 1)).eval());
  const Vector<Scalar> direct =
      concat_channels(x, layer.kernel_bank.input_shape().channels, fresh, layer.width());
  return via_lasso.size() ? (via_lasso - direct).cwiseAbs().maxCoeff() : Scalar(0);
}

}  // namespace csc
