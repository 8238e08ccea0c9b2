#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "csc/dictionary.hpp"
#include "csc/errors.hpp"
#include "csc/numeric.hpp"

namespace csc {

/// One layer's Lasso: min_G 1/2 ||signal - D G||^2 + sum_j beta_j |G_j|.
template <LinearDictionary Dict>
struct LassoProblem {
  using Scalar = typename Dict::Scalar;

  Dict dict;
  Vector<Scalar> signal;
  Vector<Scalar> beta;  // one entry per dictionary column
  bool uniform_beta = true;

  LassoProblem(Dict d, Vector<Scalar> x, Scalar b)
      : dict(std::move(d)), signal(std::move(x)), uniform_beta(true) {
    if (b < Scalar(0)) throw InvalidThresholdError("beta must be nonnegative");
    beta = Vector<Scalar>::Constant(dict.cols(), b);
    check_signal();
  }

  LassoProblem(Dict d, Vector<Scalar> x, Vector<Scalar> b)
      : dict(std::move(d)), signal(std::move(x)), beta(std::move(b)), uniform_beta(false) {
    if (beta.size() != dict.cols()) throw ShapeError("beta length must equal dictionary columns");
    if ((beta.array() < 0).any()) throw InvalidThresholdError("beta must be nonnegative");
    check_signal();
  }

  Scalar scalar_beta() const {
    if (!uniform_beta) throw ShapeError("problem has a per-entry beta");
    return beta.size() > 0 ? beta[0] : Scalar(0);
  }

 private:
  void check_signal() const {
    if (signal.size() != dict.rows()) {
      throw ShapeError("signal length " + std::to_string(signal.size()) +
                       " != dictionary rows " + std::to_string(dict.rows()));
    }
  }
};

struct PursuitConfig {
  long iterations = 1;  // 1 + unfolding
  double tol = 1e-12;
  Shrinkage shrinkage = Shrinkage::kSigned;
  std::optional<double> lipschitz_override;
  /// When false only the initial and final objectives are recorded, which
  /// saves one dictionary product per iteration.
  bool trace_objective = true;
};

template <typename Scalar>
struct PursuitResult {
  Vector<Scalar> code;
  std::vector<Scalar> objective_trace;  // entry 0 is the initial code
  std::vector<Scalar> delta_trace;      // ||G^{k+1} - G^k||_inf, 0 for entry 0
  long iterations_run = 0;
  Scalar lipschitz = 0;
  std::vector<Scalar> momentum_trace;  // t_k, FISTA only
};

/// 2 * lambda_max(D^T D), computed on whichever Gram side is smaller.
template <LinearDictionary Dict>
typename Dict::Scalar lipschitz_constant(const Dict& dict, const SpectralOptions& opts = {}) {
  using Scalar = typename Dict::Scalar;
  Scalar lmax;
  if (dict.rows() < dict.cols()) {
    lmax = spectral_lmax<Scalar>(
        [&dict](const Vector<Scalar>& v) -> Vector<Scalar> {
          return dict.apply(dict.apply_adjoint(v));
        },
        dict.rows(), opts);
  } else {
    lmax = spectral_lmax<Scalar>(
        [&dict](const Vector<Scalar>& v) -> Vector<Scalar> {
          return dict.apply_adjoint(dict.apply(v));
        },
        dict.cols(), opts);
  }
  if (!(lmax > Scalar(0))) throw DegenerateDictionaryError("lipschitz_constant: zero dictionary");
  return Scalar(2) * lmax;
}

template <LinearDictionary Dict>
typename Dict::Scalar lasso_objective(const LassoProblem<Dict>& problem,
                                      const Vector<typename Dict::Scalar>& code) {
  using Scalar = typename Dict::Scalar;
  if (code.size() != problem.dict.cols()) throw ShapeError("lasso_objective: code length mismatch");
  const Vector<Scalar> r = problem.signal - problem.dict.apply(code);
  return Scalar(0.5) * r.squaredNorm() + problem.beta.dot(code.cwiseAbs());
}

namespace detail {

template <LinearDictionary Dict>
typename Dict::Scalar resolve_lipschitz(const Dict& dict, const PursuitConfig& config) {
  using Scalar = typename Dict::Scalar;
  if (config.lipschitz_override) {
    if (!(*config.lipschitz_override > 0)) throw ConfigError("lipschitz_override must be > 0");
    return Scalar(*config.lipschitz_override);
  }
  return lipschitz_constant(dict);
}

inline void check_config(const PursuitConfig& config) {
  if (config.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(config.tol > 0)) throw ConfigError("tol must be > 0");
}

// One proximal-gradient step from `point`.
template <LinearDictionary Dict>
Vector<typename Dict::Scalar> prox_step(const LassoProblem<Dict>& problem,
                                        const Vector<typename Dict::Scalar>& point,
                                        typename Dict::Scalar lipschitz,
                                        const Vector<typename Dict::Scalar>& threshold,
                                        Shrinkage op) {
  using Scalar = typename Dict::Scalar;
  const Vector<Scalar> grad =
      problem.dict.apply_adjoint(problem.dict.apply(point) - problem.signal);
  return shrink(op, (point - grad / lipschitz).eval(), threshold);
}

template <typename Scalar>
void require_finite(const Vector<Scalar>& code, const std::vector<Scalar>& trace,
                    const char* who) {
  if (!code.allFinite()) {
    throw DivergenceError(std::string(who) + ": nonfinite iterate",
                          std::vector<double>(trace.begin(), trace.end()));
  }
}

}  // namespace detail

/// Iterative soft thresholding:
/// G^{k+1} = P_{beta/L}(G^k - (1/L) D^T (D G^k - X)).
template <LinearDictionary Dict>
PursuitResult<typename Dict::Scalar> ista(const LassoProblem<Dict>& problem,
                                          const PursuitConfig& config,
                                          const Vector<typename Dict::Scalar>& init) {
  using Scalar = typename Dict::Scalar;
  detail::check_config(config);
  if (init.size() != problem.dict.cols()) throw ShapeError("ista: init length mismatch");

  PursuitResult<Scalar> res;
  res.lipschitz = detail::resolve_lipschitz(problem.dict, config);
  const Vector<Scalar> threshold = problem.beta / res.lipschitz;

  res.code = init;
  res.objective_trace.push_back(lasso_objective(problem, res.code));
  res.delta_trace.push_back(0);
  for (long k = 0; k < config.iterations; ++k) {
    Vector<Scalar> next =
        detail::prox_step(problem, res.code, res.lipschitz, threshold, config.shrinkage);
    detail::require_finite(next, res.objective_trace, "ista");
    const Scalar delta = next.size() ? (next - res.code).cwiseAbs().maxCoeff() : Scalar(0);
    res.code = std::move(next);
    if (config.trace_objective) res.objective_trace.push_back(lasso_objective(problem, res.code));
    res.delta_trace.push_back(delta);
    ++res.iterations_run;
    if (delta < Scalar(config.tol)) break;
  }
  if (!config.trace_objective) res.objective_trace.push_back(lasso_objective(problem, res.code));
  return res;
}

/// FISTA with t_1 = 1 and G^0 = G^1: the first step is a plain ISTA step from
/// `init`, later steps extrapolate Z = G^k + ((t_k - 1) / t_{k+1})(G^k - G^{k-1}).
template <LinearDictionary Dict>
PursuitResult<typename Dict::Scalar> fista(const LassoProblem<Dict>& problem,
                                           const PursuitConfig& config,
                                           const Vector<typename Dict::Scalar>& init) {
  using Scalar = typename Dict::Scalar;
  detail::check_config(config);
  if (init.size() != problem.dict.cols()) throw ShapeError("fista: init length mismatch");

  PursuitResult<Scalar> res;
  res.lipschitz = detail::resolve_lipschitz(problem.dict, config);
  const Vector<Scalar> threshold = problem.beta / res.lipschitz;

  res.objective_trace.push_back(lasso_objective(problem, init));
  res.delta_trace.push_back(0);

  Vector<Scalar> current =
      detail::prox_step(problem, init, res.lipschitz, threshold, config.shrinkage);
  detail::require_finite(current, res.objective_trace, "fista");
  Vector<Scalar> previous = current;
  Scalar t = 1;
  res.momentum_trace.push_back(t);
  res.objective_trace.push_back(lasso_objective(problem, current));
  const Scalar first_delta = init.size() ? (current - init).cwiseAbs().maxCoeff() : Scalar(0);
  res.delta_trace.push_back(first_delta);
  res.iterations_run = 1;

  if (first_delta >= Scalar(config.tol)) {
    for (long k = 1; k < config.iterations; ++k) {
      const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
      const Vector<Scalar> z = current + ((t - Scalar(1)) / t_next) * (current - previous);
      Vector<Scalar> next =
          detail::prox_step(problem, z, res.lipschitz, threshold, config.shrinkage);
      detail::require_finite(next, res.objective_trace, "fista");
      const Scalar delta = next.size() ? (next - current).cwiseAbs().maxCoeff() : Scalar(0);
      previous = std::move(current);
      current = std::move(next);
      t = t_next;
      res.momentum_trace.push_back(t);
      if (config.trace_objective) res.objective_trace.push_back(lasso_objective(problem, current));
      res.delta_trace.push_back(delta);
      ++res.iterations_run;
      if (delta < Scalar(config.tol)) break;
    }
  }
  if (!config.trace_objective && res.iterations_run > 1) {
    res.objective_trace.push_back(lasso_objective(problem, current));
  }
  res.code = std::move(current);
  return res;
}

/// One stage of layered thresholding: G_i = P_threshold(D_i^T G_{i-1}).
template <LinearDictionary Dict>
struct ThresholdLayer {
  Dict dict;
  Vector<typename Dict::Scalar> threshold;  // one entry per column

  ThresholdLayer(Dict d, typename Dict::Scalar b)
      : dict(std::move(d)), threshold(Vector<typename Dict::Scalar>::Constant(dict.cols(), b)) {}
  ThresholdLayer(Dict d, Vector<typename Dict::Scalar> b)
      : dict(std::move(d)), threshold(std::move(b)) {}
};

/// Returns G_1 .. G_k; G_0 = X is not included.
template <LinearDictionary Dict>
std::vector<Vector<typename Dict::Scalar>> layered_thresholding(
    const std::vector<ThresholdLayer<Dict>>& layers, const Vector<typename Dict::Scalar>& x,
    Shrinkage op) {
  using Scalar = typename Dict::Scalar;
  std::vector<Vector<Scalar>> codes;
  codes.reserve(layers.size());
  Vector<Scalar> current = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (current.size() != layer.dict.rows() || layer.threshold.size() != layer.dict.cols()) {
      throw ShapeError("layered_thresholding: shape mismatch at layer " + std::to_string(i + 1));
    }
    current = shrink(op, layer.dict.apply_adjoint(current), layer.threshold);
    codes.push_back(current);
  }
  return codes;
}

/// CSV with header iter,objective,delta_inf.
template <typename Scalar>
void write_trace_csv(std::ostream& os, const PursuitResult<Scalar>& result) {
  os << "iter,objective,delta_inf\n";
  const auto old_flags = os.flags();
  const auto old_prec = os.precision();
  os << std::setprecision(17);
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k) {
    os << k << ',' << result.objective_trace[k] << ',' << result.delta_trace[k] << '\n';
  }
  os.flags(old_flags);
  os.precision(old_prec);
}

}  // namespace csc
