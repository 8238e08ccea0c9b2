#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "csc/dictionary.hpp"
#include "csc/harness/experiments.hpp"
#include "csc/harness/learning.hpp"
#include "json.hpp"

namespace csc::harness {

using Json = nlohmann::json;

/// Every parser below throws ConfigError on a missing required key, an
/// unknown key, or a value of the wrong type or range.

/// {"input_shape": [length, channels] | [height, width, channels],
///  "kernel_size": k | [kh, kw], "dilation": s, "padding": "valid" | "same",
///  "kernels": [[taps...], ...]}   taps in (row, col, channel) order.
ConvDictionary<double> dictionary_from_json(const Json& j);
Json dictionary_to_json(const ConvDictionary<double>& d);

SignalShape shape_from_json(const Json& j);
Json shape_to_json(const SignalShape& s);

SyntheticDatasetSpec dataset_spec_from_json(const Json& j);
Json to_json(const SyntheticDatasetSpec& s);

/// {depth, width, kernel_size, dilations, padding, unfolding, solver, variant, seed}
ArchitectureConfig architecture_from_json(const Json& j);
Json to_json(const ArchitectureConfig& a);

/// {iterations, tol, shrinkage: "signed" | "nonneg"}
PursuitConfig pursuit_config_from_json(const Json& j, PursuitConfig base);
Json to_json(const PursuitConfig& p);

/// beta_schedule is {"fixed": beta} or {"fraction": rho}.
LearnConfig learn_config_from_json(const Json& j);
Json to_json(const LearnConfig& c);

/// {"dataset": {...}, "arch": {...}, "learn": {...}}; sections optional.
Fig4Config fig4_config_from_json(const Json& j);
/// Same sections plus unfoldings, solver, train_limit, test_limit.
UnfoldSweepConfig unfold_config_from_json(const Json& j);

/// One Lasso instance for the `pursue` subcommand.
struct PursueConfig {
  PursueConfig(ConvDictionary<double> d, Vector<double> x)
      : dictionary(std::move(d)), signal(std::move(x)) {}

  ConvDictionary<double> dictionary;
  Vector<double> signal;
  double beta = 0.1;
  Solver solver = Solver::kFista;
  PursuitConfig pursuit;
  /// Solve over [I, D] instead of D.
  bool msd = false;
};
PursueConfig pursue_config_from_json(const Json& j);

/// Learned banks and per-layer betas of a stack.
Json learned_to_json(ModelKind kind, const std::vector<ConvDictionary<double>>& banks,
                     const std::vector<double>& betas);

Json read_json_file(const std::string& path);

Solver solver_from_string(const std::string& s);
ResVariant variant_from_string(const std::string& s);
std::string variant_name(ResVariant v);

/// Dense matrix as CSV, one row per line, %.17g.
void write_matrix_csv(std::ostream& os, const Matrix<double>& m);

}  // namespace csc::harness
