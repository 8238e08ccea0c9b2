#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csc/dictionary.hpp"
#include "csc/harness/dataset.hpp"
#include "csc/models.hpp"
#include "csc/pursuit.hpp"

namespace csc::harness {

enum class ModelKind { kML, kMSD };

struct BetaSchedule {
  enum class Kind { kFixed, kTraceMaxFraction };
  Kind kind = Kind::kTraceMaxFraction;
  /// beta itself for kFixed, rho for kTraceMaxFraction.
  double value = 0.1;

  static BetaSchedule fixed(double beta) { return {Kind::kFixed, beta}; }
  static BetaSchedule fraction(double rho) { return {Kind::kTraceMaxFraction, rho}; }
  void validate() const;
};

/// Geometry of a stack of 1-D convolutional layers.
struct ArchitectureConfig {
  Index depth = 2;
  Index width = 16;
  Index kernel_size = 5;
  std::vector<Index> dilations{1, 2};
  Padding padding = Padding::kSameZero;
  long unfolding = 0;
  Solver solver = Solver::kFista;
  ResVariant variant = ResVariant::kPlain;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LearnConfig {
  long outer_iterations = 30;
  PursuitConfig pursuit = default_pursuit();
  Solver solver = Solver::kFista;
  double dict_step = 0.05;
  BetaSchedule beta_schedule;
  Index batch_size = 128;
  Index probe_size = 64;
  std::uint64_t seed = 0;

  static PursuitConfig default_pursuit() {
    PursuitConfig c;
    c.iterations = 100;
    c.tol = 1e-9;
    c.shrinkage = Shrinkage::kSigned;
    c.trace_objective = false;
    return c;
  }
  void validate() const;
};

/// One probe evaluation of a single learner.
struct LearnRecord {
  long iteration = 0;
  Index unsuccess_count = 0;       // layer-1 reconstruction, summed over the probe batch
  Index unsuccess_count_deep = 0;  // input rebuilt from the deepest code
  double objective = 0;       // mean layer-1 Lasso objective over the probe batch
  std::vector<double> betas;  // per layer
  double wall_ms = 0;
};

/// Seeded unit-norm kernels for every layer of `arch` over 1-D signals of
/// length `dim`. MSD layers see the growing feature stack as input.
std::vector<ConvDictionary<double>> initial_banks(ModelKind kind, const ArchitectureConfig& arch,
                                                  Index dim);

/// Codes (one per column) for every layer of a stack plus the input each
/// layer saw. For MSD layers codes are in block layout (identity | conv).
struct StackCodes {
  std::vector<Matrix<double>> inputs;
  std::vector<Matrix<double>> codes;
};

/// Alternating minimization over a stack of convolutional dictionaries:
/// pursue codes for a mini-batch, take a gradient step on 1/2 ||X - D G||^2
/// with respect to the kernel taps (identity blocks fixed), renormalize every
/// kernel, recompute beta, then evaluate a fixed probe batch.
class DictionaryLearner {
 public:
  DictionaryLearner(ModelKind kind, std::vector<ConvDictionary<double>> banks, LearnConfig config);

  ModelKind kind() const { return kind_; }
  const std::vector<ConvDictionary<double>>& banks() const { return banks_; }
  const std::vector<double>& betas() const { return betas_; }
  const LearnConfig& config() const { return config_; }

  /// Layer-by-layer pursuit with the given per-layer betas. When `rho` is
  /// set, beta_k is first recomputed as rho * max |D_k^T X_k| over the
  /// columns of the layer input and written back into `betas`.
  StackCodes pursue(const Matrix<double>& x, std::vector<double>& betas,
                    std::optional<double> rho = std::nullopt) const;

  /// Steps (a) to (c) on one mini-batch.
  void update(const Matrix<double>& batch);

  /// Steps (d) and (e). `beta_override` replaces the schedule for every layer.
  LearnRecord evaluate(const Matrix<double>& probe,
                       const std::optional<std::vector<double>>& beta_override = std::nullopt);

  /// Sets betas from the schedule without recording anything.
  void initialize_betas(const Matrix<double>& probe);
  void set_betas(std::vector<double> betas);
  /// MSD only. Sets beta_k from the schedule on the inputs layer k receives
  /// in the unfolding-0 network, feeding each layer with the betas already
  /// chosen upstream. A fixed schedule leaves the betas unchanged.
  void calibrate_network_betas(const Matrix<double>& probe);

  /// Pursuit-mode MSD model (c = 1/L, bias = -beta/L) at the current state.
  MSDCSCModel<double> to_msd_model(long unfolding, Solver solver) const;
  /// Pursuit-mode ML model at the current state.
  MLCSCModel<double> to_ml_model() const;

  /// D_k applied to a layer-k code (block layout for MSD layers).
  Vector<double> layer_apply(std::size_t k, const Vector<double>& code) const;
  /// The input signal rebuilt from a deepest-layer code through every layer.
  Vector<double> reconstruct_input(const Vector<double>& deepest) const;

 private:
  double layer_lipschitz(std::size_t k) const;
  Matrix<double> next_input(std::size_t k, const Matrix<double>& codes) const;

  ModelKind kind_;
  std::vector<ConvDictionary<double>> banks_;
  std::vector<double> betas_;
  LearnConfig config_;
  long iteration_ = 0;
};

struct LearnResult {
  std::vector<ConvDictionary<double>> banks;
  std::vector<double> betas;
  std::vector<LearnRecord> records;
};

/// Mini-batch column indices for one outer iteration, drawn with replacement.
std::vector<Index> draw_batch(std::uint64_t seed, long iteration, Index n_train, Index batch_size);

/// Probe columns: the first probe_size test signals (the test split is dealt
/// round-robin over classes, so this is stratified).
Matrix<double> probe_batch(const Dataset& ds, Index probe_size);

/// Runs config.outer_iterations rounds and logs one record per round.
LearnResult learn_dictionaries(ModelKind kind, std::vector<ConvDictionary<double>> banks,
                               const Dataset& ds, const LearnConfig& config);

}  // namespace csc::harness
