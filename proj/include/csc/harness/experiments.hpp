#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "csc/harness/dataset.hpp"
#include "csc/harness/learning.hpp"

namespace csc::harness {

struct ExperimentRecord {
  long iteration = 0;
  Index unsuccess_count_ml = 0;
  Index unsuccess_count_msd = 0;
  double objective_ml = 0;
  double objective_msd = 0;
  double beta = 0;  // layer-1 beta shared by both models
  double wall_ms = 0;
};

struct Fig4Config {
  SyntheticDatasetSpec dataset;
  ArchitectureConfig arch;
  LearnConfig learn;
};

/// Trains an ML and an MSD stack side by side from the same seed. Each round
/// both take a step on the same mini-batch; the ML learner recomputes beta
/// from its schedule and the MSD learner is evaluated with that same beta.
std::vector<ExperimentRecord> fig4_experiment(const Fig4Config& config);

/// Header plus one row per record; wall time is left out so that runs with
/// the same seed are byte-identical.
void write_fig4_csv(std::ostream& os, const std::vector<ExperimentRecord>& records);

struct UnfoldSweepConfig {
  SyntheticDatasetSpec dataset;
  ArchitectureConfig arch;
  /// Pretraining of the MSD stack; outer_iterations may be 0.
  LearnConfig learn = pretraining();
  std::vector<long> unfoldings{0, 1, 2};
  Solver solver = Solver::kIsta;
  /// Caps on the number of signals fed through the sweep (0 means all).
  Index train_limit = 2000;
  Index test_limit = 500;

  static LearnConfig pretraining() {
    LearnConfig c;
    c.outer_iterations = 10;
    return c;
  }
};

struct UnfoldSweepRow {
  long unfolding = 0;
  Solver solver = Solver::kIsta;
  /// Mean per-layer Lasso objective, every layer evaluated on the input it
  /// receives in the unfolding-0 network so rows share the same problems.
  double mean_objective = 0;
  double accuracy = 0;
  /// Fraction of (signal, layer) problems whose objective dropped strictly
  /// relative to the previous row; 0 for the first row.
  double strict_fraction = 0;
  Index problems = 0;
};

std::vector<UnfoldSweepRow> unfold_sweep(const UnfoldSweepConfig& config);

void write_unfold_csv(std::ostream& os, const std::vector<UnfoldSweepRow>& rows);

std::string solver_name(Solver s);

}  // namespace csc::harness
