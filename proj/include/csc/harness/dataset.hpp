#pragma once

#include <cstdint>
#include <vector>

#include "csc/numeric.hpp"

namespace csc::harness {

/// Gaussian clusters around centers drawn uniformly from [0, center_scale]^dim.
struct SyntheticDatasetSpec {
  Index n_classes = 100;
  Index dim = 100;
  Index train_per_class = 100;
  Index test_total = 2000;
  double noise_sigma = 0.3;
  double center_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Signals are stored one per column.
struct Dataset {
  Matrix<double> centers;  // dim x n_classes
  Matrix<double> train;
  std::vector<int> train_labels;
  Matrix<double> test;
  std::vector<int> test_labels;

  Index dim() const { return centers.rows(); }
  Index n_classes() const { return centers.cols(); }
};

/// Deterministic given spec.seed. Training data is class-major; the test
/// split deals test_total samples round-robin over the classes.
Dataset generate_dataset(const SyntheticDatasetSpec& spec);

}  // namespace csc::harness
