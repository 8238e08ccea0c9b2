#pragma once

#include <vector>

#include "csc/numeric.hpp"

namespace csc::harness {

/// Per-class means of the training codes (codes one per column). Classes are
/// 0 .. max label seen in either split; a class with no training sample
/// raises DegenerateClassError.
class NearestCentroid {
 public:
  NearestCentroid(const Matrix<double>& train_codes, const std::vector<int>& train_labels,
                  int n_classes);

  /// Ties go to the lowest class index.
  int predict(const Vector<double>& code) const;
  const Matrix<double>& centroids() const { return centroids_; }

 private:
  Matrix<double> centroids_;
};

/// Fraction of test codes whose nearest training centroid carries their label.
double classify(const Matrix<double>& train_codes, const std::vector<int>& train_labels,
                const Matrix<double>& test_codes, const std::vector<int>& test_labels);

}  // namespace csc::harness
