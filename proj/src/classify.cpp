#include "csc/harness/classify.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "csc/errors.hpp"

namespace csc::harness {

NearestCentroid::NearestCentroid(const Matrix<double>& train_codes,
                                 const std::vector<int>& train_labels, int n_classes) {
  if (static_cast<std::size_t>(train_codes.cols()) != train_labels.size()) {
    throw ShapeError("classify: train codes and labels differ in count");
  }
  if (n_classes < 1) throw DegenerateClassError("classify: no classes");
  centroids_ = Matrix<double>::Zero(train_codes.rows(), n_classes);
  std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
  for (Index j = 0; j < train_codes.cols(); ++j) {
    const int y = train_labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= n_classes) throw ShapeError("classify: label out of range");
    centroids_.col(y) += train_codes.col(j);
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int k = 0; k < n_classes; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw DegenerateClassError("classify: class " + std::to_string(k) +
                                 " has no training samples");
    }
    centroids_.col(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
  }
}

int NearestCentroid::predict(const Vector<double>& code) const {
  if (code.size() != centroids_.rows()) throw ShapeError("classify: code length mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < centroids_.cols(); ++k) {
    const double d = (centroids_.col(k) - code).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

double classify(const Matrix<double>& train_codes, const std::vector<int>& train_labels,
                const Matrix<double>& test_codes, const std::vector<int>& test_labels) {
  if (static_cast<std::size_t>(test_codes.cols()) != test_labels.size()) {
    throw ShapeError("classify: test codes and labels differ in count");
  }
  if (test_labels.empty()) throw ShapeError("classify: empty test set");
  int max_label = -1;
  for (int y : train_labels) max_label = std::max(max_label, y);
  for (int y : test_labels) max_label = std::max(max_label, y);
  const NearestCentroid head(train_codes, train_labels, max_label + 1);

  Index correct = 0;
  for (Index j = 0; j < test_codes.cols(); ++j) {
    if (head.predict(test_codes.col(j)) == test_labels[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_codes.cols());
}

}  // namespace csc::harness
