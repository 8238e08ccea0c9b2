#include "csc/harness/dataset.hpp"

#include <random>
#include <string>

#include "csc/errors.hpp"

namespace csc::harness {

void SyntheticDatasetSpec::validate() const {
  if (n_classes < 1 || dim < 1 || train_per_class < 1 || test_total < 1) {
    throw ConfigError("dataset counts must be positive");
  }
  // Zero noise is accepted: every sample then equals its center.
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(center_scale > 0.0)) throw ConfigError("center_scale must be > 0");
}

Dataset generate_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, spec.center_scale);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.centers.resize(spec.dim, spec.n_classes);
  for (Index k = 0; k < spec.n_classes; ++k)
    for (Index i = 0; i < spec.dim; ++i) ds.centers(i, k) = unif(rng);

  auto sample = [&](Index k) {
    Vector<double> x = ds.centers.col(k);
    if (spec.noise_sigma > 0.0) {
      for (Index i = 0; i < spec.dim; ++i) x[i] += spec.noise_sigma * noise(rng);
    }
    return x;
  };

  ds.train.resize(spec.dim, spec.n_classes * spec.train_per_class);
  for (Index k = 0; k < spec.n_classes; ++k) {
    for (Index j = 0; j < spec.train_per_class; ++j) {
      const Index col = k * spec.train_per_class + j;
      ds.train.col(col) = sample(k);
      ds.train_labels.push_back(static_cast<int>(k));
    }
  }

  ds.test.resize(spec.dim, spec.test_total);
  for (Index j = 0; j < spec.test_total; ++j) {
    const Index k = j % spec.n_classes;
    ds.test.col(j) = sample(k);
    ds.test_labels.push_back(static_cast<int>(k));
  }
  return ds;
}

}  // namespace csc::harness
