#include "csc/harness/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>

#include "csc/harness/classify.hpp"
#include "csc/models.hpp"

namespace csc::harness {

std::string solver_name(Solver s) { return s == Solver::kIsta ? "ista" : "fista"; }

std::vector<ExperimentRecord> fig4_experiment(const Fig4Config& config) {
  config.learn.validate();
  const Dataset ds = generate_dataset(config.dataset);
  DictionaryLearner ml(ModelKind::kML, initial_banks(ModelKind::kML, config.arch, ds.dim()),
                       config.learn);
  DictionaryLearner msd(ModelKind::kMSD, initial_banks(ModelKind::kMSD, config.arch, ds.dim()),
                        config.learn);
  const Matrix<double> probe = probe_batch(ds, config.learn.probe_size);
  ml.initialize_betas(probe);
  msd.set_betas(ml.betas());

  std::vector<ExperimentRecord> out;
  for (long it = 0; it < config.learn.outer_iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const auto idx = draw_batch(config.learn.seed, it, ds.train.cols(), config.learn.batch_size);
    Matrix<double> batch(ds.dim(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) batch.col(static_cast<Index>(j)) = ds.train.col(idx[j]);

    ml.update(batch);
    msd.update(batch);
    const LearnRecord rml = ml.evaluate(probe);
    const LearnRecord rmsd = msd.evaluate(probe, ml.betas());

    ExperimentRecord rec;
    rec.iteration = rml.iteration;
    rec.unsuccess_count_ml = rml.unsuccess_count;
    rec.unsuccess_count_msd = rmsd.unsuccess_count;
    rec.objective_ml = rml.objective;
    rec.objective_msd = rmsd.objective;
    rec.beta = rml.betas.front();
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.push_back(rec);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_fig4_csv(std::ostream& os, const std::vector<ExperimentRecord>& records) {
  os << "iteration,unsuccess_ml,unsuccess_msd,objective_ml,objective_msd,beta\n";
  for (const auto& r : records) {
    os << r.iteration << ',' << r.unsuccess_count_ml << ',' << r.unsuccess_count_msd << ','
       << fmt(r.objective_ml) << ',' << fmt(r.objective_msd) << ',' << fmt(r.beta) << '\n';
  }
}

namespace {

Matrix<double> limit_columns(const Matrix<double>& m, Index limit) {
  return limit > 0 && limit < m.cols() ? Matrix<double>(m.leftCols(limit)) : m;
}

std::vector<int> limit_labels(const std::vector<int>& y, Index limit) {
  if (limit <= 0 || limit >= static_cast<Index>(y.size())) return y;
  return {y.begin(), y.begin() + limit};
}

// Even-stride subsample that keeps every class of a class-major split.
void stratified_train(const Dataset& ds, Index limit, Matrix<double>& x, std::vector<int>& y) {
  const Index n = ds.train.cols();
  if (limit <= 0 || limit >= n) {
    x = ds.train;
    y = ds.train_labels;
    return;
  }
  x.resize(ds.dim(), limit);
  y.clear();
  for (Index j = 0; j < limit; ++j) {
    const Index src = (j % ds.n_classes()) * (n / ds.n_classes()) + j / ds.n_classes();
    x.col(j) = ds.train.col(src % n);
    y.push_back(ds.train_labels[static_cast<std::size_t>(src % n)]);
  }
}

}  // namespace

std::vector<UnfoldSweepRow> unfold_sweep(const UnfoldSweepConfig& config) {
  if (config.unfoldings.empty()) throw ConfigError("unfold_sweep: no unfolding values");
  for (long u : config.unfoldings)
    if (u < 0) throw ConfigError("unfold_sweep: unfolding must be >= 0");
  const Dataset ds = generate_dataset(config.dataset);
  const LearnResult trained = learn_dictionaries(
      ModelKind::kMSD, initial_banks(ModelKind::kMSD, config.arch, ds.dim()), ds, config.learn);
  DictionaryLearner state(ModelKind::kMSD, trained.banks, config.learn);
  state.calibrate_network_betas(probe_batch(ds, config.learn.probe_size));

  Matrix<double> train_x;
  std::vector<int> train_y;
  stratified_train(ds, config.train_limit, train_x, train_y);
  const Matrix<double> test_x = limit_columns(ds.test, config.test_limit);
  const std::vector<int> test_y = limit_labels(ds.test_labels, config.test_limit);

  // Layer inputs of the unfolding-0 network on the test signals.
  const MSDCSCModel<double> base = state.to_msd_model(0, config.solver);
  std::vector<std::vector<Vector<double>>> inputs(static_cast<std::size_t>(test_x.cols()));
  for (Index j = 0; j < test_x.cols(); ++j) {
    const auto stacks = msdcsc_forward_all(base, Vector<double>(test_x.col(j)));
    auto& in = inputs[static_cast<std::size_t>(j)];
    in.push_back(test_x.col(j));
    for (std::size_t k = 0; k + 1 < stacks.size(); ++k) in.push_back(stacks[k]);
  }

  std::vector<UnfoldSweepRow> rows;
  std::vector<double> prev_obj;
  for (long u : config.unfoldings) {
    const MSDCSCModel<double> model = state.to_msd_model(u, config.solver);
    UnfoldSweepRow row;
    row.unfolding = u;
    row.solver = config.solver;

    std::vector<double> obj;
    for (const auto& in : inputs) {
      for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const auto& layer = model.layers[k];
        obj.push_back(msd_layer_objective(layer, in[k],
                                          msdcsc_layer_forward(layer, in[k], u, config.solver)));
      }
    }
    double sum = 0;
    Index strict = 0;
    for (std::size_t i = 0; i < obj.size(); ++i) {
      sum += obj[i];
      if (!prev_obj.empty() && obj[i] < prev_obj[i]) ++strict;
    }
    row.problems = static_cast<Index>(obj.size());
    row.mean_objective = obj.empty() ? 0.0 : sum / static_cast<double>(obj.size());
    row.strict_fraction =
        prev_obj.empty() || obj.empty() ? 0.0 : static_cast<double>(strict) / static_cast<double>(obj.size());
    prev_obj = std::move(obj);

    auto encode = [&model](const Matrix<double>& x) {
      const Index len = msdcsc_forward(model, Vector<double>(x.col(0))).size();
      Matrix<double> codes(len, x.cols());
      for (Index j = 0; j < x.cols(); ++j) codes.col(j) = msdcsc_forward(model, Vector<double>(x.col(j)));
      return codes;
    };
    row.accuracy = classify(encode(train_x), train_y, encode(test_x), test_y);
    rows.push_back(row);
  }
  return rows;
}

void write_unfold_csv(std::ostream& os, const std::vector<UnfoldSweepRow>& rows) {
  os << "unfolding,solver,mean_objective,accuracy\n";
  for (const auto& r : rows) {
    os << r.unfolding << ',' << solver_name(r.solver) << ',' << fmt(r.mean_objective) << ','
       << fmt(r.accuracy) << '\n';
  }
}

}  // namespace csc::harness
