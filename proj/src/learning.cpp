#include "csc/harness/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "csc/analysis.hpp"
#include "csc/errors.hpp"

namespace csc::harness {

void BetaSchedule::validate() const {
  if (kind == Kind::kFixed) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw ConfigError("fixed beta must be >= 0");
  } else if (!(value > 0.0 && value < 1.0)) {
    throw ConfigError("beta fraction rho must lie in (0, 1)");
  }
}

void ArchitectureConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (width < 1) throw ConfigError("width must be >= 1");
  if (kernel_size < 1) throw ConfigError("kernel_size must be >= 1");
  if (static_cast<Index>(dilations.size()) != depth) {
    throw ConfigError("dilations must list one entry per layer");
  }
  for (Index s : dilations)
    if (s < 1) throw ConfigError("dilations must be >= 1");
  if (unfolding < 0) throw ConfigError("unfolding must be >= 0");
}

void LearnConfig::validate() const {
  if (outer_iterations < 0) throw ConfigError("outer_iterations must be >= 0");
  if (pursuit.iterations < 1) throw ConfigError("pursuit iterations must be >= 1");
  if (!(pursuit.tol > 0)) throw ConfigError("pursuit tol must be > 0");
  if (!(dict_step >= 0.0) || !std::isfinite(dict_step)) throw ConfigError("dict_step must be >= 0");
  if (batch_size < 1 || probe_size < 1) throw ConfigError("batch and probe sizes must be >= 1");
  beta_schedule.validate();
}

std::vector<ConvDictionary<double>> initial_banks(ModelKind kind, const ArchitectureConfig& arch,
                                                  Index dim) {
  arch.validate();
  std::mt19937_64 rng(arch.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const Padding pad = kind == ModelKind::kMSD ? Padding::kSameZero : arch.padding;

  std::vector<ConvDictionary<double>> banks;
  SignalShape in = SignalShape::line(dim, 1);
  for (Index k = 0; k < arch.depth; ++k) {
    std::vector<ConvKernel<double>> kernels;
    for (Index j = 0; j < arch.width; ++j) {
      Vector<double> taps(arch.kernel_size * in.channels);
      for (Index t = 0; t < taps.size(); ++t) taps[t] = g(rng);
      taps.normalize();
      kernels.push_back({1, arch.kernel_size, in.channels, arch.dilations[k], taps});
    }
    banks.emplace_back(std::move(kernels), in, pad);
    in = kind == ModelKind::kMSD ? in.with_channels(in.channels + arch.width)
                                 : banks.back().code_shape();
  }
  return banks;
}

namespace {

template <LinearDictionary Dict>
Matrix<double> solve_columns(const Dict& dict, const Matrix<double>& x, double beta,
                             double lipschitz, const LearnConfig& cfg) {
  PursuitConfig pc = cfg.pursuit;
  pc.lipschitz_override = lipschitz;
  Matrix<double> codes(dict.cols(), x.cols());
  const Vector<double> zero = Vector<double>::Zero(dict.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const LassoProblem<Dict> p(dict, x.col(j), beta);
    codes.col(j) = cfg.solver == Solver::kFista ? fista(p, pc, zero).code : ista(p, pc, zero).code;
  }
  return codes;
}

template <LinearDictionary Dict>
double max_correlation(const Dict& dict, const Matrix<double>& x) {
  double m = 0;
  for (Index j = 0; j < x.cols(); ++j) {
    m = std::max(m, dict.apply_adjoint(Vector<double>(x.col(j))).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

DictionaryLearner::DictionaryLearner(ModelKind kind, std::vector<ConvDictionary<double>> banks,
                                     LearnConfig config)
    : kind_(kind), banks_(std::move(banks)), config_(std::move(config)) {
  config_.validate();
  if (banks_.empty()) throw ConfigError("learner needs at least one layer");
  for (std::size_t k = 1; k < banks_.size(); ++k) {
    const Index expected = kind_ == ModelKind::kMSD
                               ? MSDDictionary<double>(banks_[k - 1]).output_shape().size()
                               : banks_[k - 1].cols();
    if (banks_[k].rows() != expected) {
      throw ShapeError("layer " + std::to_string(k + 1) + " input does not match layer " +
                       std::to_string(k) + " output");
    }
  }
  if (kind_ == ModelKind::kMSD) {
    for (const auto& b : banks_) MSDDictionary<double>{b};  // padding check
  }
  betas_.assign(banks_.size(), config_.beta_schedule.kind == BetaSchedule::Kind::kFixed
                                   ? config_.beta_schedule.value
                                   : 0.0);
}

double DictionaryLearner::layer_lipschitz(std::size_t k) const {
  return kind_ == ModelKind::kMSD ? lipschitz_constant(MSDDictionary<double>(banks_[k]))
                                  : lipschitz_constant(banks_[k]);
}

Vector<double> DictionaryLearner::layer_apply(std::size_t k, const Vector<double>& code) const {
  if (kind_ == ModelKind::kMSD) return MSDDictionary<double>(banks_[k]).apply(code);
  return banks_[k].apply(code);
}

Vector<double> DictionaryLearner::reconstruct_input(const Vector<double>& deepest) const {
  Vector<double> v = layer_apply(banks_.size() - 1, deepest);
  for (std::size_t k = banks_.size() - 1; k-- > 0;) {
    if (kind_ == ModelKind::kMSD) v = MSDDictionary<double>(banks_[k]).from_feature_stack(v);
    v = layer_apply(k, v);
  }
  return v;
}

Matrix<double> DictionaryLearner::next_input(std::size_t k, const Matrix<double>& codes) const {
  if (kind_ == ModelKind::kML) return codes;
  const MSDDictionary<double> dict(banks_[k]);
  Matrix<double> out(dict.output_shape().size(), codes.cols());
  for (Index j = 0; j < codes.cols(); ++j) out.col(j) = dict.to_feature_stack(codes.col(j));
  return out;
}

StackCodes DictionaryLearner::pursue(const Matrix<double>& x, std::vector<double>& betas,
                                     std::optional<double> rho) const {
  if (betas.size() != banks_.size()) throw ShapeError("pursue: one beta per layer required");
  StackCodes out;
  Matrix<double> input = x;
  for (std::size_t k = 0; k < banks_.size(); ++k) {
    if (input.rows() != banks_[k].rows()) throw ShapeError("pursue: layer input length mismatch");
    const double lip = layer_lipschitz(k);
    Matrix<double> codes;
    if (kind_ == ModelKind::kMSD) {
      const MSDDictionary<double> dict(banks_[k]);
      if (rho) betas[k] = *rho * max_correlation(dict, input);
      codes = solve_columns(dict, input, betas[k], lip, config_);
    } else {
      if (rho) betas[k] = *rho * max_correlation(banks_[k], input);
      codes = solve_columns(banks_[k], input, betas[k], lip, config_);
    }
    Matrix<double> next = next_input(k, codes);
    out.inputs.push_back(std::move(input));
    out.codes.push_back(std::move(codes));
    input = std::move(next);
  }
  return out;
}

void DictionaryLearner::update(const Matrix<double>& batch) {
  std::vector<double> betas = betas_;
  const StackCodes sc = pursue(batch, betas);
  if (config_.dict_step == 0.0) return;

  const double step = config_.dict_step / static_cast<double>(batch.cols());
  for (std::size_t k = 0; k < banks_.size(); ++k) {
    const ConvDictionary<double>& bank = banks_[k];
    const Index id = kind_ == ModelKind::kMSD ? bank.rows() : 0;
    std::vector<Vector<double>> acc(static_cast<std::size_t>(bank.kernel_count()),
                                    Vector<double>::Zero(bank.kernels().front().tap_count()));
    for (Index j = 0; j < batch.cols(); ++j) {
      const Vector<double> conv_code = sc.codes[k].col(j).tail(bank.cols());
      Vector<double> residual = sc.inputs[k].col(j) - bank.apply(conv_code);
      if (id > 0) residual -= sc.codes[k].col(j).head(id);
      const auto g = bank.outer_kernel_grad(residual, conv_code);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    std::vector<Vector<double>> taps;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      Vector<double> t = bank.kernels()[i].taps + step * acc[i];
      const double norm = t.norm();
      if (!std::isfinite(norm)) {
        throw DivergenceError("learn: nonfinite kernel update at layer " + std::to_string(k + 1),
                              {});
      }
      if (norm == 0.0) {
        throw DegenerateDictionaryError("learn: kernel " + std::to_string(i) + " of layer " +
                                        std::to_string(k + 1) + " collapsed to zero");
      }
      taps.push_back(t / norm);
    }
    banks_[k] = bank.with_taps(taps);
  }
}

void DictionaryLearner::initialize_betas(const Matrix<double>& probe) {
  if (config_.beta_schedule.kind == BetaSchedule::Kind::kFixed) {
    betas_.assign(banks_.size(), config_.beta_schedule.value);
    return;
  }
  pursue(probe, betas_, config_.beta_schedule.value);
}

void DictionaryLearner::set_betas(std::vector<double> betas) {
  if (betas.size() != banks_.size()) throw ShapeError("set_betas: one beta per layer required");
  for (double b : betas)
    if (!(b >= 0.0)) throw InvalidThresholdError("set_betas: beta must be >= 0");
  betas_ = std::move(betas);
}

void DictionaryLearner::calibrate_network_betas(const Matrix<double>& probe) {
  if (kind_ != ModelKind::kMSD) throw ConfigError("calibrate_network_betas: learner is not MSD");
  if (config_.beta_schedule.kind == BetaSchedule::Kind::kFixed) {
    betas_.assign(banks_.size(), config_.beta_schedule.value);
    return;
  }
  Matrix<double> input = probe;
  for (std::size_t k = 0; k < banks_.size(); ++k) {
    betas_[k] = config_.beta_schedule.value * max_correlation(MSDDictionary<double>(banks_[k]), input);
    const auto layer = LayerParams<double>::pursuit(banks_[k], betas_[k], layer_lipschitz(k));
    Matrix<double> next(MSDDictionary<double>(banks_[k]).output_shape().size(), input.cols());
    for (Index j = 0; j < input.cols(); ++j) {
      next.col(j) = msdcsc_layer_forward(layer, Vector<double>(input.col(j)), 0, Solver::kIsta);
    }
    input = std::move(next);
  }
}

LearnRecord DictionaryLearner::evaluate(const Matrix<double>& probe,
                                        const std::optional<std::vector<double>>& beta_override) {
  ++iteration_;
  StackCodes sc;
  if (beta_override) {
    set_betas(*beta_override);
    sc = pursue(probe, betas_);
  } else if (config_.beta_schedule.kind == BetaSchedule::Kind::kTraceMaxFraction) {
    sc = pursue(probe, betas_, config_.beta_schedule.value);
  } else {
    sc = pursue(probe, betas_);
  }

  LearnRecord rec;
  rec.iteration = iteration_;
  rec.betas = betas_;
  const double beta = betas_.front();
  double total = 0;
  for (Index j = 0; j < probe.cols(); ++j) {
    const Vector<double> x = probe.col(j);
    const Vector<double> code = sc.codes.front().col(j);
    const Vector<double> xi = layer_apply(0, code);
    rec.unsuccess_count += reconstruction_report_from(x, xi, beta).unsuccess_count;
    rec.unsuccess_count_deep +=
        reconstruction_report_from(x, reconstruct_input(sc.codes.back().col(j)), beta).unsuccess_count;
    total += 0.5 * (x - xi).squaredNorm() + beta * code.cwiseAbs().sum();
  }
  rec.objective = total / static_cast<double>(probe.cols());
  if (!std::isfinite(rec.objective)) {
    throw DivergenceError("learn: nonfinite probe objective at iteration " +
                              std::to_string(iteration_),
                          {});
  }
  return rec;
}

MSDCSCModel<double> DictionaryLearner::to_msd_model(long unfolding, Solver solver) const {
  if (kind_ != ModelKind::kMSD) throw ConfigError("to_msd_model: learner is not MSD");
  MSDCSCModel<double> m;
  m.unfolding = unfolding;
  m.solver = solver;
  for (std::size_t k = 0; k < banks_.size(); ++k) {
    m.layers.push_back(LayerParams<double>::pursuit(banks_[k], betas_[k], layer_lipschitz(k)));
  }
  return m;
}

MLCSCModel<double> DictionaryLearner::to_ml_model() const {
  if (kind_ != ModelKind::kML) throw ConfigError("to_ml_model: learner is not ML");
  MLCSCModel<double> m;
  for (std::size_t k = 0; k < banks_.size(); ++k) {
    m.layers.push_back(LayerParams<double>::pursuit(banks_[k], betas_[k], layer_lipschitz(k)));
  }
  return m;
}

std::vector<Index> draw_batch(std::uint64_t seed, long iteration, Index n_train, Index batch_size) {
  if (n_train < 1) throw ShapeError("draw_batch: empty training set");
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(iteration + 1)));
  std::uniform_int_distribution<Index> pick(0, n_train - 1);
  std::vector<Index> idx(static_cast<std::size_t>(batch_size));
  for (Index& i : idx) i = pick(rng);
  return idx;
}

Matrix<double> probe_batch(const Dataset& ds, Index probe_size) {
  const Index n = std::min<Index>(probe_size, ds.test.cols());
  return ds.test.leftCols(n);
}

LearnResult learn_dictionaries(ModelKind kind, std::vector<ConvDictionary<double>> banks,
                               const Dataset& ds, const LearnConfig& config) {
  DictionaryLearner learner(kind, std::move(banks), config);
  const Matrix<double> probe = probe_batch(ds, config.probe_size);
  learner.initialize_betas(probe);

  LearnResult out;
  for (long it = 0; it < config.outer_iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const auto idx = draw_batch(config.seed, it, ds.train.cols(), config.batch_size);
    Matrix<double> batch(ds.dim(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) batch.col(static_cast<Index>(j)) = ds.train.col(idx[j]);
    learner.update(batch);
    LearnRecord rec = learner.evaluate(probe);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                      .count();
    out.records.push_back(std::move(rec));
  }
  out.banks = learner.banks();
  out.betas = learner.betas();
  return out;
}

}  // namespace csc::harness
