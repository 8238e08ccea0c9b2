#include "csc/harness/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <type_traits>

#include "csc/errors.hpp"

namespace csc::harness {

namespace {

// Typed, key-checked view over one JSON object.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key, mark(key));
  }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(ctx_ + ": missing required key '" + key + "'");
    return convert<T>(key, mark(key));
  }

  const Json& raw(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(ctx_ + ": missing required key '" + key + "'");
    return mark(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(ctx_ + ": unknown key '" + key + "'");
    }
  }

  const std::string& context() const { return ctx_; }

 private:
  const Json& mark(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T convert(const std::string& key, const Json& v) const {
    const std::string where = ctx_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) throw ConfigError(where + ": expected a nonnegative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
      return v.get<std::string>();
    } else {
      static_assert(std::is_same_v<T, std::vector<Index>>);
      if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
      std::vector<Index> out;
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(where + ": expected an array of integers");
        out.push_back(e.get<Index>());
      }
      return out;
    }
  }

  const Json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

Vector<double> vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector<double> v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(where + ": expected an array of numbers");
    v[i++] = e.get<double>();
  }
  return v;
}

Json vector_to_json(const Vector<double>& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Padding padding_from_string(const std::string& s) {
  if (s == "valid") return Padding::kValid;
  if (s == "same") return Padding::kSameZero;
  throw ConfigError("padding must be 'valid' or 'same', got '" + s + "'");
}

std::string padding_name(Padding p) { return p == Padding::kValid ? "valid" : "same"; }

Shrinkage shrinkage_from_string(const std::string& s) {
  if (s == "signed") return Shrinkage::kSigned;
  if (s == "nonneg") return Shrinkage::kNonneg;
  throw ConfigError("shrinkage must be 'signed' or 'nonneg', got '" + s + "'");
}

template <typename F>
auto rethrow_as_config(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Solver solver_from_string(const std::string& s) {
  if (s == "ista") return Solver::kIsta;
  if (s == "fista") return Solver::kFista;
  throw ConfigError("solver must be 'ista' or 'fista', got '" + s + "'");
}

ResVariant variant_from_string(const std::string& s) {
  if (s == "full") return ResVariant::kFull;
  if (s == "resnet") return ResVariant::kResNet;
  if (s == "simplified") return ResVariant::kSimplified;
  if (s == "plain") return ResVariant::kPlain;
  throw ConfigError("variant must be one of full, resnet, simplified, plain; got '" + s + "'");
}

std::string variant_name(ResVariant v) {
  switch (v) {
    case ResVariant::kFull: return "full";
    case ResVariant::kResNet: return "resnet";
    case ResVariant::kSimplified: return "simplified";
    case ResVariant::kPlain: return "plain";
  }
  return "plain";
}

SignalShape shape_from_json(const Json& j) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3)) {
    throw ConfigError("input_shape must be [length, channels] or [height, width, channels]");
  }
  std::vector<Index> d;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<long long>() < 1) {
      throw ConfigError("input_shape entries must be positive integers");
    }
    d.push_back(e.get<Index>());
  }
  return d.size() == 2 ? SignalShape::line(d[0], d[1]) : SignalShape::image(d[0], d[1], d[2]);
}

Json shape_to_json(const SignalShape& s) {
  if (s.one_d) return Json::array({s.width, s.channels});
  return Json::array({s.height, s.width, s.channels});
}

ConvDictionary<double> dictionary_from_json(const Json& j) {
  ObjectReader r(j, "dictionary");
  const SignalShape in = shape_from_json(r.raw("input_shape"));
  Index kh = 1, kw = 1;
  const Json& ks = r.raw("kernel_size");
  if (ks.is_number_integer()) {
    kw = ks.get<Index>();
    if (!in.one_d) kh = kw;
  } else if (ks.is_array() && ks.size() == 2 && ks[0].is_number_integer() &&
             ks[1].is_number_integer()) {
    kh = ks[0].get<Index>();
    kw = ks[1].get<Index>();
  } else {
    throw ConfigError("dictionary.kernel_size must be an integer or [kh, kw]");
  }
  const Index dilation = r.get<Index>("dilation", 1);
  const Padding pad = padding_from_string(r.get<std::string>("padding", "valid"));
  const Json& kj = r.raw("kernels");
  if (!kj.is_array() || kj.empty()) throw ConfigError("dictionary.kernels must be a nonempty array");
  r.finish();

  std::vector<ConvKernel<double>> kernels;
  for (const auto& k : kj) {
    kernels.push_back({kh, kw, in.channels, dilation, vector_from_json(k, "dictionary.kernels")});
  }
  return rethrow_as_config([&] { return ConvDictionary<double>(std::move(kernels), in, pad); });
}

Json dictionary_to_json(const ConvDictionary<double>& d) {
  const auto& k0 = d.kernels().front();
  Json kernels = Json::array();
  for (const auto& k : d.kernels()) kernels.push_back(vector_to_json(k.taps));
  Json ks = d.input_shape().one_d ? Json(k0.width) : Json::array({k0.height, k0.width});
  return {{"input_shape", shape_to_json(d.input_shape())},
          {"kernel_size", ks},
          {"dilation", k0.dilation},
          {"padding", padding_name(d.padding())},
          {"kernels", kernels}};
}

SyntheticDatasetSpec dataset_spec_from_json(const Json& j) {
  ObjectReader r(j, "dataset");
  SyntheticDatasetSpec s;
  s.n_classes = r.get("n_classes", s.n_classes);
  s.dim = r.get("dim", s.dim);
  s.train_per_class = r.get("train_per_class", s.train_per_class);
  s.test_total = r.get("test_total", s.test_total);
  s.noise_sigma = r.get("noise_sigma", s.noise_sigma);
  s.center_scale = r.get("center_scale", s.center_scale);
  s.seed = r.get("seed", s.seed);
  r.finish();
  rethrow_as_config([&] { s.validate(); return 0; });
  return s;
}

Json to_json(const SyntheticDatasetSpec& s) {
  return {{"n_classes", s.n_classes},   {"dim", s.dim},
          {"train_per_class", s.train_per_class}, {"test_total", s.test_total},
          {"noise_sigma", s.noise_sigma}, {"center_scale", s.center_scale},
          {"seed", s.seed}};
}

ArchitectureConfig architecture_from_json(const Json& j) {
  ObjectReader r(j, "arch");
  ArchitectureConfig a;
  a.depth = r.get("depth", a.depth);
  a.width = r.get("width", a.width);
  a.kernel_size = r.get("kernel_size", a.kernel_size);
  if (r.has("dilations")) {
    a.dilations = r.get("dilations", a.dilations);
  } else {
    // Cycle 1, 2, 3 over however many layers were asked for.
    a.dilations.clear();
    for (Index k = 0; k < a.depth; ++k) a.dilations.push_back(1 + k % 3);
  }
  a.padding = padding_from_string(r.get<std::string>("padding", padding_name(a.padding)));
  a.unfolding = r.get("unfolding", a.unfolding);
  a.solver = solver_from_string(r.get<std::string>("solver", solver_name(a.solver)));
  a.variant = variant_from_string(r.get<std::string>("variant", variant_name(a.variant)));
  a.seed = r.get("seed", a.seed);
  r.finish();
  rethrow_as_config([&] { a.validate(); return 0; });
  return a;
}

Json to_json(const ArchitectureConfig& a) {
  return {{"depth", a.depth},
          {"width", a.width},
          {"kernel_size", a.kernel_size},
          {"dilations", a.dilations},
          {"padding", padding_name(a.padding)},
          {"unfolding", a.unfolding},
          {"solver", solver_name(a.solver)},
          {"variant", variant_name(a.variant)},
          {"seed", a.seed}};
}

PursuitConfig pursuit_config_from_json(const Json& j, PursuitConfig base) {
  ObjectReader r(j, "pursuit");
  base.iterations = r.get("iterations", base.iterations);
  base.tol = r.get("tol", base.tol);
  if (r.has("shrinkage")) base.shrinkage = shrinkage_from_string(r.get<std::string>("shrinkage", ""));
  r.finish();
  if (base.iterations < 1) throw ConfigError("pursuit.iterations must be >= 1");
  if (!(base.tol > 0)) throw ConfigError("pursuit.tol must be > 0");
  return base;
}

Json to_json(const PursuitConfig& p) {
  return {{"iterations", p.iterations},
          {"tol", p.tol},
          {"shrinkage", p.shrinkage == Shrinkage::kSigned ? "signed" : "nonneg"}};
}

LearnConfig learn_config_from_json(const Json& j) {
  ObjectReader r(j, "learn");
  LearnConfig c;
  c.outer_iterations = r.get("outer_iterations", c.outer_iterations);
  if (r.has("pursuit")) c.pursuit = pursuit_config_from_json(r.raw("pursuit"), c.pursuit);
  c.solver = solver_from_string(r.get<std::string>("solver", solver_name(c.solver)));
  c.dict_step = r.get("dict_step", c.dict_step);
  if (r.has("beta_schedule")) {
    ObjectReader b(r.raw("beta_schedule"), "learn.beta_schedule");
    if (b.has("fixed") == b.has("fraction")) {
      throw ConfigError("learn.beta_schedule needs exactly one of 'fixed' or 'fraction'");
    }
    c.beta_schedule = b.has("fixed") ? BetaSchedule::fixed(b.require<double>("fixed"))
                                     : BetaSchedule::fraction(b.require<double>("fraction"));
    b.finish();
  }
  c.batch_size = r.get("batch_size", c.batch_size);
  c.probe_size = r.get("probe_size", c.probe_size);
  c.seed = r.get("seed", c.seed);
  r.finish();
  rethrow_as_config([&] { c.validate(); return 0; });
  return c;
}

Json to_json(const LearnConfig& c) {
  const bool fixed = c.beta_schedule.kind == BetaSchedule::Kind::kFixed;
  return {{"outer_iterations", c.outer_iterations},
          {"pursuit", to_json(c.pursuit)},
          {"solver", solver_name(c.solver)},
          {"dict_step", c.dict_step},
          {"beta_schedule", {{fixed ? "fixed" : "fraction", c.beta_schedule.value}}},
          {"batch_size", c.batch_size},
          {"probe_size", c.probe_size},
          {"seed", c.seed}};
}

namespace {

template <typename Config>
void read_common(ObjectReader& r, Config& c) {
  if (r.has("dataset")) c.dataset = dataset_spec_from_json(r.raw("dataset"));
  if (r.has("arch")) c.arch = architecture_from_json(r.raw("arch"));
  if (r.has("learn")) c.learn = learn_config_from_json(r.raw("learn"));
}

}  // namespace

Fig4Config fig4_config_from_json(const Json& j) {
  ObjectReader r(j, "fig4");
  Fig4Config c;
  read_common(r, c);
  r.finish();
  return c;
}

UnfoldSweepConfig unfold_config_from_json(const Json& j) {
  ObjectReader r(j, "unfold_sweep");
  UnfoldSweepConfig c;
  read_common(r, c);
  if (r.has("unfoldings")) {
    c.unfoldings.clear();
    for (Index u : r.get<std::vector<Index>>("unfoldings", {})) c.unfoldings.push_back(u);
  }
  c.solver = solver_from_string(r.get<std::string>("solver", solver_name(c.solver)));
  c.train_limit = r.get("train_limit", c.train_limit);
  c.test_limit = r.get("test_limit", c.test_limit);
  r.finish();
  if (c.unfoldings.empty()) throw ConfigError("unfold_sweep.unfoldings must not be empty");
  for (long u : c.unfoldings)
    if (u < 0) throw ConfigError("unfold_sweep.unfoldings must be >= 0");
  return c;
}

PursueConfig pursue_config_from_json(const Json& j) {
  ObjectReader r(j, "pursue");
  ConvDictionary<double> dict = dictionary_from_json(r.raw("dictionary"));
  Vector<double> signal = vector_from_json(r.raw("signal"), "pursue.signal");
  PursueConfig c(std::move(dict), std::move(signal));
  c.beta = r.get("beta", c.beta);
  c.solver = solver_from_string(r.get<std::string>("solver", solver_name(c.solver)));
  c.pursuit.iterations = r.get("iterations", 500L);
  c.pursuit.tol = r.get("tol", c.pursuit.tol);
  c.pursuit.shrinkage = r.get("nonneg", false) ? Shrinkage::kNonneg : Shrinkage::kSigned;
  c.msd = r.get("msd", false);
  r.finish();
  if (c.signal.size() != c.dictionary.rows()) {
    throw ConfigError("pursue.signal has length " + std::to_string(c.signal.size()) +
                      ", dictionary expects " + std::to_string(c.dictionary.rows()));
  }
  if (!(c.beta >= 0)) throw ConfigError("pursue.beta must be >= 0");
  if (c.pursuit.iterations < 1) throw ConfigError("pursue.iterations must be >= 1");
  if (!(c.pursuit.tol > 0)) throw ConfigError("pursue.tol must be > 0");
  if (c.msd) rethrow_as_config([&] { MSDDictionary<double>{c.dictionary}; return 0; });
  return c;
}

Json learned_to_json(ModelKind kind, const std::vector<ConvDictionary<double>>& banks,
                     const std::vector<double>& betas) {
  Json layers = Json::array();
  for (std::size_t k = 0; k < banks.size(); ++k) {
    layers.push_back({{"dictionary", dictionary_to_json(banks[k])},
                      {"beta", k < betas.size() ? betas[k] : 0.0}});
  }
  return {{"kind", kind == ModelKind::kML ? "ml" : "msd"}, {"layers", layers}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_matrix_csv(std::ostream& os, const Matrix<double>& m) {
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace csc::harness
