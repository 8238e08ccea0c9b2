#include "csc/harness/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csc/analysis.hpp"
#include "csc/errors.hpp"
#include "csc/harness/experiments.hpp"
#include "csc/harness/serialization.hpp"
#include "csc/harness/verification.hpp"

namespace csc::harness {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "4x4", "4x4x3", "100" and so on.
std::vector<Index> parse_dims(const std::string& s, const std::string& flag) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": expected positive integers separated by 'x', got '" + s + "'");
    }
  }
  if (out.empty() || out.size() > 3) throw ConfigError(flag + ": expected 1 to 3 dimensions");
  return out;
}

// Writes to `path` when given, otherwise to `out`.
template <typename F>
void emit(const std::string& path, std::ostream& out, F&& write) {
  if (path.empty()) {
    write(out);
    return;
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open output file '" + path + "'");
  write(f);
}

template <typename Config>
void apply_seed(Config& c, std::optional<std::uint64_t> seed) {
  if (!seed) return;
  c.dataset.seed = c.arch.seed = c.learn.seed = *seed;
}

int run_verify(std::uint64_t seed, std::ostream& out) {
  const auto checks = run_all_checks(seed);
  nlohmann::json j;
  j["checks"] = nlohmann::json::array();
  bool ok = true;
  for (const auto& c : checks) {
    j["checks"].push_back(to_json(c));
    ok = ok && c.pass;
  }
  j["all_pass"] = ok;
  j["seed"] = seed;
  out << j.dump(2) << '\n';
  return ok ? 0 : 1;
}

int run_coherence(const std::string& kernel_size, Index dilation, const std::string& input_shape,
                  Index kernels, const std::string& padding, std::uint64_t seed, std::ostream& out) {
  const auto in_dims = parse_dims(input_shape, "--input-shape");
  const auto k_dims = parse_dims(kernel_size, "--kernel-size");
  SignalShape in;
  if (in_dims.size() == 1) {
    in = SignalShape::line(in_dims[0], 1);
  } else {
    in = SignalShape::image(in_dims[0], in_dims[1], in_dims.size() == 3 ? in_dims[2] : 1);
  }
  Index kh = 1, kw = k_dims[0];
  if (k_dims.size() == 2) {
    kh = k_dims[0];
    kw = k_dims[1];
  } else if (k_dims.size() == 1 && !in.one_d) {
    kh = kw;
  } else if (k_dims.size() != 1) {
    throw ConfigError("--kernel-size: expected 'k' or 'khxkw'");
  }
  if (padding != "valid" && padding != "same") throw ConfigError("--padding must be valid or same");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ConvKernel<double>> ks;
  for (Index k = 0; k < kernels; ++k) {
    Vector<double> taps(kh * kw * in.channels);
    for (Index t = 0; t < taps.size(); ++t) taps[t] = u(rng);
    ks.push_back({kh, kw, in.channels, dilation, taps});
  }
  const ConvDictionary<double> d(std::move(ks), in,
                                 padding == "valid" ? Padding::kValid : Padding::kSameZero);
  const double mu = mutual_coherence(d);
  out << "mu,lemma1_threshold\n" << fmt(mu) << ',' << fmt(lemma1_threshold_from_mu(mu)) << '\n';
  return 0;
}

int run_pursue(const std::string& config_path, const std::string& out_path, std::ostream& out) {
  const PursueConfig c = pursue_config_from_json(read_json_file(config_path));
  auto solve = [&](const auto& dict) {
    using Dict = std::decay_t<decltype(dict)>;
    const LassoProblem<Dict> p(dict, c.signal, c.beta);
    const Vector<double> zero = Vector<double>::Zero(dict.cols());
    return c.solver == Solver::kFista ? fista(p, c.pursuit, zero) : ista(p, c.pursuit, zero);
  };
  const PursuitResult<double> res =
      c.msd ? solve(MSDDictionary<double>(c.dictionary)) : solve(c.dictionary);
  emit(out_path, out, [&](std::ostream& os) { write_trace_csv(os, res); });
  return 0;
}

int run_fig4(const std::string& config_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed, std::ostream& out) {
  Fig4Config c = config_path.empty() ? Fig4Config{} : fig4_config_from_json(read_json_file(config_path));
  apply_seed(c, seed);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
  const auto records = fig4_experiment(c);
  const std::string path = (std::filesystem::path(out_dir) / "fig4.csv").string();
  emit(path, out, [&](std::ostream& os) { write_fig4_csv(os, records); });
  out << "wrote " << path << " (" << records.size() << " rows)\n";
  return 0;
}

int run_unfold(const std::string& config_path, const std::vector<long>& unfoldings,
               const std::string& solver, const std::string& out_path,
               std::optional<std::uint64_t> seed, std::ostream& out) {
  UnfoldSweepConfig c =
      config_path.empty() ? UnfoldSweepConfig{} : unfold_config_from_json(read_json_file(config_path));
  apply_seed(c, seed);
  if (!unfoldings.empty()) c.unfoldings = unfoldings;
  if (!solver.empty()) c.solver = solver_from_string(solver);
  for (long u : c.unfoldings)
    if (u < 0) throw ConfigError("--unfolding values must be >= 0");
  const auto rows = unfold_sweep(c);
  emit(out_path, out, [&](std::ostream& os) { write_unfold_csv(os, rows); });
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convolutional sparse coding workbench"};
  app.name(argc > 0 ? std::filesystem::path(argv[0]).filename().string() : "csc_cli");
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run every analysis verifier and print a JSON summary");
  std::uint64_t verify_seed = 0;
  verify->add_option("--seed", verify_seed, "Seed for the random instances");

  auto* coherence = app.add_subcommand("coherence", "Mutual coherence of a random convolutional dictionary");
  std::string kernel_size, input_shape, padding = "valid";
  Index dilation = 1, kernels = 1;
  std::uint64_t coh_seed = 0;
  coherence->add_option("--kernel-size", kernel_size, "k or khxkw")->required();
  coherence->add_option("--dilation", dilation, "Dilation scale")->check(CLI::PositiveNumber);
  coherence->add_option("--input-shape", input_shape, "length, HxW or HxWxC")->required();
  coherence->add_option("--kernels", kernels, "Number of kernels")->check(CLI::PositiveNumber);
  coherence->add_option("--padding", padding, "valid or same")->check(CLI::IsMember({"valid", "same"}));
  coherence->add_option("--seed", coh_seed, "Seed for the kernel taps");

  auto* pursue = app.add_subcommand("pursue", "Solve one Lasso instance and print its trace CSV");
  std::string pursue_config, pursue_out;
  pursue->add_option("--config", pursue_config, "JSON config")->required();
  pursue->add_option("--out", pursue_out, "Output CSV (default: stdout)");

  auto* fig4 = app.add_subcommand("fig4", "Unsuccess counts of ML and MSD learners over training");
  std::string fig4_config, fig4_out;
  std::optional<std::uint64_t> fig4_seed;
  fig4->add_option("--config", fig4_config, "JSON config (default settings when omitted)");
  fig4->add_option("--out", fig4_out, "Output directory")->required();
  fig4->add_option("--seed", fig4_seed, "Overrides every seed in the config");

  auto* unfold = app.add_subcommand("unfold-sweep", "MSD pursuit and classification across unfoldings");
  std::string unfold_config, unfold_out, unfold_solver;
  std::vector<long> unfoldings;
  std::optional<std::uint64_t> unfold_seed;
  unfold->add_option("--unfolding", unfoldings, "Comma separated unfolding values")->delimiter(',');
  unfold->add_option("--solver", unfold_solver, "ista or fista")->check(CLI::IsMember({"ista", "fista"}));
  unfold->add_option("--config", unfold_config, "JSON config");
  unfold->add_option("--out", unfold_out, "Output CSV (default: stdout)");
  unfold->add_option("--seed", unfold_seed, "Overrides every seed in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return run_verify(verify_seed, out);
    if (coherence->parsed()) {
      return run_coherence(kernel_size, dilation, input_shape, kernels, padding, coh_seed, out);
    }
    if (pursue->parsed()) return run_pursue(pursue_config, pursue_out, out);
    if (fig4->parsed()) return run_fig4(fig4_config, fig4_out, fig4_seed, out);
    if (unfold->parsed()) {
      return run_unfold(unfold_config, unfoldings, unfold_solver, unfold_out, unfold_seed, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace csc::harness
