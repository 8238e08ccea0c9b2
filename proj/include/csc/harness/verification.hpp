#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csc/dictionary.hpp"
#include "json.hpp"

namespace csc::harness {

/// Outcome of one seeded verifier. What max_deviation measures is check
/// specific; `tolerance` is the bound it was compared against.
struct CheckResult {
  std::string name;
  Index instances = 0;
  double max_deviation = 0;
  double tolerance = 0;
  bool pass = false;
  std::string detail;
};

nlohmann::json to_json(const CheckResult& r);

/// Two-layer model with near-orthonormal dictionaries, a sparse deepest code
/// and noise of norm exactly eps0 added to the clean signal.
struct PlantedInstance {
  std::vector<ConvDictionary<double>> dicts;
  std::vector<Vector<double>> codes;  // G_1 .. G_k with G_{i-1} = D_i G_i
  Vector<double> clean;
  Vector<double> noisy;
  double eps0 = 0;
};

PlantedInstance planted_instance(std::mt19937_64& rng, double eps0, double perturbation = 0.01);

CheckResult check_proposition1(std::uint64_t seed, int instances = 50);
CheckResult check_fig1_coherence();
CheckResult check_dilation_coherence(std::uint64_t seed, int instances = 100);
CheckResult check_lemma2_planted(std::uint64_t seed, int instances = 20);
/// Eigenvalues of [[I, A^T], [A, A A^T]] against {0 x cols(A)} u {1 + eig(A A^T)}.
CheckResult check_lemma3_literal(std::uint64_t seed, int instances = 30);
/// The same block against {0 x rows(A)} u {1 + eig(A^T A)}, plus the top eigenvalue.
CheckResult check_lemma3_rank_form(std::uint64_t seed, int instances = 30);
CheckResult check_msd_lipschitz_offset(std::uint64_t seed, int instances = 30);
CheckResult check_theorem1(std::uint64_t seed, int instances = 100);
CheckResult check_report_monotone(std::uint64_t seed, int instances = 30);

std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace csc::harness
