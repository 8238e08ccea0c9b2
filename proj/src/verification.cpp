#include "csc/harness/verification.hpp"

#include <algorithm>
#include <cmath>

#include "csc/analysis.hpp"
#include "csc/errors.hpp"
#include "csc/models.hpp"
#include "csc/pursuit.hpp"

namespace csc::harness {

namespace {

Vector<double> uniform(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector<double> v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Matrix<double> gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix<double> m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

ConvDictionary<double> random_bank(std::mt19937_64& rng, SignalShape in, Index w, Index kh,
                                   Index kw, Index dilation, Padding pad) {
  std::vector<ConvKernel<double>> ks;
  for (Index k = 0; k < w; ++k) {
    ks.push_back({kh, kw, in.channels, dilation, uniform(rng, kh * kw * in.channels, -1, 1)});
  }
  return ConvDictionary<double>(std::move(ks), in, pad);
}

// Orthonormal columns of a random square matrix, nudged and renormalized.
std::vector<Vector<double>> near_orthonormal(std::mt19937_64& rng, Index dim, double perturbation) {
  const Matrix<double> q = gaussian(rng, dim, dim).householderQr().householderQ();
  std::vector<Vector<double>> out;
  for (Index j = 0; j < dim; ++j) {
    Vector<double> v = q.col(j) + uniform(rng, dim, -perturbation, perturbation);
    out.push_back(v.normalized());
  }
  return out;
}

CheckResult finish(std::string name, Index n, double dev, double tol, std::string detail = {}) {
  return {std::move(name), n, dev, tol, dev <= tol, std::move(detail)};
}

}  // namespace

nlohmann::json to_json(const CheckResult& r) {
  nlohmann::json j = {{"name", r.name},
                      {"instances", r.instances},
                      {"max_deviation", r.max_deviation},
                      {"tolerance", r.tolerance},
                      {"pass", r.pass}};
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

PlantedInstance planted_instance(std::mt19937_64& rng, double eps0, double perturbation) {
  // Layer 1: 16 samples, 2 taps at dilation 8 -> 8 positions x 2 kernels.
  // Layer 2: 8 positions x 2 channels, 2 taps at dilation 4 -> 4 positions x 4 kernels.
  // Supports of columns at different positions are disjoint, so both
  // dictionaries are square and orthonormal before the perturbation.
  PlantedInstance inst;
  inst.eps0 = eps0;
  std::vector<ConvKernel<double>> k1, k2;
  for (auto& v : near_orthonormal(rng, 2, perturbation)) k1.push_back({1, 2, 1, 8, v});
  inst.dicts.emplace_back(std::move(k1), SignalShape::line(16, 1), Padding::kValid);
  for (auto& v : near_orthonormal(rng, 4, perturbation)) k2.push_back({1, 2, 2, 4, v});
  inst.dicts.emplace_back(std::move(k2), inst.dicts[0].code_shape(), Padding::kValid);

  const Index n2 = inst.dicts[1].cols();
  Vector<double> g2 = Vector<double>::Zero(n2);
  std::uniform_int_distribution<Index> pick(0, n2 - 1);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  for (int placed = 0; placed < 2;) {
    const Index i = pick(rng);
    if (g2[i] != 0) continue;
    g2[i] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    ++placed;
  }
  const Vector<double> g1 = inst.dicts[1].apply(g2);
  inst.codes = {g1, g2};
  inst.clean = inst.dicts[0].apply(g1);

  Vector<double> e = gaussian(rng, inst.clean.size(), 1);
  e *= eps0 / e.norm();
  inst.noisy = inst.clean + e;
  return inst;
}

CheckResult check_proposition1(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    const SignalShape in = SignalShape::line(12 + t % 5, 1 + t % 3);
    const auto bank = random_bank(rng, in, 2 + t % 3, 1, 3, 1 + t % 4, Padding::kSameZero);
    const auto layer = LayerParams<double>::network(bank, uniform(rng, bank.kernel_count(), -0.5, 0.5));
    worst = std::max(worst, proposition1_check(layer, uniform(rng, in.size(), 0.0, 2.0)));
  }
  return finish("proposition1", instances, worst, 1e-12);
}

CheckResult check_fig1_coherence() {
  Vector<double> taps(4);
  taps << 1, 2, 3, 4;
  const ConvDictionary<double> d({ConvKernel<double>{2, 2, 1, 2, taps}}, SignalShape::image(4, 4, 1),
                                 Padding::kValid);
  const double mu = mutual_coherence(d);
  return finish("fig1_coherence", 1, mu, 0.0, "2x2 kernel, dilation 2, 4x4 input");
}

CheckResult check_dilation_coherence(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  Index lower = 0;
  for (int t = 0; t < instances; ++t) {
    const Vector<double> taps = uniform(rng, 4, -1, 1);
    const SignalShape in = SignalShape::image(4, 4, 1);
    const double mu1 = mutual_coherence(ConvDictionary<double>({{2, 2, 1, 1, taps}}, in));
    const double mu2 = mutual_coherence(ConvDictionary<double>({{2, 2, 1, 2, taps}}, in));
    lower += mu2 < mu1;
  }
  // Deviation: instances where dilation failed to lower the coherence.
  const double misses = static_cast<double>(instances - lower);
  return finish("dilation_coherence", instances, misses, 0.01 * instances,
                std::to_string(lower) + " of " + std::to_string(instances) + " lowered by dilation");
}

CheckResult check_lemma2_planted(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  int done = 0, rejected = 0;
  while (done < instances) {
    const PlantedInstance inst = planted_instance(rng, 0.3);
    std::vector<double> mus;
    std::vector<Index> stripes;
    std::vector<ThresholdLayer<ConvDictionary<double>>> layers;
    for (std::size_t k = 0; k < inst.dicts.size(); ++k) {
      mus.push_back(mutual_coherence(inst.dicts[k]));
      stripes.push_back(stripe_sparsity(inst.codes[k], inst.dicts[k].stripe_layout()));
      layers.emplace_back(inst.dicts[k], 1e-6);
    }
    const auto est = layered_thresholding(layers, inst.noisy, Shrinkage::kSigned);
    try {
      for (std::size_t i = 0; i < est.size(); ++i) {
        const std::vector<double> m(mus.begin(), mus.begin() + static_cast<long>(i) + 1);
        const std::vector<Index> s(stripes.begin(), stripes.begin() + static_cast<long>(i) + 1);
        const double bound = lemma2_bound(m, s, inst.eps0);
        worst = std::max(worst, (inst.codes[i] - est[i]).squaredNorm() / bound);
      }
    } catch (const BoundInapplicableError&) {
      ++rejected;
      continue;
    }
    ++done;
  }
  return finish("lemma2_planted", instances, worst, 1.0,
                "max squared error / bound; " + std::to_string(rejected) +
                    " draws rejected by the stripe condition");
}

CheckResult check_lemma3_literal(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> rows(1, 12), cols(1, 20);
  double worst = 0;
  Index failed_rect = 0;
  for (int t = 0; t < instances; ++t) {
    const Matrix<double> a = gaussian(rng, rows(rng), cols(rng));
    const auto chk = lemma3_check(a, 1e-8);
    worst = std::max(worst, static_cast<double>(chk.max_abs_deviation));
    failed_rect += !chk.pass && a.rows() != a.cols();
  }
  return finish("lemma3_literal", instances, worst, 1e-8,
                std::to_string(failed_rect) +
                    " rectangular draws fail: the zero count equals rows(A), not cols(A)");
}

CheckResult check_lemma3_rank_form(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> rows(1, 12), cols(1, 20);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    const auto chk = lemma3_check(gaussian(rng, rows(rng), cols(rng)), 1e-8);
    worst = std::max({worst, static_cast<double>(chk.rank_deviation),
                      static_cast<double>(chk.lmax_deviation)});
  }
  return finish("lemma3_rank_form", instances, worst, 1e-8);
}

CheckResult check_msd_lipschitz_offset(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    const SignalShape in = SignalShape::line(16 + 3 * (t % 4), 1 + t % 2);
    const auto bank = random_bank(rng, in, 2 + t % 4, 1, 2 + t % 3, 1 + t % 3, Padding::kSameZero);
    const double l_msd = lipschitz_constant(MSDDictionary<double>(bank));
    const double l_conv = lipschitz_constant(bank);
    worst = std::max(worst, std::abs(l_msd - l_conv - 2.0));
  }
  return finish("msd_lipschitz_offset", instances, worst, 1e-8, "|L_MSD - L_conv - 2|");
}

CheckResult check_theorem1(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  bool ordered = true;
  for (int t = 0; t < instances; ++t) {
    const Matrix<double> d = gaussian(rng, 7, 12);
    const Vector<double> x = uniform(rng, 7, -2, 2);
    const Vector<double> g = 2.0 * uniform(rng, 12, -1, 1);  // deliberately poor code
    const double beta = 0.05;
    const LassoProblem<DenseDictionary<double>> p(DenseDictionary<double>(d), x, beta);
    const auto cmp = theorem1_compare(p, g);
    double gap = 0;
    const Vector<double> delta = d * g - x;
    for (Index j = 0; j < delta.size(); ++j) {
      if (std::abs(delta[j]) > 2 * beta) gap += -0.5 * delta[j] * delta[j] + beta * std::abs(delta[j]);
    }
    worst = std::max(worst, std::abs((cmp.f_msd - cmp.f_ml) - gap));
    ordered = ordered && cmp.report.unsuccess_count > 0 && cmp.f_msd < cmp.f_ml;
  }
  CheckResult r = finish("theorem1", instances, worst, 1e-10);
  r.pass = r.pass && ordered;
  if (!ordered) r.detail = "an instance without strict improvement";
  return r;
}

CheckResult check_report_monotone(std::uint64_t seed, int instances) {
  std::mt19937_64 rng(seed);
  Index violations = 0;
  for (int t = 0; t < instances; ++t) {
    const Vector<double> target = uniform(rng, 40, -1, 1);
    const Vector<double> xi = uniform(rng, 40, -1, 1);
    Index prev = target.size() + 1;
    for (int k = 0; k <= 40; ++k) {
      const Index c = reconstruction_report_from(target, xi, 0.025 * k).unsuccess_count;
      violations += c > prev;
      prev = c;
    }
  }
  return finish("report_monotone_in_beta", instances, static_cast<double>(violations), 0.0);
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
  return {check_proposition1(seed),         check_fig1_coherence(),
          check_dilation_coherence(seed),   check_lemma2_planted(seed),
          check_lemma3_literal(seed),       check_lemma3_rank_form(seed),
          check_msd_lipschitz_offset(seed), check_theorem1(seed),
          check_report_monotone(seed)};
}

}  // namespace csc::harness
