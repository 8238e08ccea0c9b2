#include <cmath>
#include <random>
#include <sstream>

#include "csc/pursuit.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace csc;
using namespace csc::testing;

namespace {

using Dense = DenseDictionary<double>;

PursuitConfig iters(long n, Shrinkage op = Shrinkage::kSigned) {
  PursuitConfig c;
  c.iterations = n;
  c.tol = 1e-300;
  c.shrinkage = op;
  return c;
}

}  // namespace

TEST_CASE("lipschitz_constant") {
  CHECK(std::abs(lipschitz_constant(Dense(Mat::Identity(4, 4))) - 2.0) < 1e-12);

  std::mt19937_64 rng(5);
  const Mat d = random_matrix(rng, 6, 9);
  const double base = lipschitz_constant(Dense(d));
  CHECK(std::abs(lipschitz_constant(Dense(3.0 * d)) - 9.0 * base) < 1e-8 * 9.0 * base);

  const auto conv = random_conv(rng, SignalShape::line(10, 1), 2, 1, 3, 2, Padding::kSameZero);
  const double l_conv = lipschitz_constant(conv);
  const double l_msd = lipschitz_constant(MSDDictionary<double>(conv));
  CHECK(std::abs(l_msd - (l_conv + 2.0)) < 1e-8);

  CHECK_THROWS_AS(lipschitz_constant(Dense(Mat::Zero(3, 3))), DegenerateDictionaryError);
}

TEST_CASE("lasso_objective") {
  std::mt19937_64 rng(7);
  const Vec x = random_vector(rng, 5);
  const LassoProblem<Dense> p(Dense(Mat::Identity(5, 5)), x, 0.3);
  CHECK(lasso_objective(p, Vec::Zero(5)) == doctest::Approx(0.5 * x.squaredNorm()));
  const LassoProblem<Dense> p0(Dense(Mat::Identity(5, 5)), x, 0.0);
  CHECK(lasso_objective(p0, x) == 0.0);

  const auto conv = random_conv(rng, SignalShape::line(9, 2), 3, 1, 2, 2, Padding::kValid);
  const Mat m = brute_force_matrix(conv);
  const Vec sig = random_vector(rng, conv.rows());
  const Vec beta = random_vector(rng, conv.cols(), 0.0, 1.0);
  const Vec code = random_vector(rng, conv.cols());
  const LassoProblem<ConvDictionary<double>> pc(conv, sig, beta);
  double oracle = 0.5 * (sig - m * code).squaredNorm();
  for (Index j = 0; j < code.size(); ++j) oracle += beta[j] * std::abs(code[j]);
  CHECK(std::abs(lasso_objective(pc, code) - oracle) < 1e-12 * std::max(1.0, oracle));
  CHECK_THROWS_AS(lasso_objective(pc, Vec::Zero(2)), ShapeError);
}

TEST_CASE("LassoProblem validation") {
  CHECK_THROWS_AS(LassoProblem<Dense>(Dense(Mat::Identity(3, 3)), Vec::Zero(2), 0.1), ShapeError);
  CHECK_THROWS_AS(LassoProblem<Dense>(Dense(Mat::Identity(3, 3)), Vec::Zero(3), -0.1),
                  InvalidThresholdError);
  CHECK_THROWS_AS(LassoProblem<Dense>(Dense(Mat::Identity(3, 3)), Vec::Zero(3), Vec::Zero(2).eval()),
                  ShapeError);
}

TEST_CASE("ista on the identity dictionary converges to S_beta(X)") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = random_vector(rng, 12, -3, 3);
    const double beta = 0.1 + 0.05 * trial;
    const LassoProblem<Dense> p(Dense(Mat::Identity(12, 12)), x, beta);
    PursuitConfig cfg;
    cfg.iterations = 500;
    cfg.tol = 1e-14;
    const auto res = ista(p, cfg, Vec::Zero(12));
    CHECK(max_abs(res.code - soft_threshold(x, beta)) < 1e-8);
    // S_beta(X) is a fixed point of S_{beta/2}((G + X) / 2).
    const Vec fix = soft_threshold(x, beta);
    CHECK(max_abs(soft_threshold(((fix + x) / 2).eval(), beta / 2) - fix) < 1e-15);
  }
}

TEST_CASE("one ista step from zero is the thresholded adjoint") {
  std::mt19937_64 rng(17);
  const auto conv = random_conv(rng, SignalShape::image(5, 5, 1), 3, 2, 2, 2, Padding::kValid);
  const Vec x = random_vector(rng, conv.rows());
  const double beta = 0.2;
  const LassoProblem<ConvDictionary<double>> p(conv, x, beta);
  for (Shrinkage op : {Shrinkage::kSigned, Shrinkage::kNonneg}) {
    const auto res = ista(p, iters(1, op), Vec::Zero(conv.cols()));
    const double l = res.lipschitz;
    const Vec z = (conv.apply_adjoint(x) / l).eval();
    const Vec expected = op == Shrinkage::kNonneg ? soft_threshold_nonneg(z, beta / l)
                                                  : soft_threshold(z, beta / l);
    CHECK(res.code == expected);
    CHECK(res.iterations_run == 1);
  }
}

TEST_CASE("ista with beta = 0 and orthonormal columns approaches least squares") {
  std::mt19937_64 rng(19);
  const Mat q = Eigen::HouseholderQR<Mat>(random_matrix(rng, 10, 10)).householderQ();
  const Mat d = q.leftCols(6);
  const Vec x = random_vector(rng, 10);
  const LassoProblem<Dense> p{Dense(d), x, 0.0};
  const auto res = ista(p, iters(200), Vec::Zero(6));
  const Vec ls = d.transpose() * x;  // normal equations with D^T D = I
  CHECK(max_abs(res.code - ls) < 1e-10);
  double prev = 1e300;
  for (double obj : res.objective_trace) {
    CHECK(obj <= prev + 1e-15);
    prev = obj;
  }
}

TEST_CASE("ista objective trace is nonincreasing on random instances") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto conv = random_conv(rng, SignalShape::line(14, 1), 2 + trial % 3, 1, 3,
                                  1 + trial % 2, Padding::kValid);
    const LassoProblem<ConvDictionary<double>> p(conv, random_vector(rng, 14), 0.05);
    const auto res = ista(p, iters(60, trial % 2 ? Shrinkage::kNonneg : Shrinkage::kSigned),
                          Vec::Zero(conv.cols()));
    for (std::size_t k = 1; k < res.objective_trace.size(); ++k) {
      CHECK(res.objective_trace[k] <= res.objective_trace[k - 1] + 1e-12);
    }
  }
}

TEST_CASE("fista agrees with ista at one iteration and its t-sequence") {
  std::mt19937_64 rng(29);
  const auto conv = random_conv(rng, SignalShape::line(16, 2), 3, 1, 3, 2, Padding::kSameZero);
  const LassoProblem<ConvDictionary<double>> p(conv, random_vector(rng, conv.rows()), 0.1);
  const Vec init = random_vector(rng, conv.cols());
  CHECK(fista(p, iters(1), init).code == ista(p, iters(1), init).code);
  // With t_1 = 1 the first extrapolation is inactive, so two iterations agree too.
  CHECK(fista(p, iters(2), init).code == ista(p, iters(2), init).code);

  const auto res = fista(p, iters(4), init);
  REQUIRE(res.momentum_trace.size() == 4);
  CHECK(res.momentum_trace[0] == 1.0);
  CHECK(res.momentum_trace[1] == doctest::Approx(1.618034).epsilon(1e-6));
  CHECK(res.momentum_trace[1] == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-15));
}

TEST_CASE("fista converges to S_beta(X) and beats ista on the same budget") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = random_vector(rng, 10, -2, 2);
    const LassoProblem<Dense> p(Dense(Mat::Identity(10, 10)), x, 0.25);
    const auto f = fista(p, iters(200), Vec::Zero(10));
    CHECK(max_abs(f.code - soft_threshold(x, 0.25)) < 1e-8);

    const Mat d = random_matrix(rng, 8, 12);
    const LassoProblem<Dense> q(Dense(d), random_vector(rng, 8), 0.1);
    const auto fi = fista(q, iters(100), Vec::Zero(12));
    const auto is = ista(q, iters(100), Vec::Zero(12));
    CHECK(fi.objective_trace.back() <= is.objective_trace.back() + 1e-9);
  }
}

TEST_CASE("ista and fista reach the same objective") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat d = random_matrix(rng, 12, 8);
    const LassoProblem<Dense> p(Dense(d), random_vector(rng, 12), 0.2);
    const double a = ista(p, iters(500), Vec::Zero(8)).objective_trace.back();
    const double b = fista(p, iters(500), Vec::Zero(8)).objective_trace.back();
    CHECK(std::abs(a - b) < 1e-6);
  }
}

TEST_CASE("shrinking beta does not decrease the l1 norm at the solution") {
  std::mt19937_64 rng(41);
  const Mat d = random_matrix(rng, 10, 6);
  const Vec x = random_vector(rng, 10, -2, 2);
  double prev_l1 = -1.0;
  for (double beta : {2.0, 1.0, 0.5, 0.25, 0.1, 0.01}) {
    const LassoProblem<Dense> p(Dense(d), x, beta);
    const double l1 = fista(p, iters(3000), Vec::Zero(6)).code.lpNorm<1>();
    CHECK(l1 >= prev_l1 - 1e-8);
    prev_l1 = l1;
  }
}

TEST_CASE("early stopping and errors") {
  const LassoProblem<Dense> p(Dense(Mat::Identity(3, 3)), Vec::Ones(3), 0.0);
  PursuitConfig cfg;
  cfg.iterations = 1000;
  cfg.tol = 1e-6;
  const auto res = ista(p, cfg, Vec::Zero(3));
  CHECK(res.iterations_run < 1000);
  CHECK(res.delta_trace.back() < 1e-6);

  CHECK_THROWS_AS(ista(p, cfg, Vec::Zero(2)), ShapeError);
  cfg.iterations = 0;
  CHECK_THROWS_AS(ista(p, cfg, Vec::Zero(3)), ConfigError);

  // A step far above 2/lambda_max diverges.
  const LassoProblem<Dense> q(Dense(10.0 * Mat::Identity(3, 3)), Vec::Ones(3), 0.0);
  PursuitConfig bad = iters(2000);
  bad.lipschitz_override = 1e-3;
  CHECK_THROWS_AS(ista(q, bad, Vec::Ones(3)), DivergenceError);
}

TEST_CASE("layered_thresholding") {
  std::mt19937_64 rng(43);
  // Single nonneg layer equals ReLU(D^T X - b).
  const auto conv = random_conv(rng, SignalShape::line(10, 1), 3, 1, 3, 1, Padding::kValid);
  const Vec x = random_vector(rng, 10);
  std::vector<ThresholdLayer<ConvDictionary<double>>> one{{conv, 0.1}};
  const auto out = layered_thresholding(one, x, Shrinkage::kNonneg);
  CHECK(out.size() == 1);
  CHECK(out[0] == relu((conv.apply_adjoint(x).array() - 0.1).matrix().eval()));

  // Identity layers with zero threshold pass the signal through.
  std::vector<ThresholdLayer<Dense>> ids{{Dense(Mat::Identity(6, 6)), 0.0},
                                          {Dense(Mat::Identity(6, 6)), 0.0}};
  const Vec y = random_vector(rng, 6);
  CHECK(layered_thresholding(ids, y, Shrinkage::kSigned).back() == y);

  // Two random dense layers against a hand computation.
  const Mat d1 = random_matrix(rng, 8, 6), d2 = random_matrix(rng, 6, 4);
  const Vec b2 = random_vector(rng, 4, 0, 0.3);
  std::vector<ThresholdLayer<Dense>> chain{{Dense(d1), 0.2}, {Dense(d2), b2}};
  const Vec s = random_vector(rng, 8);
  const auto got = layered_thresholding(chain, s, Shrinkage::kSigned);
  const Vec g1 = soft_threshold((d1.transpose() * s).eval(), 0.2);
  const Vec g2 = soft_threshold((d2.transpose() * g1).eval(), b2);
  CHECK(max_abs(got[0] - g1) < 1e-14);
  CHECK(max_abs(got[1] - g2) < 1e-14);

  std::vector<ThresholdLayer<Dense>> broken{{Dense(d1), 0.2}, {Dense(d1), 0.2}};
  try {
    layered_thresholding(broken, s, Shrinkage::kSigned);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
}

TEST_CASE("trace CSV export") {
  const LassoProblem<Dense> p(Dense(Mat::Identity(2, 2)), Vec::Ones(2), 0.1);
  const auto res = ista(p, iters(3), Vec::Zero(2));
  std::ostringstream os;
  write_trace_csv(os, res);
  const std::string csv = os.str();
  CHECK(csv.rfind("iter,objective,delta_inf\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
