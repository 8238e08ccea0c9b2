#include <cmath>
#include <random>

#include "csc/models.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace csc;
using namespace csc::testing;

namespace {

using Conv = ConvDictionary<double>;

// Plain CNN layer written directly against the dense matrix.
Vec dense_conv_relu(const Conv& bank, double scale, const Vec& bias, const Vec& x) {
  const Mat m = brute_force_matrix(bank);
  const Vec pre = scale * (m.transpose() * x);
  Vec out(pre.size());
  const Index w = bank.kernel_count();
  for (Index i = 0; i < pre.size(); ++i) out[i] = std::max(pre[i] + bias[i % w], 0.0);
  return out;
}

LayerParams<double> random_network_layer(std::mt19937_64& rng, SignalShape in, Index w, Index k,
                                         Index s, Padding pad) {
  return LayerParams<double>::network(random_conv(rng, in, w, 1, k, s, pad),
                                      random_vector(rng, w, -0.3, 0.3));
}

}  // namespace

TEST_CASE("mlcsc_forward matches a direct conv-ReLU pipeline") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MLCSCModel<double> model;
    model.layers.push_back(random_network_layer(rng, SignalShape::line(16, 2), 4, 3, 1, Padding::kValid));
    const auto in2 = model.layers[0].kernel_bank.code_shape();
    model.layers.push_back(random_network_layer(rng, in2, 3, 3, 2, Padding::kValid));
    model.layers[1].scale = 0.7;

    const Vec x = random_vector(rng, 32);
    const auto codes = mlcsc_forward(model, x);
    const Vec h1 = dense_conv_relu(model.layers[0].kernel_bank, 1.0, model.layers[0].bias, x);
    const Vec h2 = dense_conv_relu(model.layers[1].kernel_bank, 0.7, model.layers[1].bias, h1);
    CHECK(max_abs(codes[0] - h1) < 1e-12);
    CHECK(max_abs(codes[1] - h2) < 1e-12);
  }
}

TEST_CASE("mlcsc_forward edge cases") {
  std::mt19937_64 rng(5);
  // Zero kernel with bias -1 kills everything.
  Conv zero({ConvKernel<double>::line(Vec::Zero(3).eval(), 1)}, SignalShape::line(8, 1));
  MLCSCModel<double> m1;
  m1.layers.push_back(LayerParams<double>::network(zero, Vec::Constant(1, -1.0)));
  CHECK(mlcsc_forward(m1, random_vector(rng, 8)).back().isZero(0));

  // A delta kernel with zero bias passes the positive part through.
  Conv delta({ConvKernel<double>::line((Vec(1) << 1.0).finished(), 1)}, SignalShape::line(8, 1));
  MLCSCModel<double> m2;
  m2.layers.push_back(LayerParams<double>::network(delta, Vec::Zero(1).eval()));
  m2.layers.push_back(LayerParams<double>::network(delta, Vec::Zero(1).eval()));
  const Vec x = random_vector(rng, 8);
  CHECK(mlcsc_forward(m2, x).back() == relu(x));

  // Layered thresholding with thresholds -bias is the same computation.
  std::vector<ThresholdLayer<Conv>> lt{{delta, 0.0}, {delta, 0.0}};
  CHECK(layered_thresholding(lt, x, Shrinkage::kNonneg).back() == mlcsc_forward(m2, x).back());

  CHECK_THROWS_AS(mlcsc_forward(m2, Vec::Zero(5).eval()), ShapeError);
  CHECK_THROWS_AS(LayerParams<double>::network(delta, Vec::Zero(2).eval()), ShapeError);
}

TEST_CASE("LayerParams sign bridge") {
  std::mt19937_64 rng(7);
  const auto bank = random_conv(rng, SignalShape::line(8, 1), 2, 1, 3, 1, Padding::kSameZero);
  const auto p = LayerParams<double>::pursuit(bank, 0.6, 3.0);
  CHECK(p.scale == doctest::Approx(1.0 / 3.0));
  CHECK(p.bias[0] == doctest::Approx(-0.2));
  CHECK(p.threshold()[1] == doctest::Approx(0.2));
  CHECK(p.beta()[0] == doctest::Approx(0.6));
  CHECK(p.passthrough_threshold() == doctest::Approx(0.2));
  CHECK_THROWS_AS(LayerParams<double>::pursuit(bank, -1.0, 3.0), InvalidThresholdError);
}

namespace {

ResCSCModel<double> random_res_model(std::mt19937_64& rng, ResVariant variant, Shrinkage op) {
  // Pair: 3 channels -> 4 kernels -> 3 kernels, same padding keeps shapes.
  ResCSCModel<double> m;
  m.variant = variant;
  m.shrinkage = op;
  const SignalShape in = SignalShape::line(10, 3);
  auto l1 = LayerParams<double>::network(random_conv(rng, in, 4, 1, 3, 1, Padding::kSameZero),
                                         random_vector(rng, 4, -0.2, 0.0));
  auto l2 = LayerParams<double>::network(
      random_conv(rng, in.with_channels(4), 3, 1, 3, 2, Padding::kSameZero),
      random_vector(rng, 3, -0.2, 0.0));
  l1.scale = 0.4;
  l2.scale = 0.3;
  m.layers = {l1, l2};
  return m;
}

}  // namespace

TEST_CASE("Res-CSC plain variant is mlcsc_forward") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_res_model(rng, ResVariant::kPlain, Shrinkage::kNonneg);
    MLCSCModel<double> ml{m.layers};
    const Vec x = random_vector(rng, 30);
    const auto a = rescsc_forward(m, x);
    const auto b = mlcsc_forward(ml, x);
    CHECK(a.back() == b.back());
  }
}

TEST_CASE("Res-CSC resnet variant with zero threshold is the shortcut formula") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_res_model(rng, ResVariant::kResNet, Shrinkage::kSigned);
    m.layers[1].bias.setZero();
    const Vec x = random_vector(rng, 30);
    const auto codes = rescsc_forward(m, x);
    const Mat d2 = brute_force_matrix(m.layers[1].kernel_bank);
    const Vec shortcut = 0.3 * d2.transpose() * codes[0] + x;
    CHECK(max_abs(codes[1] - shortcut) < 1e-12);
  }
}

TEST_CASE("Res-CSC full and simplified variants against dense evaluation") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    for (ResVariant v : {ResVariant::kFull, ResVariant::kSimplified}) {
      const auto m = random_res_model(rng, v, Shrinkage::kNonneg);
      const Vec x = random_vector(rng, 30);
      const auto codes = rescsc_forward(m, x);

      const Mat d1 = brute_force_matrix(m.layers[0].kernel_bank);
      const Mat e2 = 0.3 * brute_force_matrix(m.layers[1].kernel_bank);
      const double c = -1.0 / 0.3;
      Vec mid = 0.4 * d1.transpose() * x;
      for (Index i = 0; i < mid.size(); ++i) mid[i] = std::max(mid[i] + m.layers[0].bias[i % 4], 0.0);
      Vec pre = e2.transpose() * mid + c * e2.transpose() * (e2 * x);
      if (v == ResVariant::kFull) pre += x;
      for (Index i = 0; i < pre.size(); ++i) pre[i] = std::max(pre[i] + m.layers[1].bias[i % 3], 0.0);
      CHECK(max_abs(codes[0] - mid) < 1e-12);
      CHECK(max_abs(codes[1] - pre) < 1e-12);
    }
  }
}

TEST_CASE("Res-CSC full variant in pursuit mode is one ISTA step from X_{-1}") {
  std::mt19937_64 rng(19);
  const SignalShape in = SignalShape::line(9, 2);
  const auto b1 = random_conv(rng, in, 3, 1, 3, 1, Padding::kSameZero);
  const auto b2 = random_conv(rng, in.with_channels(3), 2, 1, 3, 1, Padding::kSameZero);
  const double l2 = lipschitz_constant(b2);
  ResCSCModel<double> m;
  m.variant = ResVariant::kFull;
  m.shrinkage = Shrinkage::kSigned;
  m.layers = {LayerParams<double>::pursuit(b1, 0.05, lipschitz_constant(b1)),
              LayerParams<double>::pursuit(b2, 0.05, l2)};
  const Vec x = random_vector(rng, 18);
  const auto codes = rescsc_forward(m, x);

  const LassoProblem<Conv> p(b2, codes[0], 0.05);
  PursuitConfig cfg;
  cfg.lipschitz_override = l2;
  const auto step = ista(p, cfg, x);
  CHECK(max_abs(codes[1] - step.code) < 1e-12);
}

TEST_CASE("Res-CSC shape errors") {
  std::mt19937_64 rng(23);
  auto m = random_res_model(rng, ResVariant::kFull, Shrinkage::kNonneg);
  m.layers.pop_back();
  CHECK_THROWS_AS(rescsc_forward(m, random_vector(rng, 30)), ShapeError);

  ResCSCModel<double> bad;
  bad.variant = ResVariant::kResNet;
  const SignalShape in = SignalShape::line(10, 3);
  bad.layers = {LayerParams<double>::network(random_conv(rng, in, 4, 1, 3, 1, Padding::kSameZero),
                                             Vec::Zero(4).eval()),
                LayerParams<double>::network(
                    random_conv(rng, in.with_channels(4), 2, 1, 3, 1, Padding::kSameZero),
                    Vec::Zero(2).eval())};
  try {
    rescsc_forward(bad, random_vector(rng, 30));
    FAIL("expected residual shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

namespace {

Vec nonneg_stack(std::mt19937_64& rng, Index n) { return random_vector(rng, n, 0.0, 1.0); }

}  // namespace

TEST_CASE("MSD layer at unfolding 0 is the MSDNet layer") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Index c = 1 + trial % 3, w = 1 + trial % 4, s = 1 + trial % 3;
    const SignalShape in = SignalShape::line(12, c);
    const auto layer = random_network_layer(rng, in, w, 3, s, Padding::kSameZero);
    const Vec x = nonneg_stack(rng, in.size());
    const Vec out = msdcsc_layer_forward(layer, x, 0, Solver::kIsta);
    const Vec fresh = dense_conv_relu(layer.kernel_bank, 1.0, layer.bias, x);
    CHECK(max_abs(out - concat_channels(x, c, fresh, w)) < 1e-12);
    // Passthrough channels at unfolding 0 reproduce the input exactly.
    CHECK(split_last_channels(out, c + w, w).first == x);
  }
}

TEST_CASE("MSD layer passthrough support under positive scaling") {
  std::mt19937_64 rng(31);
  const SignalShape in = SignalShape::line(10, 2);
  auto layer = random_network_layer(rng, in, 3, 3, 2, Padding::kSameZero);
  Vec x = nonneg_stack(rng, in.size());
  x[3] = 0;
  x[7] = 0;
  layer.scale = 1.0 / 5.0;
  const Vec out = msdcsc_layer_forward(layer, x, 0, Solver::kIsta);
  const Vec pass = split_last_channels(out, 5, 3).first;
  for (Index i = 0; i < x.size(); ++i) {
    CHECK((pass[i] > 0) == (x[i] > 0));
    CHECK(pass[i] == doctest::Approx(x[i] / 5.0));
  }
}

TEST_CASE("MSD layer with unfolding equals generic pursuit on the layer Lasso") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const SignalShape in = SignalShape::line(10, 1 + trial % 2);
    const auto bank = random_conv(rng, in, 2 + trial % 2, 1, 3, 1 + trial % 3, Padding::kSameZero);
    const MSDDictionary<double> dict(bank);
    const double l = lipschitz_constant(dict);
    const auto layer = LayerParams<double>::pursuit(bank, 0.05, l);
    const Vec x = nonneg_stack(rng, in.size());
    const auto problem = msd_layer_problem(layer, x);

    PursuitConfig cfg;
    cfg.iterations = 3;
    cfg.tol = 1e-300;
    cfg.shrinkage = Shrinkage::kNonneg;
    cfg.lipschitz_override = l;

    const Vec ista_stack = msdcsc_layer_forward(layer, x, 2, Solver::kIsta);
    const auto ref = ista(problem, cfg, Vec::Zero(dict.cols()));
    CHECK(max_abs(ista_stack - dict.to_feature_stack(ref.code)) < 1e-10);

    const Vec fista_stack = msdcsc_layer_forward(layer, x, 2, Solver::kFista);
    const auto fref = fista(problem, cfg, Vec::Zero(dict.cols()));
    CHECK(max_abs(fista_stack - dict.to_feature_stack(fref.code)) < 1e-10);

    // FISTA and ISTA agree while unfolding < 2.
    CHECK(max_abs(msdcsc_layer_forward(layer, x, 1, Solver::kIsta) -
                  msdcsc_layer_forward(layer, x, 1, Solver::kFista)) == 0.0);
  }
}

TEST_CASE("MSD unfolding never increases the layer objective") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const SignalShape in = SignalShape::line(14, 2);
    const auto bank = random_conv(rng, in, 3, 1, 3, 1 + trial % 3, Padding::kSameZero);
    const auto layer = LayerParams<double>::pursuit(bank, 0.1, lipschitz_constant(MSDDictionary<double>(bank)));
    const Vec x = nonneg_stack(rng, in.size());
    double prev = 1e300;
    for (long u = 0; u <= 5; ++u) {
      const double obj = msd_layer_objective(layer, x, msdcsc_layer_forward(layer, x, u, Solver::kIsta));
      CHECK(obj <= prev + 1e-12);
      prev = obj;
    }
  }
}

TEST_CASE("msdcsc_forward channel growth and two-layer reference") {
  std::mt19937_64 rng(43);
  const Index c_in = 2, w = 3, len = 9;
  MSDCSCModel<double> model;
  for (Index i = 0; i < 2; ++i) {
    model.layers.push_back(random_network_layer(rng, SignalShape::line(len, c_in + i * w), w, 3,
                                                1 + i, Padding::kSameZero));
  }
  const Vec x = nonneg_stack(rng, len * c_in);
  const auto stacks = msdcsc_forward_all(model, x);
  CHECK(stacks[0].size() == len * (c_in + w));
  CHECK(stacks[1].size() == len * (c_in + 2 * w));

  const Vec z1 = dense_conv_relu(model.layers[0].kernel_bank, 1.0, model.layers[0].bias, x);
  const Vec h1 = concat_channels(x, c_in, z1, w);
  const Vec z2 = dense_conv_relu(model.layers[1].kernel_bank, 1.0, model.layers[1].bias, h1);
  const Vec h2 = concat_channels(h1, c_in + w, z2, w);
  CHECK(max_abs(msdcsc_forward(model, x) - h2) < 1e-12);

  MSDCSCModel<double> single{{model.layers[0]}, 2, Solver::kIsta};
  CHECK(msdcsc_forward(single, x) == msdcsc_layer_forward(model.layers[0], x, 2, Solver::kIsta));
}

TEST_CASE("MSD layout errors") {
  std::mt19937_64 rng(47);
  const auto valid = random_network_layer(rng, SignalShape::line(8, 1), 2, 3, 1, Padding::kValid);
  CHECK_THROWS_AS(msdcsc_layer_forward(valid, Vec::Zero(8).eval(), 0, Solver::kIsta), LayoutError);
  const auto same = random_network_layer(rng, SignalShape::line(8, 1), 2, 3, 1, Padding::kSameZero);
  CHECK_THROWS_AS(msdcsc_layer_forward(same, Vec::Zero(7).eval(), 0, Solver::kIsta), LayoutError);
  CHECK_THROWS_AS(split_last_channels(Vec::Zero(6).eval(), 3, 4), LayoutError);

  MSDCSCModel<double> broken{{same, same}, 0, Solver::kIsta};
  CHECK_THROWS_AS(msdcsc_forward(broken, Vec::Zero(8).eval()), LayoutError);
}
