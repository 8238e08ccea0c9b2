#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csc/dictionary.hpp"
#include "csc/errors.hpp"
#include "csc/numeric.hpp"
#include "csc/pursuit.hpp"

namespace csc {

enum class Solver { kIsta, kFista };
enum class ResVariant { kFull, kResNet, kSimplified, kPlain };

/// Parameters of one layer: kernel bank F_i^{s_i}, additive bias b_i (one per
/// kernel), scale c_i, and the additive bias applied to the identity
/// (passthrough) channels of an MSD layer.
///
/// Network-mode layers carry the bias as written in a CNN (pre-activation
/// + b). Pursuit-mode layers come from a Lasso with regularization beta and
/// Lipschitz constant L: scale = 1/L and bias = -beta/L. threshold() and
/// beta() are the only places that cross between the two sign conventions.
template <typename Scalar>
struct LayerParams {
  ConvDictionary<Scalar> kernel_bank;
  Vector<Scalar> bias;
  Scalar scale = 1;
  Scalar passthrough_bias = 0;

  static LayerParams network(ConvDictionary<Scalar> bank, Vector<Scalar> bias) {
    LayerParams p{std::move(bank), std::move(bias), Scalar(1), Scalar(0)};
    p.validate();
    return p;
  }

  /// Uniform-beta Lasso layer. For MSD layers the same beta also applies to
  /// the identity channels unless `threshold_passthrough` is false.
  static LayerParams pursuit(ConvDictionary<Scalar> bank, Scalar beta, Scalar lipschitz,
                             bool threshold_passthrough = true) {
    if (beta < Scalar(0)) throw InvalidThresholdError("beta must be nonnegative");
    if (!(lipschitz > Scalar(0))) throw ConfigError("lipschitz must be > 0");
    const Index w = bank.kernel_count();
    LayerParams p{std::move(bank), Vector<Scalar>::Constant(w, bias_from_threshold(beta / lipschitz)),
                  Scalar(1) / lipschitz,
                  threshold_passthrough ? bias_from_threshold(beta / lipschitz) : Scalar(0)};
    p.validate();
    return p;
  }

  static Scalar bias_from_threshold(Scalar threshold) { return -threshold; }

  Index width() const { return kernel_bank.kernel_count(); }
  Vector<Scalar> threshold() const { return -bias; }
  Scalar passthrough_threshold() const { return -passthrough_bias; }
  /// beta = L * threshold with L = 1 / scale.
  Vector<Scalar> beta() const { return threshold() / scale; }

  void validate() const {
    if (bias.size() != kernel_bank.kernel_count()) {
      throw ShapeError("bias length must equal kernel count");
    }
    if (!(scale > Scalar(0))) throw ConfigError("layer scale must be > 0");
  }
};

namespace detail {

template <typename Scalar>
Vector<Scalar> broadcast_bias(const Vector<Scalar>& per_channel, Index positions) {
  return per_channel.replicate(positions, 1);
}

// P applied with the additive-bias convention: ReLU(pre + bias) for S^+,
// S_{-bias}(pre) for S.
template <typename Scalar>
Vector<Scalar> activate(Shrinkage op, const Vector<Scalar>& pre, const Vector<Scalar>& bias) {
  if (op == Shrinkage::kNonneg) return relu((pre + bias).eval());
  return soft_threshold(pre, (-bias).eval());
}

template <typename Scalar>
Vector<Scalar> conv_layer(const LayerParams<Scalar>& layer, const Vector<Scalar>& input,
                          Shrinkage op, std::size_t index) {
  if (input.size() != layer.kernel_bank.rows()) {
    throw ShapeError("layer " + std::to_string(index + 1) + ": input length " +
                     std::to_string(input.size()) + " != " +
                     std::to_string(layer.kernel_bank.rows()));
  }
  const Vector<Scalar> pre = layer.scale * layer.kernel_bank.apply_adjoint(input);
  return activate(op, pre, broadcast_bias(layer.bias, layer.kernel_bank.out_positions()));
}

}  // namespace detail

/// Channel concatenation of two position-major stacks with the same positions.
template <typename Scalar>
Vector<Scalar> concat_channels(const Vector<Scalar>& a, Index a_channels, const Vector<Scalar>& b,
                               Index b_channels) {
  const Index p = a_channels ? a.size() / a_channels : 0;
  if (a.size() != p * a_channels || b.size() != p * b_channels) {
    throw LayoutError("concat_channels: stacks disagree on position count");
  }
  const Index c = a_channels + b_channels;
  Vector<Scalar> out(p * c);
  for (Index i = 0; i < p; ++i) {
    out.segment(i * c, a_channels) = a.segment(i * a_channels, a_channels);
    out.segment(i * c + a_channels, b_channels) = b.segment(i * b_channels, b_channels);
  }
  return out;
}

/// Splits a stack into its first (channels - last) and last `last` channels.
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> split_last_channels(const Vector<Scalar>& stack,
                                                              Index channels, Index last) {
  if (last < 0 || last > channels || channels < 1 || stack.size() % channels != 0) {
    throw LayoutError("split_last_channels: cannot split last " + std::to_string(last) +
                      " of " + std::to_string(channels) + " channels");
  }
  const Index p = stack.size() / channels;
  const Index head = channels - last;
  Vector<Scalar> a(p * head), b(p * last);
  for (Index i = 0; i < p; ++i) {
    a.segment(i * head, head) = stack.segment(i * channels, head);
    b.segment(i * last, last) = stack.segment(i * channels + head, last);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// ML-CSC: the plain network.

template <typename Scalar>
struct MLCSCModel {
  std::vector<LayerParams<Scalar>> layers;
  Index depth() const { return static_cast<Index>(layers.size()); }
};

/// Layered thresholding with S^+: G_i = ReLU(c_i * D_i^T G_{i-1} + b_i).
template <typename Scalar>
std::vector<Vector<Scalar>> mlcsc_forward(const MLCSCModel<Scalar>& model, const Vector<Scalar>& x) {
  std::vector<Vector<Scalar>> codes;
  Vector<Scalar> current = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    current = detail::conv_layer(model.layers[i], current, Shrinkage::kNonneg, i);
    codes.push_back(current);
  }
  return codes;
}

// ---------------------------------------------------------------------------
// Res-CSC: layers come in pairs; the first of a pair is a zero-initialized
// thresholding step, the second starts from the pair's input X_{-1}:
//   G = P(E^T X + X_{-1} + c E^T E X_{-1}),  E = c_i * D_i.

template <typename Scalar>
struct ResCSCModel {
  std::vector<LayerParams<Scalar>> layers;
  ResVariant variant = ResVariant::kFull;
  Shrinkage shrinkage = Shrinkage::kNonneg;
  /// Coefficient of the E^T E X_{-1} term per pair; defaults to -1 / c_i,
  /// which is -L when the layer is in pursuit mode.
  std::vector<std::optional<Scalar>> pair_c;

  Scalar c_for_pair(std::size_t pair) const {
    if (pair < pair_c.size() && pair_c[pair]) return *pair_c[pair];
    return Scalar(-1) / layers[2 * pair + 1].scale;
  }
};

template <typename Scalar>
std::vector<Vector<Scalar>> rescsc_forward(const ResCSCModel<Scalar>& model,
                                           const Vector<Scalar>& x) {
  std::vector<Vector<Scalar>> codes;
  if (model.variant == ResVariant::kPlain) {
    Vector<Scalar> current = x;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      current = detail::conv_layer(model.layers[i], current, model.shrinkage, i);
      codes.push_back(current);
    }
    return codes;
  }
  if (model.layers.size() % 2 != 0) {
    throw ShapeError("Res-CSC variants with shortcuts need an even number of layers");
  }
  Vector<Scalar> pair_input = x;
  for (std::size_t i = 0; i < model.layers.size(); i += 2) {
    const auto& first = model.layers[i];
    const auto& second = model.layers[i + 1];
    const Vector<Scalar> mid = detail::conv_layer(first, pair_input, model.shrinkage, i);
    codes.push_back(mid);

    const auto& bank = second.kernel_bank;
    if (mid.size() != bank.rows()) {
      throw ShapeError("layer " + std::to_string(i + 2) + ": input length mismatch");
    }
    if (pair_input.size() != bank.cols()) {
      throw ShapeError("residual shape error at layer " + std::to_string(i + 2) +
                       ": pair input length " + std::to_string(pair_input.size()) +
                       " != code length " + std::to_string(bank.cols()));
    }
    Vector<Scalar> pre = second.scale * bank.apply_adjoint(mid);
    if (model.variant != ResVariant::kSimplified) pre += pair_input;
    if (model.variant != ResVariant::kResNet) {
      const Scalar c = model.c_for_pair(i / 2);
      pre += (c * second.scale * second.scale) * bank.apply_adjoint(bank.apply(pair_input));
    }
    pair_input = detail::activate(model.shrinkage, pre,
                                  detail::broadcast_bias(second.bias, bank.out_positions()));
    codes.push_back(pair_input);
  }
  return codes;
}

// ---------------------------------------------------------------------------
// MSD-CSC: each layer solves a Lasso over [I, F^T] on the concatenated
// feature stack, with `unfolding` extra ISTA/FISTA steps after the initial
// thresholding step.

template <typename Scalar>
struct MSDCSCModel {
  std::vector<LayerParams<Scalar>> layers;
  long unfolding = 0;
  Solver solver = Solver::kIsta;

  Index depth() const { return static_cast<Index>(layers.size()); }
  Index width() const { return layers.empty() ? 0 : layers.front().width(); }
};

namespace detail {

template <typename Scalar>
Vector<Scalar> msd_bias_stack(const LayerParams<Scalar>& layer) {
  const Index c = layer.kernel_bank.input_shape().channels;
  const Index w = layer.width();
  const Index p = layer.kernel_bank.input_shape().positions();
  Vector<Scalar> per_pos(c + w);
  per_pos.head(c).setConstant(layer.passthrough_bias);
  per_pos.tail(w) = layer.bias;
  return per_pos.replicate(p, 1);
}

// D G - X computed on the stack: G[1:-w) + F^T G[-w] - X.
template <typename Scalar>
Vector<Scalar> msd_residual(const ConvDictionary<Scalar>& conv, const Vector<Scalar>& gamma,
                            const Vector<Scalar>& x) {
  const Index c = conv.input_shape().channels;
  const Index w = conv.kernel_count();
  auto [pass, fresh] = split_last_channels(gamma, c + w, w);
  return pass + conv.apply(fresh) - x;
}

}  // namespace detail

/// Forward pass of one MSD-CSC layer on the stack X (c_in channels).
/// Returns the (c_in + w)-channel stack.
template <typename Scalar>
Vector<Scalar> msdcsc_layer_forward(const LayerParams<Scalar>& layer, const Vector<Scalar>& x,
                                    long unfolding, Solver solver) {
  const ConvDictionary<Scalar>& conv = layer.kernel_bank;
  if (conv.padding() != Padding::kSameZero) {
    throw LayoutError("MSD layer requires a same-padded kernel bank");
  }
  if (x.size() != conv.rows()) {
    throw LayoutError("MSD layer: input length " + std::to_string(x.size()) +
                      " does not match the stack shape " + std::to_string(conv.rows()));
  }
  if (unfolding < 0) throw ConfigError("unfolding must be >= 0");
  const Index c = conv.input_shape().channels;
  const Index w = conv.kernel_count();
  const Scalar s = layer.scale;
  const Vector<Scalar> bias = detail::msd_bias_stack(layer);

  Vector<Scalar> gamma = relu((s * concat_channels(x, c, conv.apply_adjoint(x), w) + bias).eval());

  auto refine = [&](const Vector<Scalar>& point) -> Vector<Scalar> {
    const Vector<Scalar> f1 = detail::msd_residual(conv, point, x);
    const Vector<Scalar> f2 = conv.apply_adjoint(f1);
    const Vector<Scalar> f3 = concat_channels(f1, c, f2, w);
    return relu((point - s * f3 + bias).eval());
  };

  if (solver == Solver::kIsta) {
    for (long k = 0; k < unfolding; ++k) gamma = refine(gamma);
    return gamma;
  }
  Vector<Scalar> previous = gamma;
  Scalar t = 1;
  for (long k = 0; k < unfolding; ++k) {
    const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
    const Vector<Scalar> z = gamma + ((t - Scalar(1)) / t_next) * (gamma - previous);
    previous = std::move(gamma);
    gamma = refine(z);
    t = t_next;
  }
  return gamma;
}

/// Folds msdcsc_layer_forward over the model; returns every layer's stack.
template <typename Scalar>
std::vector<Vector<Scalar>> msdcsc_forward_all(const MSDCSCModel<Scalar>& model,
                                               const Vector<Scalar>& x) {
  std::vector<Vector<Scalar>> stacks;
  Vector<Scalar> current = x;
  Index channels = model.layers.empty() ? 0 : model.layers.front().kernel_bank.input_shape().channels;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    if (layer.kernel_bank.input_shape().channels != channels) {
      throw LayoutError("MSD layer " + std::to_string(i + 1) + " expects " +
                        std::to_string(layer.kernel_bank.input_shape().channels) +
                        " channels but receives " + std::to_string(channels));
    }
    current = msdcsc_layer_forward(layer, current, model.unfolding, model.solver);
    channels += layer.width();
    stacks.push_back(current);
  }
  return stacks;
}

template <typename Scalar>
Vector<Scalar> msdcsc_forward(const MSDCSCModel<Scalar>& model, const Vector<Scalar>& x) {
  if (model.layers.empty()) return x;
  return msdcsc_forward_all(model, x).back();
}

/// The Lasso problem an MSD layer solves on input X, with beta = L * threshold
/// in block layout (identity part | conv part).
template <typename Scalar>
LassoProblem<MSDDictionary<Scalar>> msd_layer_problem(const LayerParams<Scalar>& layer,
                                                     const Vector<Scalar>& x) {
  MSDDictionary<Scalar> dict(layer.kernel_bank);
  const Index n = dict.rows();
  const Index p = layer.kernel_bank.out_positions();
  Vector<Scalar> beta(dict.cols());
  beta.head(n).setConstant(layer.passthrough_threshold() / layer.scale);
  beta.tail(dict.cols() - n) = detail::broadcast_bias(layer.beta(), p);
  return LassoProblem<MSDDictionary<Scalar>>(std::move(dict), x, std::move(beta));
}

/// Objective of an MSD layer's Lasso at a stack-form code.
template <typename Scalar>
Scalar msd_layer_objective(const LayerParams<Scalar>& layer, const Vector<Scalar>& x,
                           const Vector<Scalar>& stack) {
  const auto problem = msd_layer_problem(layer, x);
  return lasso_objective(problem, problem.dict.from_feature_stack(stack));
}

}  // namespace csc
