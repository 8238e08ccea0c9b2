#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include "csc/errors.hpp"
#include "csc/numeric.hpp"

namespace csc {

enum class Padding { kValid, kSameZero };

/// Spatial shape of a signal or feature stack. 1D signals use height = 1.
/// Storage is position-major: all channels of a position are contiguous and
/// positions run row-major.
struct SignalShape {
  Index height = 1;
  Index width = 1;
  Index channels = 1;
  bool one_d = false;

  static SignalShape line(Index length, Index channels) {
    return {1, length, channels, true};
  }
  static SignalShape image(Index height, Index width, Index channels) {
    return {height, width, channels, false};
  }
  Index positions() const { return height * width; }
  Index size() const { return height * width * channels; }
  SignalShape with_channels(Index c) const { return {height, width, c, one_d}; }
  bool operator==(const SignalShape&) const = default;
};

/// One (dilated) convolution kernel; taps stored as (row, col, channel)
/// with channel fastest.
template <typename Scalar>
struct ConvKernel {
  Index height = 1;
  Index width = 1;
  Index channels = 1;
  Index dilation = 1;
  Vector<Scalar> taps;

  static ConvKernel line(Vector<Scalar> taps, Index channels, Index dilation = 1) {
    const Index k = channels > 0 ? taps.size() / channels : 0;
    return {1, k, channels, dilation, std::move(taps)};
  }

  Index extent_h() const { return dilation * (height - 1) + 1; }
  Index extent_w() const { return dilation * (width - 1) + 1; }
  Index tap_count() const { return height * width * channels; }
  Scalar tap(Index i, Index j, Index c) const { return taps[(i * width + j) * channels + c]; }

  void validate() const {
    if (height < 1 || width < 1 || channels < 1) throw ShapeError("kernel extent must be >= 1");
    if (dilation < 1) throw ShapeError("dilation must be >= 1");
    if (taps.size() != tap_count()) throw ShapeError("kernel tap count does not match its shape");
    if (!taps.allFinite()) throw ShapeError("kernel taps must be finite");
  }
};

/// Code-space layout used by the stripe-sparsity measure.
struct StripeLayout {
  Index m = 1;          // channels per position
  Index n = 1;          // dilated kernel extent
  Index positions = 0;  // code positions
  Index code_length() const { return m * positions; }
};

template <typename D>
concept LinearDictionary = requires(const D& d, const Vector<typename D::Scalar>& v) {
  typename D::Scalar;
  { d.rows() } -> std::convertible_to<Index>;
  { d.cols() } -> std::convertible_to<Index>;
  { d.apply(v) } -> std::convertible_to<Vector<typename D::Scalar>>;
  { d.apply_adjoint(v) } -> std::convertible_to<Vector<typename D::Scalar>>;
  { d.to_matrix() } -> std::convertible_to<Matrix<typename D::Scalar>>;
};

inline constexpr double kMaxDenseEntries = 1e7;

inline void require_materializable(Index rows, Index cols) {
  if (static_cast<double>(rows) * static_cast<double>(cols) > kMaxDenseEntries) {
    throw MaterializationError("dense materialization of " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " exceeds entry limit");
  }
}

/// D as the transpose of a convolutional matrix: column (p, k) is kernel k
/// placed at output position p. apply() reconstructs a signal from a code,
/// apply_adjoint() correlates a signal with every kernel. Stride is 1.
template <typename Scalar_>
class ConvDictionary {
 public:
  using Scalar = Scalar_;
  using Kernel = ConvKernel<Scalar>;

  ConvDictionary(std::vector<Kernel> kernels, SignalShape input,
                 Padding padding = Padding::kValid)
      : kernels_(std::move(kernels)), input_(input), padding_(padding) {
    if (kernels_.empty()) throw ShapeError("dictionary needs at least one kernel");
    if (input_.height < 1 || input_.width < 1 || input_.channels < 1) {
      throw ShapeError("input shape must be positive");
    }
    const Kernel& k0 = kernels_.front();
    for (const Kernel& k : kernels_) {
      k.validate();
      if (k.height != k0.height || k.width != k0.width || k.channels != k0.channels ||
          k.dilation != k0.dilation) {
        throw ShapeError("all kernels must share shape and dilation");
      }
    }
    if (k0.channels != input_.channels) {
      throw ShapeError("kernel channels (" + std::to_string(k0.channels) +
                       ") must equal input channels (" + std::to_string(input_.channels) + ")");
    }
    if (padding_ == Padding::kValid) {
      out_h_ = input_.height - k0.extent_h() + 1;
      out_w_ = input_.width - k0.extent_w() + 1;
      if (out_h_ < 1 || out_w_ < 1) {
        throw ShapeError("dilated kernel extent does not fit the input under valid padding");
      }
      pad_top_ = pad_left_ = 0;
    } else {
      out_h_ = input_.height;
      out_w_ = input_.width;
      pad_top_ = (k0.extent_h() - 1) / 2;
      pad_left_ = (k0.extent_w() - 1) / 2;
    }
    // One (channels x kernels) matrix per tap location.
    for (Index i = 0; i < k0.height; ++i)
      for (Index j = 0; j < k0.width; ++j) {
        Matrix<Scalar> m(input_.channels, kernel_count());
        for (Index k = 0; k < kernel_count(); ++k)
          for (Index c = 0; c < input_.channels; ++c) m(c, k) = kernels_[k].tap(i, j, c);
        tap_mats_.push_back(std::move(m));
      }
  }

  const std::vector<Kernel>& kernels() const { return kernels_; }
  const SignalShape& input_shape() const { return input_; }
  Padding padding() const { return padding_; }
  Index dilation() const { return kernels_.front().dilation; }
  Index kernel_count() const { return static_cast<Index>(kernels_.size()); }
  Index out_height() const { return out_h_; }
  Index out_width() const { return out_w_; }
  Index out_positions() const { return out_h_ * out_w_; }
  SignalShape code_shape() const {
    return {out_h_, out_w_, kernel_count(), input_.one_d};
  }

  Index rows() const { return input_.size(); }
  Index cols() const { return out_positions() * kernel_count(); }

  StripeLayout stripe_layout() const {
    const Kernel& k = kernels_.front();
    return {kernel_count(), std::max(k.extent_h(), k.extent_w()), out_positions()};
  }

  /// D * code: transposed convolution (scatter of every code entry's kernel).
  Vector<Scalar> apply(const Vector<Scalar>& code) const {
    if (code.size() != cols()) {
      throw ShapeError("apply: code length " + std::to_string(code.size()) +
                       " != dictionary columns " + std::to_string(cols()));
    }
    Vector<Scalar> out = Vector<Scalar>::Zero(rows());
    RowMap x(out.data(), input_.positions(), input_.channels);
    ConstRowMap z(code.data(), out_positions(), kernel_count());
    for_each_run([&](Index tap, Index out_row, Index in_row, Index n) {
      x.middleRows(in_row, n).noalias() += z.middleRows(out_row, n) * tap_mats_[tap].transpose();
    });
    return out;
  }

  /// D^T * signal: correlation of the signal with each dilated kernel.
  Vector<Scalar> apply_adjoint(const Vector<Scalar>& signal) const {
    if (signal.size() != rows()) {
      throw ShapeError("apply_adjoint: signal length " + std::to_string(signal.size()) +
                       " != dictionary rows " + std::to_string(rows()));
    }
    Vector<Scalar> out = Vector<Scalar>::Zero(cols());
    RowMap z(out.data(), out_positions(), kernel_count());
    ConstRowMap x(signal.data(), input_.positions(), input_.channels);
    for_each_run([&](Index tap, Index out_row, Index in_row, Index n) {
      z.middleRows(out_row, n).noalias() += x.middleRows(in_row, n) * tap_mats_[tap];
    });
    return out;
  }

  Matrix<Scalar> to_matrix() const {
    require_materializable(rows(), cols());
    Matrix<Scalar> d = Matrix<Scalar>::Zero(rows(), cols());
    const Index w = kernel_count();
    for_each_placement([&](Index pos, Index in_base, Index tap_base) {
      for (Index k = 0; k < w; ++k)
        for (Index c = 0; c < input_.channels; ++c)
          d(in_base + c, pos * w + k) += kernels_[k].taps[tap_base + c];
    });
    return d;
  }

  /// Gradient of <D, G> with respect to every tap: each tap collects the
  /// entries of G at the matrix positions where it appears.
  std::vector<Vector<Scalar>> project_to_kernel_grad(const Matrix<Scalar>& dense_grad) const {
    if (dense_grad.rows() != rows() || dense_grad.cols() != cols()) {
      throw ShapeError("project_to_kernel_grad: gradient shape does not match dictionary");
    }
    std::vector<Vector<Scalar>> grads(kernels_.size());
    for (auto& g : grads) g = Vector<Scalar>::Zero(kernels_.front().tap_count());
    const Index w = kernel_count();
    for_each_placement([&](Index pos, Index in_base, Index tap_base) {
      for (Index k = 0; k < w; ++k)
        for (Index c = 0; c < input_.channels; ++c)
          grads[k][tap_base + c] += dense_grad(in_base + c, pos * w + k);
    });
    return grads;
  }

  /// Matrix-free form of project_to_kernel_grad(residual * code^T).
  std::vector<Vector<Scalar>> outer_kernel_grad(const Vector<Scalar>& residual,
                                                const Vector<Scalar>& code) const {
    if (residual.size() != rows() || code.size() != cols()) {
      throw ShapeError("outer_kernel_grad: shape mismatch");
    }
    std::vector<Vector<Scalar>> grads(kernels_.size());
    for (auto& g : grads) g = Vector<Scalar>::Zero(kernels_.front().tap_count());
    const Index w = kernel_count();
    for_each_placement([&](Index pos, Index in_base, Index tap_base) {
      for (Index k = 0; k < w; ++k) {
        const Scalar g = code[pos * w + k];
        if (g == Scalar(0)) continue;
        for (Index c = 0; c < input_.channels; ++c)
          grads[k][tap_base + c] += g * residual[in_base + c];
      }
    });
    return grads;
  }

  /// Same geometry, new taps.
  ConvDictionary with_taps(const std::vector<Vector<Scalar>>& taps) const {
    if (taps.size() != kernels_.size()) throw ShapeError("with_taps: kernel count mismatch");
    std::vector<Kernel> ks = kernels_;
    for (std::size_t k = 0; k < ks.size(); ++k) ks[k].taps = taps[k];
    return ConvDictionary(std::move(ks), input_, padding_);
  }

 private:
  // Calls f(output position, input base offset, tap base offset) once for
  // every (position, tap location) pair that lands inside the input.
  template <typename F>
  void for_each_placement(F&& f) const {
    const Kernel& k0 = kernels_.front();
    const Index s = k0.dilation;
    const Index c_in = input_.channels;
    for (Index oy = 0; oy < out_h_; ++oy) {
      for (Index ox = 0; ox < out_w_; ++ox) {
        const Index pos = oy * out_w_ + ox;
        for (Index i = 0; i < k0.height; ++i) {
          const Index iy = oy - pad_top_ + s * i;
          if (iy < 0 || iy >= input_.height) continue;
          for (Index j = 0; j < k0.width; ++j) {
            const Index ix = ox - pad_left_ + s * j;
            if (ix < 0 || ix >= input_.width) continue;
            f(pos, (iy * input_.width + ix) * c_in, (i * k0.width + j) * c_in);
          }
        }
      }
    }
  }

  // Calls f(tap index, first output position, first input position, count)
  // for every maximal run of output positions along a row that one tap
  // location maps into the input.
  template <typename F>
  void for_each_run(F&& f) const {
    const Kernel& k0 = kernels_.front();
    const Index s = k0.dilation;
    for (Index i = 0; i < k0.height; ++i) {
      for (Index j = 0; j < k0.width; ++j) {
        const Index dx = s * j - pad_left_;
        const Index lo = std::max<Index>(0, -dx);
        const Index hi = std::min<Index>(out_w_, input_.width - dx);
        if (hi <= lo) continue;
        for (Index oy = 0; oy < out_h_; ++oy) {
          const Index iy = oy - pad_top_ + s * i;
          if (iy < 0 || iy >= input_.height) continue;
          f(i * k0.width + j, oy * out_w_ + lo, iy * input_.width + lo + dx, hi - lo);
        }
      }
    }
  }

  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowMap = Eigen::Map<RowMat>;
  using ConstRowMap = Eigen::Map<const RowMat>;

  std::vector<Kernel> kernels_;
  SignalShape input_;
  Padding padding_;
  Index out_h_ = 0, out_w_ = 0, pad_top_ = 0, pad_left_ = 0;
  std::vector<Matrix<Scalar>> tap_mats_;
};

/// An explicit dense dictionary.
template <typename Scalar_>
class DenseDictionary {
 public:
  using Scalar = Scalar_;
  explicit DenseDictionary(Matrix<Scalar> m) : m_(std::move(m)) {}
  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  Vector<Scalar> apply(const Vector<Scalar>& code) const {
    if (code.size() != cols()) throw ShapeError("apply: code length mismatch");
    return m_ * code;
  }
  Vector<Scalar> apply_adjoint(const Vector<Scalar>& signal) const {
    if (signal.size() != rows()) throw ShapeError("apply_adjoint: signal length mismatch");
    return m_.transpose() * signal;
  }
  Matrix<Scalar> to_matrix() const { return m_; }
  const Matrix<Scalar>& matrix() const { return m_; }

 private:
  Matrix<Scalar> m_;
};

/// [I, D]: an identity block over the signal space followed by D's columns.
/// Codes are block-concatenated (identity part | D part).
template <LinearDictionary Inner>
class IdentityAugmented {
 public:
  using Scalar = typename Inner::Scalar;
  explicit IdentityAugmented(Inner inner) : inner_(std::move(inner)) {}

  const Inner& inner() const { return inner_; }
  Index rows() const { return inner_.rows(); }
  Index cols() const { return inner_.rows() + inner_.cols(); }
  Index identity_cols() const { return inner_.rows(); }

  Vector<Scalar> apply(const Vector<Scalar>& code) const {
    if (code.size() != cols()) throw ShapeError("apply: code length mismatch");
    return code.head(rows()) + inner_.apply(code.tail(inner_.cols()));
  }
  Vector<Scalar> apply_adjoint(const Vector<Scalar>& signal) const {
    if (signal.size() != rows()) throw ShapeError("apply_adjoint: signal length mismatch");
    Vector<Scalar> out(cols());
    out.head(rows()) = signal;
    out.tail(inner_.cols()) = inner_.apply_adjoint(signal);
    return out;
  }
  Matrix<Scalar> to_matrix() const {
    require_materializable(rows(), cols());
    Matrix<Scalar> d(rows(), cols());
    d.leftCols(rows()).setIdentity();
    d.rightCols(inner_.cols()) = inner_.to_matrix();
    return d;
  }

 private:
  Inner inner_;
};

/// The mixed-scale dense dictionary [I, F^T] over a same-padded (dilated)
/// convolution, so the identity block and the conv block share the signal
/// space.
template <typename Scalar_>
class MSDDictionary : public IdentityAugmented<ConvDictionary<Scalar_>> {
  using Base = IdentityAugmented<ConvDictionary<Scalar_>>;

 public:
  using Scalar = Scalar_;

  explicit MSDDictionary(ConvDictionary<Scalar> conv) : Base(check(std::move(conv))) {}

  const ConvDictionary<Scalar>& conv() const { return this->inner(); }
  Index positions() const { return conv().input_shape().positions(); }
  Index input_channels() const { return conv().input_shape().channels; }
  Index width() const { return conv().kernel_count(); }
  SignalShape output_shape() const {
    return conv().input_shape().with_channels(input_channels() + width());
  }

  std::vector<Vector<Scalar>> project_to_kernel_grad(const Matrix<Scalar>& dense_grad) const {
    if (dense_grad.rows() != this->rows() || dense_grad.cols() != this->cols()) {
      throw ShapeError("project_to_kernel_grad: gradient shape does not match dictionary");
    }
    return conv().project_to_kernel_grad(dense_grad.rightCols(conv().cols()));
  }

  /// Block code (identity part | conv part) to the channel-concatenated
  /// feature stack, position-major with c_in + w channels per position.
  Vector<Scalar> to_feature_stack(const Vector<Scalar>& code) const {
    if (code.size() != this->cols()) throw LayoutError("to_feature_stack: code length mismatch");
    const Index p = positions(), c = input_channels(), w = width();
    Vector<Scalar> stack(p * (c + w));
    for (Index i = 0; i < p; ++i) {
      stack.segment(i * (c + w), c) = code.segment(i * c, c);
      stack.segment(i * (c + w) + c, w) = code.segment(p * c + i * w, w);
    }
    return stack;
  }

  Vector<Scalar> from_feature_stack(const Vector<Scalar>& stack) const {
    const Index p = positions(), c = input_channels(), w = width();
    if (stack.size() != p * (c + w)) throw LayoutError("from_feature_stack: stack length mismatch");
    Vector<Scalar> code(this->cols());
    for (Index i = 0; i < p; ++i) {
      code.segment(i * c, c) = stack.segment(i * (c + w), c);
      code.segment(p * c + i * w, w) = stack.segment(i * (c + w) + c, w);
    }
    return code;
  }

 private:
  static ConvDictionary<Scalar> check(ConvDictionary<Scalar> conv) {
    if (conv.padding() != Padding::kSameZero) {
      throw ShapeError("MSD dictionary requires same-zero padding");
    }
    return conv;
  }
};

/// max_{i != j} |<d_i, d_j>| over unit-normalized columns.
template <LinearDictionary Dict>
typename Dict::Scalar mutual_coherence(const Dict& dict) {
  using Scalar = typename Dict::Scalar;
  Matrix<Scalar> d = dict.to_matrix();
  for (Index j = 0; j < d.cols(); ++j) {
    const Scalar norm = d.col(j).norm();
    if (norm == Scalar(0)) {
      throw DegenerateDictionaryError("mutual_coherence: column " + std::to_string(j) +
                                      " is zero");
    }
    d.col(j) /= norm;
  }
  if (d.cols() < 2) return Scalar(0);
  Matrix<Scalar> gram = d.transpose() * d;
  gram.diagonal().setZero();
  return std::min(Scalar(1), gram.cwiseAbs().maxCoeff());
}

/// Largest non-zero count over windows of 2n - 1 consecutive positions.
template <typename Derived>
Index stripe_sparsity(const Eigen::MatrixBase<Derived>& code, const StripeLayout& layout) {
  if (layout.m < 1 || layout.n < 1 || code.size() != layout.code_length()) {
    throw LayoutError("stripe_sparsity: code length " + std::to_string(code.size()) +
                      " does not match layout " + std::to_string(layout.code_length()));
  }
  std::vector<Index> per_pos(layout.positions, 0);
  for (Index p = 0; p < layout.positions; ++p)
    for (Index c = 0; c < layout.m; ++c)
      if (code[p * layout.m + c] != 0) ++per_pos[p];

  const Index span = std::min<Index>(2 * layout.n - 1, layout.positions);
  Index window = 0, best = 0;
  for (Index p = 0; p < layout.positions; ++p) {
    window += per_pos[p];
    if (p >= span) window -= per_pos[p - span];
    best = std::max(best, window);
  }
  return best;
}

}  // namespace csc
