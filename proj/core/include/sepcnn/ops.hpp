#pragma once

#include <cstddef>
#include <vector>

#include "sepcnn/tensor.hpp"

// Stateless numerical kernels on (N, H, W, C) tensors. Each forward has a
// matching backward; all are instantiated for float and double.
//
// Convolutions are cross-correlations (no kernel flip). Every output element
// is accumulated in a fixed order, so results are independent of the worker
// count set through parallel.hpp.

namespace sepcnn {

enum class Padding { same, valid };

struct ConvGeometry {
  std::size_t kh = 3;
  std::size_t kw = 3;
  std::size_t sh = 1;
  std::size_t sw = 1;
  Padding padding = Padding::same;

  /// valid: floor((in - k) / s) + 1; same: ceil(in / s).
  std::size_t out_h(std::size_t in) const;
  std::size_t out_w(std::size_t in) const;
  /// Leading zero-padding; same padding puts floor(total/2) before and the rest after.
  std::size_t pad_top(std::size_t in_h) const;
  std::size_t pad_left(std::size_t in_w) const;
};

struct PoolWindow {
  std::size_t ph = 2;
  std::size_t pw = 2;
  std::size_t sh = 2;
  std::size_t sw = 2;

  std::size_t out_h(std::size_t in) const { return (in - ph) / sh + 1; }
  std::size_t out_w(std::size_t in) const { return (in - pw) / sw + 1; }
};

template <typename T>
struct DepthwiseGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernels;
};

template <typename T>
struct AffineGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// Output of max pooling; argmax[i] is the flat input offset that won output i.
template <typename T>
struct MaxPoolResult {
  BasicTensor<T> output;
  std::vector<std::size_t> argmax;
};

// Convolutions ---------------------------------------------------------------

/// input (N,H,W,C), kernels (kh,kw,C). Channels never mix.
template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const ConvGeometry& geom);

template <typename T>
DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                                            const BasicTensor<T>& grad_out, const ConvGeometry& geom);

/// 1x1 convolution: per-pixel affine map over channels. weights (Cin,Cout), bias (Cout).
template <typename T>
BasicTensor<T> pointwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias);

template <typename T>
AffineGrads<T> pointwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                         const BasicTensor<T>& grad_out);

/// Exactly pointwise_conv2d(depthwise_conv2d(input, dw, geom), pw, bias).
template <typename T>
BasicTensor<T> separable_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& dw_kernels,
                                const BasicTensor<T>& pw_weights, const BasicTensor<T>& bias,
                                const ConvGeometry& geom);

/// Dense convolution. kernels (kh,kw,Cin,Cout), bias (Cout).
template <typename T>
BasicTensor<T> standard_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& bias, const ConvGeometry& geom);

template <typename T>
AffineGrads<T> standard_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                                        const BasicTensor<T>& grad_out, const ConvGeometry& geom);

// Affine map on rows: x (N,Din), w (Din,Dout), b (Dout).
template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b);

template <typename T>
AffineGrads<T> affine_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& grad_out);

// Pooling --------------------------------------------------------------------

/// Valid coverage; a trailing remainder that does not fill a window is dropped.
/// Ties go to the first position in row-major window order.
template <typename T>
MaxPoolResult<T> max_pool2d(const BasicTensor<T>& input, const PoolWindow& window);

template <typename T>
BasicTensor<T> max_pool2d_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                   const Shape& input_shape);

/// (N,H,W,C) -> (N,C) spatial mean.
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

// Elementwise ----------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Passes grad where x > 0; the subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad);

template <typename T>
T sigmoid(T x);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

/// Takes the sigmoid output y: grad * y * (1 - y).
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad);

/// Row-wise softmax over (N,K) with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Vector-Jacobian product given the softmax output.
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad);

}  // namespace sepcnn
