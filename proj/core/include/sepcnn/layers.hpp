#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sepcnn/ops.hpp"
#include "sepcnn/rng.hpp"
#include "sepcnn/tensor.hpp"

namespace sepcnn {

/// train: batch statistics and dropout masks. infer: moving statistics,
/// dropout is the identity. train_no_dropout: batch statistics with dropout
/// off, which makes the loss a deterministic function of the parameters.
enum class Mode { train, infer, train_no_dropout };

enum class LayerKind { SeparableConv2D, BatchNorm, ReLU, MaxPool2D, SEBlock, GlobalAvgPool, Dense, Dropout, Softmax };

std::string_view to_string(LayerKind kind);

/// A named parameter tensor and its gradient accumulator. Non-trainable
/// slots (BN moving statistics) have no gradient.
template <typename T>
struct ParamSlot {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;
  bool trainable = true;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Output shape for a full (batched) input shape.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) = 0;
  /// Returns the input gradient and adds parameter gradients into the
  /// accumulators. Requires a preceding forward.
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad) = 0;
  /// Stable order; the same tensors on every call.
  virtual std::vector<ParamSlot<T>> params() { return {}; }

  std::string name() const { return std::string(to_string(kind())); }
  void zero_grad();
  std::size_t trainable_count();
  std::size_t non_trainable_count();

 protected:
  void require_forward() const;
  bool has_cache_ = false;
};

template <typename T>
class SeparableConv2D final : public Layer<T> {
 public:
  SeparableConv2D(std::size_t in_channels, std::size_t filters, ConvGeometry geom, Rng& rng);

  LayerKind kind() const override { return LayerKind::SeparableConv2D; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;
  std::vector<ParamSlot<T>> params() override;

  const ConvGeometry& geometry() const { return geom_; }

  BasicTensor<T> depthwise_kernel, pointwise_kernel, bias;
  BasicTensor<T> grad_depthwise_kernel, grad_pointwise_kernel, grad_bias;

 private:
  ConvGeometry geom_;
  BasicTensor<T> input_, depthwise_out_;
};

/// Per-channel batch normalization over every axis except the last.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(std::size_t channels, double epsilon = 1e-3, double momentum = 0.99);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;
  std::vector<ParamSlot<T>> params() override;

  double epsilon() const { return epsilon_; }
  double momentum() const { return momentum_; }

  BasicTensor<T> gamma, beta, moving_mean, moving_variance;
  BasicTensor<T> grad_gamma, grad_beta;

 private:
  double epsilon_;
  double momentum_;
  bool batch_stats_ = false;
  BasicTensor<T> normalized_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;

 private:
  BasicTensor<T> input_;
};

template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  explicit MaxPool2D(PoolWindow window = {}) : window_(window) {}

  LayerKind kind() const override { return LayerKind::MaxPool2D; }
  Shape output_shape(const Shape& input) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;

 private:
  PoolWindow window_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Squeeze-and-excitation: s = sigmoid(Dense(ReLU(Dense(GAP(x))))), y = x * s
/// per sample and channel. Reduced width is max(1, C / ratio).
template <typename T>
class SEBlock final : public Layer<T> {
 public:
  SEBlock(std::size_t channels, std::size_t ratio, Rng& rng);

  static std::size_t reduced_width(std::size_t channels, std::size_t ratio);

  LayerKind kind() const override { return LayerKind::SEBlock; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;
  std::vector<ParamSlot<T>> params() override;

  std::size_t ratio() const { return ratio_; }
  /// Channel weights s from the last forward, shape (N,C).
  const BasicTensor<T>& scale() const { return scale_; }

  BasicTensor<T> squeeze_kernel, squeeze_bias, excite_kernel, excite_bias;
  BasicTensor<T> grad_squeeze_kernel, grad_squeeze_bias, grad_excite_kernel, grad_excite_bias;

 private:
  std::size_t ratio_;
  BasicTensor<T> input_, pooled_, hidden_, activated_, scale_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }
  Shape output_shape(const Shape& input) const override { return Shape{input[0], input[3]}; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;

 private:
  Shape input_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t units, Rng& rng);

  LayerKind kind() const override { return LayerKind::Dense; }
  Shape output_shape(const Shape& input) const override { return Shape{input[0], kernel.dim(1)}; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;
  std::vector<ParamSlot<T>> params() override;

  BasicTensor<T> kernel, bias;
  BasicTensor<T> grad_kernel, grad_bias;

 private:
  BasicTensor<T> input_;
};

/// Inverted dropout: kept elements are divided by (1 - p) at train time.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed);

  LayerKind kind() const override { return LayerKind::Dropout; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;

  double rate() const { return rate_; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  /// 1 where the last train-mode forward kept the element.
  const std::vector<unsigned char>& mask() const { return mask_; }

 private:
  double rate_;
  Rng rng_;
  bool active_ = false;
  std::vector<unsigned char> mask_;
};

template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  Shape output_shape(const Shape& input) const override { return input; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad) override;

 private:
  BasicTensor<T> probs_;
};

}  // namespace sepcnn
