#include "sepcnn/layers.hpp"

#include <cmath>

namespace sepcnn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::SeparableConv2D: return "SeparableConv2D";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::SEBlock: return "SEBlock";
    case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Softmax: return "Softmax";
  }
  return "Unknown";
}

namespace {

template <typename T>
void accumulate(BasicTensor<T>& into, const BasicTensor<T>& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

template <typename T>
BasicTensor<T> glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return BasicTensor<T>::random(std::move(shape), GlorotDist{fan_in, fan_out}, rng);
}

}  // namespace

template <typename T>
void Layer<T>::zero_grad() {
  for (auto& slot : params()) {
    if (slot.grad) slot.grad->fill(T(0));
  }
}

template <typename T>
std::size_t Layer<T>::trainable_count() {
  std::size_t n = 0;
  for (auto& slot : params()) {
    if (slot.trainable) n += slot.value->size();
  }
  return n;
}

template <typename T>
std::size_t Layer<T>::non_trainable_count() {
  std::size_t n = 0;
  for (auto& slot : params()) {
    if (!slot.trainable) n += slot.value->size();
  }
  return n;
}

template <typename T>
void Layer<T>::require_forward() const {
  if (!has_cache_) throw Error(ErrorCode::BackwardBeforeForward, name() + " backward called before forward");
}

// SeparableConv2D -----------------------------------------------------------

template <typename T>
SeparableConv2D<T>::SeparableConv2D(std::size_t in_channels, std::size_t filters, ConvGeometry geom, Rng& rng)
    : geom_(geom) {
  const std::size_t taps = geom.kh * geom.kw;
  depthwise_kernel = glorot<T>(Shape{geom.kh, geom.kw, in_channels}, taps * in_channels, taps, rng);
  pointwise_kernel = glorot<T>(Shape{in_channels, filters}, in_channels, filters, rng);
  bias = BasicTensor<T>(Shape{filters});
  grad_depthwise_kernel = BasicTensor<T>(depthwise_kernel.shape());
  grad_pointwise_kernel = BasicTensor<T>(pointwise_kernel.shape());
  grad_bias = BasicTensor<T>(bias.shape());
}

template <typename T>
Shape SeparableConv2D<T>::output_shape(const Shape& input) const {
  return Shape{input[0], geom_.out_h(input[1]), geom_.out_w(input[2]), pointwise_kernel.dim(1)};
}

template <typename T>
BasicTensor<T> SeparableConv2D<T>::forward(const BasicTensor<T>& x, Mode) {
  input_ = x;
  depthwise_out_ = depthwise_conv2d(x, depthwise_kernel, geom_);
  this->has_cache_ = true;
  return pointwise_conv2d(depthwise_out_, pointwise_kernel, bias);
}

template <typename T>
BasicTensor<T> SeparableConv2D<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  auto pw = pointwise_conv2d_backward(depthwise_out_, pointwise_kernel, grad);
  auto dw = depthwise_conv2d_backward(input_, depthwise_kernel, pw.input, geom_);
  accumulate(grad_pointwise_kernel, pw.weights);
  accumulate(grad_bias, pw.bias);
  accumulate(grad_depthwise_kernel, dw.kernels);
  return std::move(dw.input);
}

template <typename T>
std::vector<ParamSlot<T>> SeparableConv2D<T>::params() {
  return {{"depthwise_kernel", &depthwise_kernel, &grad_depthwise_kernel, true},
          {"pointwise_kernel", &pointwise_kernel, &grad_pointwise_kernel, true},
          {"bias", &bias, &grad_bias, true}};
}

// BatchNorm -----------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, double epsilon, double momentum)
    : gamma(Shape{channels}, T(1)),
      beta(Shape{channels}),
      moving_mean(Shape{channels}),
      moving_variance(Shape{channels}, T(1)),
      grad_gamma(Shape{channels}),
      grad_beta(Shape{channels}),
      epsilon_(epsilon),
      momentum_(momentum) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::BadConfig, "batchnorm epsilon must be positive");
  if (!(momentum > 0.0 && momentum <= 1.0)) throw Error(ErrorCode::BadConfig, "batchnorm momentum must be in (0,1]");
}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& x, Mode mode) {
  const std::size_t C = gamma.size();
  if (x.rank() < 2 || x.dim(x.rank() - 1) != C) {
    throw Error(ErrorCode::ChannelMismatch, "batchnorm over " + std::to_string(C) + " channels got " +
                                                x.shape().to_string());
  }
  const std::size_t M = x.size() / C;
  batch_stats_ = mode != Mode::infer;
  inv_std_.assign(C, T(0));
  std::vector<T> mean(C);

  if (batch_stats_) {
    if (M < 2) throw Error(ErrorCode::DegenerateBatch, "batch statistics need at least 2 values per channel");
    std::vector<double> sum(C, 0.0), sq(C, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) sum[c] += static_cast<double>(x[i * C + c]);
    }
    for (std::size_t c = 0; c < C; ++c) mean[c] = static_cast<T>(sum[c] / static_cast<double>(M));
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double d = static_cast<double>(x[i * C + c]) - static_cast<double>(mean[c]);
        sq[c] += d * d;
      }
    }
    const T mom = static_cast<T>(momentum_);
    const T one_minus_mom = static_cast<T>(1.0 - momentum_);
    for (std::size_t c = 0; c < C; ++c) {
      const T var = static_cast<T>(sq[c] / static_cast<double>(M));
      inv_std_[c] = T(1) / std::sqrt(var + static_cast<T>(epsilon_));
      moving_mean[c] = mom * moving_mean[c] + one_minus_mom * mean[c];
      moving_variance[c] = mom * moving_variance[c] + one_minus_mom * var;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = moving_mean[c];
      inv_std_[c] = T(1) / std::sqrt(moving_variance[c] + static_cast<T>(epsilon_));
    }
  }

  normalized_ = BasicTensor<T>(x.shape());
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = i * C + c;
      normalized_[k] = (x[k] - mean[c]) * inv_std_[c];
      y[k] = normalized_[k] * gamma[c] + beta[c];
    }
  }
  this->has_cache_ = true;
  return y;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  if (grad.shape() != normalized_.shape()) throw Error(ErrorCode::ShapeMismatch, "batchnorm grad shape");
  const std::size_t C = gamma.size();
  const std::size_t M = grad.size() / C;
  std::vector<T> sum_g(C, T(0)), sum_gx(C, T(0));
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      sum_g[c] += grad[i * C + c];
      sum_gx[c] += grad[i * C + c] * normalized_[i * C + c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    grad_beta[c] += sum_g[c];
    grad_gamma[c] += sum_gx[c];
  }

  BasicTensor<T> gx(grad.shape());
  if (!batch_stats_) {
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t c = 0; c < C; ++c) gx[i * C + c] = grad[i * C + c] * gamma[c] * inv_std_[c];
    }
    return gx;
  }
  // dx = gamma * inv_std / M * (M * g - sum(g) - xhat * sum(g * xhat))
  const T m = static_cast<T>(M);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = i * C + c;
      gx[k] = gamma[c] * inv_std_[c] / m * (m * grad[k] - sum_g[c] - normalized_[k] * sum_gx[c]);
    }
  }
  return gx;
}

template <typename T>
std::vector<ParamSlot<T>> BatchNorm<T>::params() {
  return {{"gamma", &gamma, &grad_gamma, true},
          {"beta", &beta, &grad_beta, true},
          {"moving_mean", &moving_mean, nullptr, false},
          {"moving_variance", &moving_variance, nullptr, false}};
}

// ReLU / pooling --------------------------------------------------------------

template <typename T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& x, Mode) {
  input_ = x;
  this->has_cache_ = true;
  return relu(x);
}

template <typename T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  return relu_backward(input_, grad);
}

template <typename T>
Shape MaxPool2D<T>::output_shape(const Shape& input) const {
  return Shape{input[0], window_.out_h(input[1]), window_.out_w(input[2]), input[3]};
}

template <typename T>
BasicTensor<T> MaxPool2D<T>::forward(const BasicTensor<T>& x, Mode) {
  auto r = max_pool2d(x, window_);
  input_shape_ = x.shape();
  argmax_ = std::move(r.argmax);
  this->has_cache_ = true;
  return std::move(r.output);
}

template <typename T>
BasicTensor<T> MaxPool2D<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  return max_pool2d_backward(grad, argmax_, input_shape_);
}

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::forward(const BasicTensor<T>& x, Mode) {
  input_shape_ = x.shape();
  this->has_cache_ = true;
  return global_avg_pool(x);
}

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  return global_avg_pool_backward(grad, input_shape_);
}

// SEBlock -------------------------------------------------------------------

template <typename T>
std::size_t SEBlock<T>::reduced_width(std::size_t channels, std::size_t ratio) {
  if (ratio == 0) throw Error(ErrorCode::BadConfig, "SE ratio must be positive");
  return std::max<std::size_t>(1, channels / ratio);
}

template <typename T>
SEBlock<T>::SEBlock(std::size_t channels, std::size_t ratio, Rng& rng) : ratio_(ratio) {
  const std::size_t r = reduced_width(channels, ratio);
  squeeze_kernel = glorot<T>(Shape{channels, r}, channels, r, rng);
  squeeze_bias = BasicTensor<T>(Shape{r});
  excite_kernel = glorot<T>(Shape{r, channels}, r, channels, rng);
  excite_bias = BasicTensor<T>(Shape{channels});
  grad_squeeze_kernel = BasicTensor<T>(squeeze_kernel.shape());
  grad_squeeze_bias = BasicTensor<T>(squeeze_bias.shape());
  grad_excite_kernel = BasicTensor<T>(excite_kernel.shape());
  grad_excite_bias = BasicTensor<T>(excite_bias.shape());
}

template <typename T>
BasicTensor<T> SEBlock<T>::forward(const BasicTensor<T>& x, Mode) {
  if (x.rank() != 4 || x.dim(3) != squeeze_kernel.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "SE block over " + std::to_string(squeeze_kernel.dim(0)) +
                                              " channels got " + x.shape().to_string());
  }
  input_ = x;
  pooled_ = global_avg_pool(x);
  hidden_ = affine(pooled_, squeeze_kernel, squeeze_bias);
  activated_ = relu(hidden_);
  scale_ = sigmoid(affine(activated_, excite_kernel, excite_bias));

  const std::size_t N = x.dim(0), P = x.dim(1) * x.dim(2), C = x.dim(3);
  BasicTensor<T> y(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* s = scale_.raw() + n * C;
    for (std::size_t p = 0; p < P; ++p) {
      const std::size_t base = (n * P + p) * C;
      for (std::size_t c = 0; c < C; ++c) y[base + c] = x[base + c] * s[c];
    }
  }
  this->has_cache_ = true;
  return y;
}

template <typename T>
BasicTensor<T> SEBlock<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  if (grad.shape() != input_.shape()) throw Error(ErrorCode::ShapeMismatch, "SE grad shape");
  const std::size_t N = input_.dim(0), P = input_.dim(1) * input_.dim(2), C = input_.dim(3);

  // Rescaling path: d/dx (x * s) with s held fixed, plus d/ds.
  BasicTensor<T> gx(input_.shape());
  BasicTensor<T> gs(Shape{N, C});
  for (std::size_t n = 0; n < N; ++n) {
    const T* s = scale_.raw() + n * C;
    T* gsn = gs.raw() + n * C;
    for (std::size_t p = 0; p < P; ++p) {
      const std::size_t base = (n * P + p) * C;
      for (std::size_t c = 0; c < C; ++c) {
        gx[base + c] = grad[base + c] * s[c];
        gsn[c] += grad[base + c] * input_[base + c];
      }
    }
  }

  // Squeeze path: sigmoid -> dense -> relu -> dense -> GAP.
  auto excite = affine_backward(activated_, excite_kernel, sigmoid_backward(scale_, gs));
  auto squeeze = affine_backward(pooled_, squeeze_kernel, relu_backward(hidden_, excite.input));
  accumulate(grad_excite_kernel, excite.weights);
  accumulate(grad_excite_bias, excite.bias);
  accumulate(grad_squeeze_kernel, squeeze.weights);
  accumulate(grad_squeeze_bias, squeeze.bias);

  accumulate(gx, global_avg_pool_backward(squeeze.input, input_.shape()));
  return gx;
}

template <typename T>
std::vector<ParamSlot<T>> SEBlock<T>::params() {
  return {{"squeeze_kernel", &squeeze_kernel, &grad_squeeze_kernel, true},
          {"squeeze_bias", &squeeze_bias, &grad_squeeze_bias, true},
          {"excite_kernel", &excite_kernel, &grad_excite_kernel, true},
          {"excite_bias", &excite_bias, &grad_excite_bias, true}};
}

// Dense ---------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t units, Rng& rng)
    : kernel(glorot<T>(Shape{in_features, units}, in_features, units, rng)),
      bias(Shape{units}),
      grad_kernel(Shape{in_features, units}),
      grad_bias(Shape{units}) {}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& x, Mode) {
  auto y = affine(x, kernel, bias);
  input_ = x;
  this->has_cache_ = true;
  return y;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  auto g = affine_backward(input_, kernel, grad);
  accumulate(grad_kernel, g.weights);
  accumulate(grad_bias, g.bias);
  return std::move(g.input);
}

template <typename T>
std::vector<ParamSlot<T>> Dense<T>::params() {
  return {{"kernel", &kernel, &grad_kernel, true}, {"bias", &bias, &grad_bias, true}};
}

// Dropout / Softmax -----------------------------------------------------------

template <typename T>
Dropout<T>::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::BadConfig, "dropout rate must be in [0,1)");
}

template <typename T>
BasicTensor<T> Dropout<T>::forward(const BasicTensor<T>& x, Mode mode) {
  this->has_cache_ = true;
  active_ = mode == Mode::train;
  if (!active_) {
    mask_.assign(x.size(), 1);
    return x;
  }
  const double keep = 1.0 - rate_;
  const T denom = static_cast<T>(keep);
  mask_.resize(x.size());
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng_.bernoulli(keep) ? 1 : 0;
    y[i] = mask_[i] ? x[i] / denom : T(0);
  }
  return y;
}

template <typename T>
BasicTensor<T> Dropout<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  if (grad.size() != mask_.size()) throw Error(ErrorCode::ShapeMismatch, "dropout grad shape");
  if (!active_) return grad;
  const T denom = static_cast<T>(1.0 - rate_);
  BasicTensor<T> g(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] = mask_[i] ? grad[i] / denom : T(0);
  return g;
}

template <typename T>
BasicTensor<T> Softmax<T>::forward(const BasicTensor<T>& x, Mode) {
  probs_ = softmax(x);
  this->has_cache_ = true;
  return probs_;
}

template <typename T>
BasicTensor<T> Softmax<T>::backward(const BasicTensor<T>& grad) {
  this->require_forward();
  return softmax_backward(probs_, grad);
}

#define SEPCNN_INSTANTIATE_LAYERS(T) \
  template class Layer<T>;           \
  template class SeparableConv2D<T>; \
  template class BatchNorm<T>;       \
  template class ReLU<T>;            \
  template class MaxPool2D<T>;       \
  template class SEBlock<T>;         \
  template class GlobalAvgPool<T>;   \
  template class Dense<T>;           \
  template class Dropout<T>;         \
  template class Softmax<T>;

SEPCNN_INSTANTIATE_LAYERS(float)
SEPCNN_INSTANTIATE_LAYERS(double)

#undef SEPCNN_INSTANTIATE_LAYERS

}  // namespace sepcnn
