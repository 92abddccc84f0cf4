#include "sepcnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sepcnn/parallel.hpp"

namespace sepcnn {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.rank() != rank) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " expects rank " + std::to_string(rank) + ", got " + s.to_string());
  }
}

void require_geometry(const ConvGeometry& g) {
  if (g.kh == 0 || g.kw == 0 || g.sh == 0 || g.sw == 0) {
    throw Error(ErrorCode::BadConfig, "kernel and stride must be positive");
  }
}

void require_fits(const ConvGeometry& g, std::size_t h, std::size_t w) {
  if (g.padding == Padding::valid && (h < g.kh || w < g.kw)) {
    throw Error(ErrorCode::WindowTooLarge, "kernel larger than input under valid padding");
  }
}

// Signed input coordinate for output position o and kernel tap k.
inline std::ptrdiff_t tap(std::size_t o, std::size_t stride, std::size_t k, std::size_t pad) {
  return static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
}

}  // namespace

std::size_t ConvGeometry::out_h(std::size_t in) const {
  return padding == Padding::same ? (in + sh - 1) / sh : (in - kh) / sh + 1;
}

std::size_t ConvGeometry::out_w(std::size_t in) const {
  return padding == Padding::same ? (in + sw - 1) / sw : (in - kw) / sw + 1;
}

std::size_t ConvGeometry::pad_top(std::size_t in_h) const {
  if (padding == Padding::valid) return 0;
  const std::size_t needed = (out_h(in_h) - 1) * sh + kh;
  return needed > in_h ? (needed - in_h) / 2 : 0;
}

std::size_t ConvGeometry::pad_left(std::size_t in_w) const {
  if (padding == Padding::valid) return 0;
  const std::size_t needed = (out_w(in_w) - 1) * sw + kw;
  return needed > in_w ? (needed - in_w) / 2 : 0;
}

// Depthwise ------------------------------------------------------------------

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                                const ConvGeometry& geom) {
  require_rank(input.shape(), 4, "depthwise_conv2d input");
  require_rank(kernels.shape(), 3, "depthwise_conv2d kernels");
  require_geometry(geom);
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  if (kernels.dim(2) != C) {
    throw Error(ErrorCode::ChannelMismatch, "depthwise kernels have " + std::to_string(kernels.dim(2)) +
                                                " channels, input has " + std::to_string(C));
  }
  ConvGeometry g = geom;
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  require_fits(g, H, W);
  const std::size_t OH = g.out_h(H), OW = g.out_w(W), pt = g.pad_top(H), pl = g.pad_left(W);

  BasicTensor<T> out(Shape{N, OH, OW, C});
  const T* in = input.raw();
  const T* k = kernels.raw();
  T* o = out.raw();
  parallel_for(N, [&](std::size_t n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        T* dst = o + ((n * OH + oy) * OW + ox) * C;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto iy = tap(oy, g.sh, ky, pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const auto ix = tap(ox, g.sw, kx, pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const T* src = in + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
            const T* kk = k + (ky * g.kw + kx) * C;
            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c] * kk[c];
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                                            const BasicTensor<T>& grad_out, const ConvGeometry& geom) {
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  ConvGeometry g = geom;
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  const std::size_t OH = g.out_h(H), OW = g.out_w(W), pt = g.pad_top(H), pl = g.pad_left(W);
  if (grad_out.shape() != Shape{N, OH, OW, C}) {
    throw Error(ErrorCode::ShapeMismatch, "depthwise grad has shape " + grad_out.shape().to_string());
  }

  DepthwiseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape())};
  const T* in = input.raw();
  const T* k = kernels.raw();
  const T* go = grad_out.raw();
  T* gi = grads.input.raw();
  T* gk = grads.kernels.raw();

  parallel_for(N, [&](std::size_t n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const T* src = go + ((n * OH + oy) * OW + ox) * C;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto iy = tap(oy, g.sh, ky, pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const auto ix = tap(ox, g.sw, kx, pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            T* dst = gi + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
            const T* kk = k + (ky * g.kw + kx) * C;
            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c] * kk[c];
          }
        }
      }
    }
  });

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const T* src = go + ((n * OH + oy) * OW + ox) * C;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto iy = tap(oy, g.sh, ky, pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const auto ix = tap(ox, g.sw, kx, pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const T* x = in + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C;
            T* dk = gk + (ky * g.kw + kx) * C;
            for (std::size_t c = 0; c < C; ++c) dk[c] += src[c] * x[c];
          }
        }
      }
    }
  }
  return grads;
}

// Pointwise / affine -----------------------------------------------------------

namespace {

// rows x Cin times (Cin, Cout) plus bias, one row per pixel.
template <typename T>
void rows_affine(const T* x, const T* w, const T* b, T* y, std::size_t rows, std::size_t cin, std::size_t cout) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cin;
    T* yr = y + r * cout;
    for (std::size_t co = 0; co < cout; ++co) yr[co] = b[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T a = xr[ci];
      const T* wr = w + ci * cout;
      for (std::size_t co = 0; co < cout; ++co) yr[co] += a * wr[co];
    }
  }
}

template <typename T>
void rows_affine_backward(const T* x, const T* w, const T* gy, T* gx, T* gw, T* gb, std::size_t rows,
                          std::size_t cin, std::size_t cout) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = gy + r * cout;
    T* gxr = gx + r * cin;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* wr = w + ci * cout;
      T acc = T(0);
      for (std::size_t co = 0; co < cout; ++co) acc += g[co] * wr[co];
      gxr[ci] = acc;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = gy + r * cout;
    const T* xr = x + r * cin;
    for (std::size_t co = 0; co < cout; ++co) gb[co] += g[co];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T a = xr[ci];
      T* gwr = gw + ci * cout;
      for (std::size_t co = 0; co < cout; ++co) gwr[co] += a * g[co];
    }
  }
}

template <typename T>
void check_affine(std::size_t cin, const BasicTensor<T>& w, const BasicTensor<T>& b, const char* what) {
  require_rank(w.shape(), 2, what);
  if (w.dim(0) != cin) {
    throw Error(ErrorCode::ChannelMismatch, std::string(what) + ": weights have " + std::to_string(w.dim(0)) +
                                                " rows, input has " + std::to_string(cin) + " channels");
  }
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": bias must have " + std::to_string(w.dim(1)) +
                                              " entries");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> pointwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias) {
  require_rank(input.shape(), 4, "pointwise_conv2d input");
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Cin = input.dim(3);
  check_affine(Cin, weights, bias, "pointwise_conv2d");
  const std::size_t Cout = weights.dim(1);
  BasicTensor<T> out(Shape{N, H, W, Cout});
  const std::size_t per_image = H * W;
  parallel_for(N, [&](std::size_t n) {
    rows_affine(input.raw() + n * per_image * Cin, weights.raw(), bias.raw(), out.raw() + n * per_image * Cout,
                per_image, Cin, Cout);
  });
  return out;
}

template <typename T>
AffineGrads<T> pointwise_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                         const BasicTensor<T>& grad_out) {
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Cin = input.dim(3);
  const std::size_t Cout = weights.dim(1);
  if (grad_out.shape() != Shape{N, H, W, Cout}) {
    throw Error(ErrorCode::ShapeMismatch, "pointwise grad has shape " + grad_out.shape().to_string());
  }
  AffineGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>(Shape{Cout})};
  rows_affine_backward(input.raw(), weights.raw(), grad_out.raw(), g.input.raw(), g.weights.raw(), g.bias.raw(),
                       N * H * W, Cin, Cout);
  return g;
}

template <typename T>
BasicTensor<T> separable_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& dw_kernels,
                                const BasicTensor<T>& pw_weights, const BasicTensor<T>& bias,
                                const ConvGeometry& geom) {
  return pointwise_conv2d(depthwise_conv2d(input, dw_kernels, geom), pw_weights, bias);
}

template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  require_rank(x.shape(), 2, "dense input");
  if (w.rank() != 2 || w.dim(0) != x.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch, "dense weights " + w.shape().to_string() + " do not accept input " +
                                              x.shape().to_string());
  }
  check_affine(x.dim(1), w, b, "dense");
  BasicTensor<T> y(Shape{x.dim(0), w.dim(1)});
  rows_affine(x.raw(), w.raw(), b.raw(), y.raw(), x.dim(0), x.dim(1), w.dim(1));
  return y;
}

template <typename T>
AffineGrads<T> affine_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& grad_out) {
  if (grad_out.shape() != Shape{x.dim(0), w.dim(1)}) {
    throw Error(ErrorCode::ShapeMismatch, "dense grad has shape " + grad_out.shape().to_string());
  }
  AffineGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape()), BasicTensor<T>(Shape{w.dim(1)})};
  rows_affine_backward(x.raw(), w.raw(), grad_out.raw(), g.input.raw(), g.weights.raw(), g.bias.raw(), x.dim(0),
                       x.dim(1), w.dim(1));
  return g;
}

// Standard convolution ---------------------------------------------------------

template <typename T>
BasicTensor<T> standard_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                               const BasicTensor<T>& bias, const ConvGeometry& geom) {
  require_rank(input.shape(), 4, "standard_conv2d input");
  require_rank(kernels.shape(), 4, "standard_conv2d kernels");
  require_geometry(geom);
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Cin = input.dim(3);
  if (kernels.dim(2) != Cin) {
    throw Error(ErrorCode::ChannelMismatch, "standard kernels expect " + std::to_string(kernels.dim(2)) +
                                                " input channels, got " + std::to_string(Cin));
  }
  const std::size_t Cout = kernels.dim(3);
  if (bias.rank() != 1 || bias.dim(0) != Cout) {
    throw Error(ErrorCode::ShapeMismatch, "standard_conv2d bias must have " + std::to_string(Cout) + " entries");
  }
  ConvGeometry g = geom;
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  require_fits(g, H, W);
  const std::size_t OH = g.out_h(H), OW = g.out_w(W), pt = g.pad_top(H), pl = g.pad_left(W);

  BasicTensor<T> out(Shape{N, OH, OW, Cout});
  const T* in = input.raw();
  const T* k = kernels.raw();
  parallel_for(N, [&](std::size_t n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        T* dst = out.raw() + ((n * OH + oy) * OW + ox) * Cout;
        for (std::size_t co = 0; co < Cout; ++co) dst[co] = bias[co];
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto iy = tap(oy, g.sh, ky, pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const auto ix = tap(ox, g.sw, kx, pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const T* src = in + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * Cin;
            const T* kk = k + (ky * g.kw + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const T a = src[ci];
              const T* kr = kk + ci * Cout;
              for (std::size_t co = 0; co < Cout; ++co) dst[co] += a * kr[co];
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
AffineGrads<T> standard_conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                                        const BasicTensor<T>& grad_out, const ConvGeometry& geom) {
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Cin = input.dim(3);
  const std::size_t Cout = kernels.dim(3);
  ConvGeometry g = geom;
  g.kh = kernels.dim(0);
  g.kw = kernels.dim(1);
  const std::size_t OH = g.out_h(H), OW = g.out_w(W), pt = g.pad_top(H), pl = g.pad_left(W);
  if (grad_out.shape() != Shape{N, OH, OW, Cout}) {
    throw Error(ErrorCode::ShapeMismatch, "standard conv grad has shape " + grad_out.shape().to_string());
  }
  AffineGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape()), BasicTensor<T>(Shape{Cout})};
  const T* in = input.raw();
  const T* k = kernels.raw();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const T* go = grad_out.raw() + ((n * OH + oy) * OW + ox) * Cout;
        for (std::size_t co = 0; co < Cout; ++co) grads.bias[co] += go[co];
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const auto iy = tap(oy, g.sh, ky, pt);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const auto ix = tap(ox, g.sw, kx, pl);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const std::size_t base = ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * Cin;
            const T* src = in + base;
            T* gi = grads.input.raw() + base;
            const std::size_t kbase = (ky * g.kw + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const T* kr = k + kbase + ci * Cout;
              T* gkr = grads.weights.raw() + kbase + ci * Cout;
              T acc = T(0);
              for (std::size_t co = 0; co < Cout; ++co) {
                acc += go[co] * kr[co];
                gkr[co] += src[ci] * go[co];
              }
              gi[ci] += acc;
            }
          }
        }
      }
    }
  }
  return grads;
}

// Pooling --------------------------------------------------------------------

template <typename T>
MaxPoolResult<T> max_pool2d(const BasicTensor<T>& input, const PoolWindow& window) {
  require_rank(input.shape(), 4, "max_pool2d input");
  if (window.ph == 0 || window.pw == 0 || window.sh == 0 || window.sw == 0) {
    throw Error(ErrorCode::BadConfig, "pool window and stride must be positive");
  }
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  if (window.ph > H || window.pw > W) {
    throw Error(ErrorCode::WindowTooLarge, "pool window larger than " + input.shape().to_string());
  }
  const std::size_t OH = window.out_h(H), OW = window.out_w(W);
  MaxPoolResult<T> r{BasicTensor<T>(Shape{N, OH, OW, C}), std::vector<std::size_t>(N * OH * OW * C)};
  parallel_for(N, [&](std::size_t n) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        for (std::size_t c = 0; c < C; ++c) {
          std::size_t best = input.offset(n, oy * window.sh, ox * window.sw, c);
          T best_v = input[best];
          for (std::size_t py = 0; py < window.ph; ++py) {
            for (std::size_t px = 0; px < window.pw; ++px) {
              const std::size_t off = input.offset(n, oy * window.sh + py, ox * window.sw + px, c);
              if (input[off] > best_v) {
                best_v = input[off];
                best = off;
              }
            }
          }
          const std::size_t o = r.output.offset(n, oy, ox, c);
          r.output[o] = best_v;
          r.argmax[o] = best;
        }
      }
    }
  });
  return r;
}

template <typename T>
BasicTensor<T> max_pool2d_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                   const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw Error(ErrorCode::ShapeMismatch, "argmax index does not match pooled gradient");
  }
  BasicTensor<T> gi(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gi[argmax[i]] += grad_out[i];
  return gi;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "global_avg_pool input");
  const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
  BasicTensor<T> out(Shape{N, C});
  const T area = static_cast<T>(H * W);
  for (std::size_t n = 0; n < N; ++n) {
    T* o = out.raw() + n * C;
    for (std::size_t p = 0; p < H * W; ++p) {
      const T* src = input.raw() + (n * H * W + p) * C;
      for (std::size_t c = 0; c < C; ++c) o[c] += src[c];
    }
    for (std::size_t c = 0; c < C; ++c) o[c] /= area;
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  const std::size_t N = input_shape[0], H = input_shape[1], W = input_shape[2], C = input_shape[3];
  if (grad_out.shape() != Shape{N, C}) {
    throw Error(ErrorCode::ShapeMismatch, "GAP grad has shape " + grad_out.shape().to_string());
  }
  BasicTensor<T> gi(input_shape);
  const T area = static_cast<T>(H * W);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t p = 0; p < H * W; ++p) {
      T* dst = gi.raw() + (n * H * W + p) * C;
      for (std::size_t c = 0; c < C; ++c) dst[c] = grad_out[n * C + c] / area;
    }
  }
  return gi;
}

// Elementwise ----------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad) {
  if (x.shape() != grad.shape()) throw Error(ErrorCode::ShapeMismatch, "relu grad shape");
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? grad[i] : T(0);
  return g;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad) {
  BasicTensor<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad[i] * y[i] * (T(1) - y[i]);
  return g;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  BasicTensor<T> p(logits.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits.raw() + n * K;
    T* out = p.raw() + n * K;
    const T zmax = *std::max_element(z, z + K);
    T sum = T(0);
    for (std::size_t k = 0; k < K; ++k) {
      out[k] = std::exp(z[k] - zmax);
      sum += out[k];
    }
    for (std::size_t k = 0; k < K; ++k) out[k] /= sum;
  }
  return p;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad) {
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  BasicTensor<T> gz(probs.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const T* p = probs.raw() + n * K;
    const T* g = grad.raw() + n * K;
    T dot = T(0);
    for (std::size_t k = 0; k < K; ++k) dot += g[k] * p[k];
    for (std::size_t k = 0; k < K; ++k) gz[n * K + k] = p[k] * (g[k] - dot);
  }
  return gz;
}

#define SEPCNN_INSTANTIATE_OPS(T)                                                                             \
  template BasicTensor<T> depthwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const ConvGeometry&); \
  template DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                                       const BasicTensor<T>&, const ConvGeometry&);           \
  template BasicTensor<T> pointwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template AffineGrads<T> pointwise_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                                    const BasicTensor<T>&);                                   \
  template BasicTensor<T> separable_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                           const BasicTensor<T>&, const ConvGeometry&);                       \
  template BasicTensor<T> standard_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                          const ConvGeometry&);                                               \
  template AffineGrads<T> standard_conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                                   const BasicTensor<T>&, const ConvGeometry&);               \
  template BasicTensor<T> affine(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);        \
  template AffineGrads<T> affine_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template MaxPoolResult<T> max_pool2d(const BasicTensor<T>&, const PoolWindow&);                             \
  template BasicTensor<T> max_pool2d_backward(const BasicTensor<T>&, const std::vector<std::size_t>&,         \
                                              const Shape&);                                                  \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                             \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&);                      \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template T sigmoid(T);                                                                                      \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);

SEPCNN_INSTANTIATE_OPS(float)
SEPCNN_INSTANTIATE_OPS(double)

#undef SEPCNN_INSTANTIATE_OPS

}  // namespace sepcnn
