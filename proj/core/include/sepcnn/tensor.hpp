#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sepcnn/error.hpp"
#include "sepcnn/rng.hpp"

namespace sepcnn {

/// Dimensions of a dense tensor, rank 1 to 4. 4-D tensors use (N, H, W, C).
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t elements() const noexcept;
  bool empty() const noexcept { return dims_.empty(); }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};

/// Glorot/Xavier uniform: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
struct GlorotDist {
  std::size_t fan_in = 1;
  std::size_t fan_out = 1;
};

using Distribution = std::variant<UniformDist, GlorotDist>;

/// Dense row-major array (last axis fastest). Instantiated for float on the
/// main path and double for gradient checking.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_.elements(), fill) {}

  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.elements()) {
      throw Error(ErrorCode::LengthMismatch, "shape " + shape_.to_string() + " needs " +
                                                 std::to_string(shape_.elements()) + " values, got " +
                                                 std::to_string(data_.size()));
    }
  }

  static BasicTensor random(Shape shape, const Distribution& dist, Rng& rng);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return ((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
  }
  T& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) { return data_[offset(n, h, w, c)]; }
  const T& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[offset(n, h, w, c)];
  }
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  BasicTensor reshaped(Shape shape) const {
    if (shape.elements() != data_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_.to_string() + " to " + shape.to_string());
    }
    return BasicTensor(std::move(shape), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
BasicTensor<T> BasicTensor<T>::random(Shape shape, const Distribution& dist, Rng& rng) {
  double lo = 0.0;
  double hi = 0.0;
  if (const auto* u = std::get_if<UniformDist>(&dist)) {
    if (!(u->lo < u->hi)) {
      throw Error(ErrorCode::BadDistributionParams, "uniform needs lo < hi");
    }
    lo = u->lo;
    hi = u->hi;
  } else {
    const auto& g = std::get<GlorotDist>(dist);
    if (g.fan_in < 1 || g.fan_out < 1) {
      throw Error(ErrorCode::BadDistributionParams, "glorot needs fan_in, fan_out >= 1");
    }
    hi = std::sqrt(6.0 / static_cast<double>(g.fan_in + g.fan_out));
    lo = -hi;
  }
  BasicTensor out(std::move(shape));
  for (auto& v : out.data_) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

/// Writes the ".rtf1" record: "RTF1", u8 rank, rank x u32 LE dims, f32 LE payload.
void write_tensor(const Tensor& t, std::ostream& sink);
/// Reads one ".rtf1" record. Throws BadMagic, RankOutOfRange or TruncatedPayload.
Tensor read_tensor(std::istream& source);

void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

}  // namespace sepcnn
