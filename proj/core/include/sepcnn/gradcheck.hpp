#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sepcnn/layers.hpp"
#include "sepcnn/model.hpp"

namespace sepcnn {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Re-measure a failing element at step/10 before declaring it wrong.
  bool kink_retry = true;
  /// Applied to every analytic gradient before comparison; used as a
  /// negative control (e.g. a sign flip must be reported as a failure).
  std::function<void(std::string_view name, Tensor64& analytic)> corrupt;
};

struct TensorCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  /// Elements that needed the narrower step.
  std::size_t kink_retries = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;

  bool passed() const;
  double max_rel_error() const;
  std::string to_text() const;
};

/// Central differences (L(t+h) - L(t-h)) / 2h in 64-bit for every trainable
/// scalar of the model, against model.backward(). Loss is mean cross-entropy;
/// the model runs with batch statistics and dropout off. Throws
/// NonDeterministicForward if two identical forwards disagree.
GradCheckReport grad_check(Model<double>& model, const Tensor64& input, const Tensor64& labels,
                           const GradCheckOptions& options = {});

/// Float models are converted to 64-bit first.
GradCheckReport grad_check(const Model<float>& model, const Tensor64& input, const Tensor64& labels,
                           const GradCheckOptions& options = {});

/// Checks a single layer with loss L = sum(projection * layer(input)),
/// covering the input gradient ("input") and every trainable parameter.
GradCheckReport grad_check(Layer<double>& layer, const Tensor64& input, const Tensor64& projection,
                           const GradCheckOptions& options = {});

}  // namespace sepcnn
