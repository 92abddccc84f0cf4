#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sepcnn/layers.hpp"

namespace sepcnn {

/// Declarative architecture: per filter width one block
/// SeparableConv2D -> BatchNorm -> ReLU -> MaxPool2D -> SEBlock, then
/// GlobalAvgPool and a Dense/ReLU/Dropout head ending in Dense -> Softmax.
struct ModelConfig {
  std::size_t input_h = 150;
  std::size_t input_w = 150;
  std::size_t input_c = 3;
  std::vector<std::size_t> filter_ladder{32, 64, 128};
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t se_ratio = 16;
  std::vector<std::size_t> head_widths{128, 64};
  std::vector<double> head_dropout{0.3, 0.4};
  std::size_t num_classes = 4;
  Padding padding = Padding::same;
  PoolWindow pool{};
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  /// Optional label names, in label order; empty means "class<i>".
  std::vector<std::string> class_names;

  /// Throws BadConfig.
  void validate() const;

  /// Applies one key=value setting. Returns false for keys it does not own.
  bool set(std::string_view key, std::string_view value);

  /// Canonical key=value text; parsing it back with set() reproduces *this.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  std::string class_name(std::size_t label) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&);
};

/// Named parameter of a whole model, e.g. "block1.sepconv.pointwise_kernel".
template <typename T>
struct ModelParam {
  std::string name;
  std::size_t layer = 0;
  ParamSlot<T> slot;
};

template <typename T>
class Model {
 public:
  /// Builds the stack and initializes weights from rng.
  Model(ModelConfig config, Rng& rng);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  /// Display names ("block1.sepconv", "head.dense2", ...).
  const std::string& layer_name(std::size_t i) const { return names_.at(i); }

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  /// Runs the stack; returns class probabilities (N, num_classes).
  BasicTensor<T> forward(const BasicTensor<T>& batch);
  /// Pre-softmax output of the last forward.
  const BasicTensor<T>& logits() const { return logits_; }

  /// Back-propagates a gradient given at the logits and accumulates every
  /// trainable parameter gradient. The softmax layer is bypassed.
  void backward(const BasicTensor<T>& grad_logits);

  void zero_grad();

  /// Gives the i-th dropout layer the stream derive_seed(seed, "dropout<i>"),
  /// separating mask randomness from weight initialization.
  void reseed_dropout(std::uint64_t seed);

  std::vector<ModelParam<T>> params();
  std::vector<ModelParam<T>> trainable_params();

  /// Same architecture, parameters converted to U.
  template <typename U>
  Model<U> cast() const;

 private:
  ModelConfig config_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<std::string> names_;
  Mode mode_ = Mode::infer;
  BasicTensor<T> logits_;
  bool has_forward_ = false;
};

template <typename T>
Model<T> build_model(const ModelConfig& config, Rng& rng) {
  return Model<T>(config, rng);
}

struct AuditRow {
  std::string name;
  LayerKind kind{};
  Shape output_shape;  // with batch 1
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
};

struct ParamAudit {
  std::vector<AuditRow> rows;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
  std::size_t total() const { return trainable + non_trainable; }
};

/// Totals reported for the reference architecture, kept for side-by-side
/// comparison with the analytic audit.
struct ReportedTotals {
  static constexpr std::size_t total = 1'040'063;
  static constexpr std::size_t trainable = 1'039'615;
  static constexpr std::size_t non_trainable = total - trainable;
};

template <typename T>
ParamAudit count_params(Model<T>& model);

/// Layer table plus totals; with compare_reported the reported totals are
/// printed next to the audited ones.
template <typename T>
std::string model_summary(Model<T>& model, bool compare_reported = false);

/// ".sepse1": "SEPSE1", u32 LE config length, config text, then every
/// parameter tensor (trainable and moving statistics) in stack order as RTF1.
void save_checkpoint(Model<float>& model, std::ostream& sink);
Model<float> load_checkpoint(std::istream& source);
void save_checkpoint(Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Rng unused(0);
  Model<U> out(config_, unused);
  auto src = const_cast<Model<T>*>(this)->params();
  auto dst = out.params();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].slot.value = src[i].slot.value->template cast<U>();
  out.set_mode(mode_);
  return out;
}

}  // namespace sepcnn
