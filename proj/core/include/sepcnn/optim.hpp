#pragma once

#include <cstdint>
#include <vector>

#include "sepcnn/model.hpp"
#include "sepcnn/tensor.hpp"

namespace sepcnn {

struct LossReport {
  double mean_loss = 0.0;
  std::vector<double> per_sample;
};

/// Probabilities below this are clamped inside the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean categorical cross-entropy of probability rows against one-hot
/// labels. Throws NotDistribution / NotOneHot.
template <typename T>
LossReport cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& labels);

/// Gradient of mean cross-entropy with respect to the logits:
/// (softmax(logits) - labels) / N.
template <typename T>
BasicTensor<T> softmax_xent_grad(const BasicTensor<T>& logits, const BasicTensor<T>& labels);

template <typename T>
BasicTensor<T> one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig hp;
  std::uint64_t t = 0;
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
};

/// One bias-corrected Adam update. Moments are created on the first call.
template <typename T>
void adam_step(const std::vector<BasicTensor<T>*>& params, const std::vector<const BasicTensor<T>*>& grads,
               AdamState<T>& state);

/// Adam over every trainable parameter of a model.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig hp = {}) { state_.hp = hp; }

  void step(Model<T>& model);

  const AdamState<T>& state() const { return state_; }

 private:
  AdamState<T> state_;
};

}  // namespace sepcnn
