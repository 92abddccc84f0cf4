#include "sepcnn/optim.hpp"

#include <cmath>

namespace sepcnn {

namespace {

template <typename T>
void check_labels(const BasicTensor<T>& labels, const Shape& expected) {
  if (labels.shape() != expected) {
    throw Error(ErrorCode::ShapeMismatch, "labels " + labels.shape().to_string() + " vs " + expected.to_string());
  }
  const std::size_t N = expected[0], K = expected[1];
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const T y = labels[n * K + k];
      if (y == T(1)) {
        ++ones;
      } else if (y != T(0)) {
        throw Error(ErrorCode::NotOneHot, "row " + std::to_string(n) + " has a value other than 0 or 1");
      }
    }
    if (ones != 1) throw Error(ErrorCode::NotOneHot, "row " + std::to_string(n) + " is not one-hot");
  }
}

}  // namespace

template <typename T>
LossReport cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& labels) {
  if (probs.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "cross_entropy expects (N,K) probabilities");
  check_labels(labels, probs.shape());
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  LossReport report;
  report.per_sample.resize(N);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    double row_sum = 0.0;
    double loss = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double p = static_cast<double>(probs[n * K + k]);
      if (!(p >= 0.0 && p <= 1.0 + 1e-4)) {
        throw Error(ErrorCode::NotDistribution, "row " + std::to_string(n) + " has entry outside [0,1]");
      }
      row_sum += p;
      if (labels[n * K + k] == T(1)) loss -= std::log(std::max(p, kProbabilityFloor));
    }
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw Error(ErrorCode::NotDistribution, "row " + std::to_string(n) + " sums to " + std::to_string(row_sum));
    }
    report.per_sample[n] = loss;
    total += loss;
  }
  report.mean_loss = total / static_cast<double>(N);
  return report;
}

template <typename T>
BasicTensor<T> softmax_xent_grad(const BasicTensor<T>& logits, const BasicTensor<T>& labels) {
  auto grad = softmax(logits);
  check_labels(labels, logits.shape());
  const T n = static_cast<T>(logits.dim(0));
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = (grad[i] - labels[i]) / n;
  return grad;
}

template <typename T>
BasicTensor<T> one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes) {
  if (labels.empty()) throw Error(ErrorCode::EmptyDataset, "no labels");
  BasicTensor<T> y(Shape{labels.size(), num_classes});
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[n]) + " with " +
                                                  std::to_string(num_classes) + " classes");
    }
    y[n * num_classes + labels[n]] = T(1);
  }
  return y;
}

template <typename T>
void adam_step(const std::vector<BasicTensor<T>*>& params, const std::vector<const BasicTensor<T>*>& grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "params and grads differ in count");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "Adam state built for other params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape()) {
      throw Error(ErrorCode::ShapeMismatch, "Adam parameter " + std::to_string(i) + " shape mismatch");
    }
  }

  state.t += 1;
  const auto& hp = state.hp;
  const T b1 = static_cast<T>(hp.beta1);
  const T b2 = static_cast<T>(hp.beta2);
  // 1 - beta in double; 1 - 0.999f in float is off by ~1e-5 relative
  const T one_minus_b1 = static_cast<T>(1.0 - hp.beta1);
  const T one_minus_b2 = static_cast<T>(1.0 - hp.beta2);
  const T lr = static_cast<T>(hp.lr);
  const T eps = static_cast<T>(hp.eps);
  const T bc1 = static_cast<T>(1.0 - std::pow(hp.beta1, static_cast<double>(state.t)));
  const T bc2 = static_cast<T>(1.0 - std::pow(hp.beta2, static_cast<double>(state.t)));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = *params[i];
    const auto& g = *grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = b1 * m[k] + one_minus_b1 * g[k];
      v[k] = b2 * v[k] + one_minus_b2 * g[k] * g[k];
      const T m_hat = m[k] / bc1;
      const T v_hat = v[k] / bc2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void Adam<T>::step(Model<T>& model) {
  std::vector<BasicTensor<T>*> params;
  std::vector<const BasicTensor<T>*> grads;
  for (auto& p : model.trainable_params()) {
    params.push_back(p.slot.value);
    grads.push_back(p.slot.grad);
  }
  adam_step(params, grads, state_);
}

template LossReport cross_entropy(const Tensor&, const Tensor&);
template LossReport cross_entropy(const Tensor64&, const Tensor64&);
template Tensor softmax_xent_grad(const Tensor&, const Tensor&);
template Tensor64 softmax_xent_grad(const Tensor64&, const Tensor64&);
template Tensor one_hot(const std::vector<std::size_t>&, std::size_t);
template Tensor64 one_hot(const std::vector<std::size_t>&, std::size_t);
template void adam_step(const std::vector<Tensor*>&, const std::vector<const Tensor*>&, AdamState<float>&);
template void adam_step(const std::vector<Tensor64*>&, const std::vector<const Tensor64*>&, AdamState<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace sepcnn
