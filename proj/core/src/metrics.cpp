#include "sepcnn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sepcnn {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::string> class_names)
    : k_(num_classes), names_(std::move(class_names)), counts_(num_classes * num_classes, 0) {
  if (names_.empty()) {
    for (std::size_t i = 0; i < k_; ++i) names_.push_back("class" + std::to_string(i));
  }
  if (names_.size() != k_) throw Error(ErrorCode::LengthMismatch, "class name count differs from K");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= k_ || predicted >= k_) {
    throw Error(ErrorCode::LabelOutOfRange, "label pair (" + std::to_string(truth) + "," +
                                                std::to_string(predicted) + ") with K=" + std::to_string(k_));
  }
  counts_[truth * k_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
  return s;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  for (std::size_t j = 0; j < k_; ++j) os << (j ? "," : "") << names_[j];
  os << '\n';
  for (std::size_t i = 0; i < k_; ++i) {
    for (std::size_t j = 0; j < k_; ++j) os << (j ? "," : "") << at(i, j);
    os << '\n';
  }
  return os.str();
}

std::string ConfusionMatrix::to_text() const {
  std::size_t label_w = std::string("true\\pred").size();
  std::size_t cell_w = 1;
  for (const auto& n : names_) {
    label_w = std::max(label_w, n.size());
    cell_w = std::max(cell_w, n.size());
  }
  for (auto c : counts_) cell_w = std::max(cell_w, std::to_string(c).size());

  auto pad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  std::ostringstream os;
  os << pad("true\\pred", label_w);
  for (const auto& n : names_) os << "  " << pad(n, cell_w);
  os << '\n';
  for (std::size_t i = 0; i < k_; ++i) {
    os << pad(names_[i], label_w);
    for (std::size_t j = 0; j < k_; ++j) os << "  " << pad(std::to_string(at(i, j)), cell_w);
    os << '\n';
  }
  return os.str();
}

ConfusionMatrix confusion(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                          std::size_t num_classes, std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(truth.size()) + " true labels vs " +
                                               std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(num_classes, std::move(class_names));
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorCode::EmptyMatrix, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

template <typename T>
std::vector<std::size_t> argmax_rows(const BasicTensor<T>& scores) {
  if (scores.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "argmax_rows expects (N,K)");
  const std::size_t N = scores.dim(0), K = scores.dim(1);
  std::vector<std::size_t> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const T* row = scores.raw() + n * K;
    out[n] = static_cast<std::size_t>(std::max_element(row, row + K) - row);
  }
  return out;
}

template std::vector<std::size_t> argmax_rows(const Tensor&);
template std::vector<std::size_t> argmax_rows(const Tensor64&);

}  // namespace sepcnn
