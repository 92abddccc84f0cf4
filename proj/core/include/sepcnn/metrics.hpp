#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepcnn/tensor.hpp"

namespace sepcnn {

/// K x K counts, rows are true classes and columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes, std::vector<std::string> class_names = {});

  std::size_t num_classes() const { return k_; }
  const std::vector<std::string>& class_names() const { return names_; }

  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;

  /// Header row of class names, then one row of counts per true class.
  std::string to_csv() const;
  /// Right-aligned table with row and column labels.
  std::string to_text() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

/// Throws LengthMismatch or LabelOutOfRange.
ConfusionMatrix confusion(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                          std::size_t num_classes, std::vector<std::string> class_names = {});

/// trace / total; throws EmptyMatrix when total is 0.
double accuracy(const ConfusionMatrix& cm);

/// Row-wise argmax of an (N,K) score tensor, ties to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const BasicTensor<T>& scores);

}  // namespace sepcnn
