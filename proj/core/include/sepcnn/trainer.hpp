#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sepcnn/data.hpp"
#include "sepcnn/metrics.hpp"
#include "sepcnn/model.hpp"
#include "sepcnn/optim.hpp"

namespace sepcnn {

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t augment_seed = 0;
  AugmentConfig augment{};
  AdamConfig optimizer{};
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  /// Empty when there is no validation set.
  std::optional<double> val_loss;
  std::optional<double> val_acc;
  std::int64_t wall_ms = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,train_loss,train_acc,val_loss,val_acc. Wall time is kept out so
  /// that seeded runs produce identical files.
  std::string to_csv() const;
  /// epoch,ms
  std::string timing_csv() const;
};

/// "epoch=<n> train_loss=<f> train_acc=<f> val_loss=<f> val_acc=<f> ms=<int>"
std::string format_epoch_line(const EpochRecord& record);

struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion{2};
};

using EpochCallback = std::function<void(const EpochRecord&, Model<float>&)>;

/// Per epoch: seeded shuffle, per-sample augmentation, mini-batches (the last
/// partial batch included), train-mode forward, mean cross-entropy, backward,
/// Adam step; then an infer-mode pass over val_set. Throws NumericFailure on
/// a non-finite loss.
TrainHistory train(Model<float>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                   std::ostream* log = nullptr, const EpochCallback& on_epoch = {});

/// Infer-mode loss, accuracy and confusion matrix. The model's mode is restored.
EvalResult evaluate(Model<float>& model, const Dataset& dataset, std::size_t batch_size = 32);

}  // namespace sepcnn
