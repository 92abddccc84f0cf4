#include "sepcnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace sepcnn {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string optional_field(const std::optional<double>& v, const char* spec) {
  return v ? fmt(spec, *v) : std::string("nan");
}

void require_compatible(const Model<float>& model, const Dataset& ds) {
  const auto& cfg = model.config();
  for (const auto& s : ds.samples) {
    if (s.image.shape() != Shape{cfg.input_h, cfg.input_w, cfg.input_c}) {
      throw Error(ErrorCode::ShapeMismatch, "sample shape " + s.image.shape().to_string() + " but model expects (" +
                                                std::to_string(cfg.input_h) + "," + std::to_string(cfg.input_w) +
                                                "," + std::to_string(cfg.input_c) + ")");
    }
    if (s.label >= cfg.num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(s.label) + " with " +
                                                  std::to_string(cfg.num_classes) + " classes");
    }
  }
}

}  // namespace

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : epochs) {
    os << r.epoch << ',' << fmt("%.9g", r.train_loss) << ',' << fmt("%.9g", r.train_acc) << ','
       << optional_field(r.val_loss, "%.9g") << ',' << optional_field(r.val_acc, "%.9g") << '\n';
  }
  return os.str();
}

std::string TrainHistory::timing_csv() const {
  std::ostringstream os;
  os << "epoch,ms\n";
  for (const auto& r : epochs) os << r.epoch << ',' << r.wall_ms << '\n';
  return os.str();
}

std::string format_epoch_line(const EpochRecord& r) {
  std::ostringstream os;
  os << "epoch=" << r.epoch << " train_loss=" << fmt("%.6f", r.train_loss) << " train_acc=" << fmt("%.6f", r.train_acc)
     << " val_loss=" << optional_field(r.val_loss, "%.6f") << " val_acc=" << optional_field(r.val_acc, "%.6f")
     << " ms=" << r.wall_ms;
  return os.str();
}

EvalResult evaluate(Model<float>& model, const Dataset& dataset, std::size_t batch_size) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
  if (batch_size == 0) throw Error(ErrorCode::BadConfig, "batch_size must be positive");
  require_compatible(model, dataset);
  const auto& cfg = model.config();
  const Mode saved = model.mode();
  model.set_mode(Mode::infer);

  std::vector<std::size_t> truth, predicted;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(dataset.size(), start + batch_size); ++i) idx.push_back(i);
    auto [batch, labels] = make_batch(dataset.samples, idx);
    const auto probs = model.forward(batch);
    const auto report = cross_entropy(probs, one_hot<float>(labels, cfg.num_classes));
    for (double l : report.per_sample) loss_sum += l;
    const auto pred = argmax_rows(probs);
    truth.insert(truth.end(), labels.begin(), labels.end());
    predicted.insert(predicted.end(), pred.begin(), pred.end());
  }
  model.set_mode(saved);

  std::vector<std::string> names = dataset.class_names;
  if (names.size() != cfg.num_classes) names.clear();
  EvalResult result{loss_sum / static_cast<double>(dataset.size()), 0.0,
                    confusion(truth, predicted, cfg.num_classes, names)};
  result.accuracy = accuracy(result.confusion);
  return result;
}

TrainHistory train(Model<float>& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                   std::ostream* log, const EpochCallback& on_epoch) {
  if (config.epochs < 1) throw Error(ErrorCode::BadConfig, "epochs must be at least 1");
  if (config.batch_size < 1) throw Error(ErrorCode::BadConfig, "batch_size must be at least 1");
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  require_compatible(model, train_set);
  require_compatible(model, val_set);

  const std::size_t K = model.config().num_classes;
  const bool augmenting = config.augment.hflip_prob > 0.0 || config.augment.rotate_degrees_max > 0.0;
  Rng shuffle_rng(config.shuffle_seed);
  Rng augment_rng(config.augment_seed);
  Adam<float> optimizer(config.optimizer);
  TrainHistory history;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    model.set_mode(Mode::train);
    const auto order = shuffle_rng.permutation(train_set.size());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Sample> batch_samples;
      batch_samples.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set.samples[order[k]];
        batch_samples.push_back(augmenting ? augment(s, config.augment, augment_rng) : s);
      }
      std::vector<std::size_t> idx(batch_samples.size());
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
      auto [batch, labels] = make_batch(batch_samples, idx);
      const auto targets = one_hot<float>(labels, K);

      const auto probs = model.forward(batch);
      const auto report = cross_entropy(probs, targets);
      if (!std::isfinite(report.mean_loss)) {
        throw Error(ErrorCode::NumericFailure, "non-finite loss in epoch " + std::to_string(epoch));
      }
      for (double l : report.per_sample) loss_sum += l;
      const auto pred = argmax_rows(probs);
      for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == labels[k];

      model.zero_grad();
      model.backward(softmax_xent_grad(model.logits(), targets));
      optimizer.step(model);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    record.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const auto eval = evaluate(model, val_set, config.batch_size);
      if (!std::isfinite(eval.mean_loss)) {
        throw Error(ErrorCode::NumericFailure, "non-finite validation loss in epoch " + std::to_string(epoch));
      }
      record.val_loss = eval.mean_loss;
      record.val_acc = eval.accuracy;
    }
    record.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
                         .count();
    history.epochs.push_back(record);
    if (log) *log << format_epoch_line(record) << std::endl;
    if (on_epoch) on_epoch(record, model);
  }
  model.set_mode(Mode::infer);
  return history;
}

}  // namespace sepcnn
