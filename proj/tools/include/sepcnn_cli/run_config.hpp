#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sepcnn/model.hpp"
#include "sepcnn/trainer.hpp"

namespace sepcnn::cli {

/// Everything a run needs: the model architecture, training settings, data
/// locations and the seed. Serialized as flat key=value text; model keys are
/// the ModelConfig ones, the rest are listed in to_text().
struct RunConfig {
  ModelConfig model;

  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double augment_hflip_prob = 0.5;
  double augment_rotate_degrees = 15.0;
  double val_fraction = 0.1;

  std::string train_dir;
  std::string test_dir;
  std::string out_dir = "run";
  std::uint64_t seed = 42;
  /// 0 = all hardware threads, 1 = calling thread only.
  std::size_t threads = 0;

  /// Throws BadConfig for an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  /// Throws BadConfig.
  void validate() const;

  /// Every key with its current value; from_text(to_text()) == *this.
  std::string to_text() const;
  static RunConfig from_text(std::string_view text);
  /// Missing or unreadable files raise IoError.
  static RunConfig from_file(const std::filesystem::path& path);

  /// Sub-seed for one purpose: "init", "shuffle", "dropout", "augment", "split".
  std::uint64_t seed_for(std::string_view purpose) const;
  TrainConfig train_config() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace sepcnn::cli
