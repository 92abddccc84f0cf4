#include "sepcnn_cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "sepcnn/keyvalue.hpp"

namespace sepcnn::cli {

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "epochs") {
    epochs = kv::to_size(key, value);
  } else if (key == "batch_size") {
    batch_size = kv::to_size(key, value);
  } else if (key == "learning_rate") {
    learning_rate = kv::to_double(key, value);
  } else if (key == "adam_beta1") {
    adam_beta1 = kv::to_double(key, value);
  } else if (key == "adam_beta2") {
    adam_beta2 = kv::to_double(key, value);
  } else if (key == "adam_epsilon") {
    adam_epsilon = kv::to_double(key, value);
  } else if (key == "augment_hflip_prob") {
    augment_hflip_prob = kv::to_double(key, value);
  } else if (key == "augment_rotate_degrees") {
    augment_rotate_degrees = kv::to_double(key, value);
  } else if (key == "val_fraction") {
    val_fraction = kv::to_double(key, value);
  } else if (key == "train_dir") {
    train_dir = value;
  } else if (key == "test_dir") {
    test_dir = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "seed") {
    seed = kv::to_u64(key, value);
  } else if (key == "threads") {
    threads = kv::to_size(key, value);
  } else if (!model.set(key, value)) {
    throw Error(ErrorCode::BadConfig, "unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  model.validate();
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0,1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
  if (!(augment_hflip_prob >= 0.0 && augment_hflip_prob <= 1.0)) fail("augment_hflip_prob must be in [0,1]");
  if (!(augment_rotate_degrees >= 0.0)) fail("augment_rotate_degrees must be non-negative");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("val_fraction must be in [0,1)");
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# model\n" << model.to_text() << "# training\n"
     << "epochs=" << epochs << '\n'
     << "batch_size=" << batch_size << '\n'
     << "learning_rate=" << kv::format_double(learning_rate) << '\n'
     << "adam_beta1=" << kv::format_double(adam_beta1) << '\n'
     << "adam_beta2=" << kv::format_double(adam_beta2) << '\n'
     << "adam_epsilon=" << kv::format_double(adam_epsilon) << '\n'
     << "augment_hflip_prob=" << kv::format_double(augment_hflip_prob) << '\n'
     << "augment_rotate_degrees=" << kv::format_double(augment_rotate_degrees) << '\n'
     << "val_fraction=" << kv::format_double(val_fraction) << '\n'
     << "# run\n"
     << "train_dir=" << train_dir << '\n'
     << "test_dir=" << test_dir << '\n'
     << "out_dir=" << out_dir << '\n'
     << "seed=" << seed << '\n'
     << "threads=" << threads << '\n';
  return os.str();
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig cfg;
  for (const auto& e : kv::parse(text)) {
    try {
      cfg.set(e.key, e.value);
    } catch (const Error& err) {
      throw Error(err.code(), "line " + std::to_string(e.line) + ": " + err.message());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::ostringstream text;
  text << is.rdbuf();
  try {
    return from_text(text.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

std::uint64_t RunConfig::seed_for(std::string_view purpose) const { return derive_seed(seed, purpose); }

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.shuffle_seed = seed_for("shuffle");
  tc.augment_seed = seed_for("augment");
  tc.augment = {augment_hflip_prob, augment_rotate_degrees};
  tc.optimizer = {learning_rate, adam_beta1, adam_beta2, adam_epsilon};
  return tc;
}

}  // namespace sepcnn::cli
