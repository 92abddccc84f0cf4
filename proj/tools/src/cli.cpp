#include "sepcnn_cli/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "sepcnn/data.hpp"
#include "sepcnn/image_io.hpp"
#include "sepcnn/keyvalue.hpp"
#include "sepcnn/parallel.hpp"
#include "sepcnn/trainer.hpp"
#include "sepcnn_cli/checks.hpp"
#include "sepcnn_cli/run_config.hpp"

namespace fs = std::filesystem;

namespace sepcnn::cli {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoClassesFound:
    case ErrorCode::EmptyClass:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::CorruptFile:
    case ErrorCode::EmptyDataset:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::IoError:
    case ErrorCode::BadTarget:
      return kExitData;
    case ErrorCode::NumericFailure:
    case ErrorCode::NonDeterministicForward:
    case ErrorCode::DegenerateBatch:
      return kExitNumeric;
    default:
      return kExitUsage;
  }
}

namespace {

struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw Failure{code, std::move(message)}; }

// Library errors raised inside f leave with the given exit code.
template <typename F>
auto stage(int code, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    fail(code, e.what());
  }
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> epochs;
  std::string input_size;
  std::optional<std::size_t> threads;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Run config file (key=value lines, # comments)");
  app->add_option("--seed", f.seed, "Top-level seed; sub-seeds are derived per purpose");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--epochs", f.epochs, "Training epochs");
  app->add_option("--input-size", f.input_size, "Input size as HxW");
  app->add_option("--threads", f.threads, "Worker threads: 0 = all cores, 1 = bit-reproducible");
  app->add_option("--set", f.sets, "Override a config key, as key=value (repeatable)");
}

std::pair<std::size_t, std::size_t> parse_hw(const std::string& text) {
  const auto d = kv::to_size_list("--input-size", text, 'x');
  if (d.size() != 2 || d[0] == 0 || d[1] == 0) throw Error(ErrorCode::BadConfig, "--input-size expects HxW, got '" + text + "'");
  return {d[0], d[1]};
}

RunConfig resolve(const CommonFlags& f) {
  return stage(kExitUsage, [&] {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
    for (const auto& s : f.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "--set expects key=value, got '" + s + "'");
      cfg.set(kv::trim(std::string_view(s).substr(0, eq)), kv::trim(std::string_view(s).substr(eq + 1)));
    }
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (!f.input_size.empty()) std::tie(cfg.model.input_h, cfg.model.input_w) = parse_hw(f.input_size);
    if (f.threads) cfg.threads = *f.threads;
    cfg.validate();
    return cfg;
  });
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) fail(kExitData, "cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(kExitData, "cannot create " + dir.string() + ": " + ec.message());
}

Dataset load_dir(const std::string& dir, std::size_t h, std::size_t w, Partition part, std::ostream& err) {
  return stage(kExitData, [&] {
    auto manifest = scan_directory(dir);
    for (const auto& warning : manifest.warnings) err << "warning: " << warning << '\n';
    auto ds = load_dataset(manifest, h, w, part);
    if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "no images under " + dir);
    return ds;
  });
}

void check_classes(const ModelConfig& model, const std::vector<std::string>& found, const std::string& dir) {
  if (found.size() != model.num_classes) {
    fail(kExitUsage, dir + " has " + std::to_string(found.size()) + " class directories but num_classes=" +
                         std::to_string(model.num_classes));
  }
  if (!model.class_names.empty() && model.class_names != found) {
    fail(kExitUsage, "class directories under " + dir + " (" + kv::join(found, ",") +
                         ") differ from class_names (" + kv::join(model.class_names, ",") + ")");
  }
}

Model<float> open_checkpoint(const std::string& path) {
  if (path.empty()) fail(kExitUsage, "--checkpoint is required");
  return stage(kExitUsage, [&] { return load_checkpoint(path); });
}

// --- commands

int cmd_train(const CommonFlags& flags, const std::string& train_dir, const std::string& test_dir, std::ostream& out,
              std::ostream& err) {
  RunConfig cfg = resolve(flags);
  if (!train_dir.empty()) cfg.train_dir = train_dir;
  if (!test_dir.empty()) cfg.test_dir = test_dir;
  if (cfg.train_dir.empty()) fail(kExitUsage, "train_dir is not set (use --train-dir or the config key)");
  if (cfg.model.input_c != 3) fail(kExitUsage, "images load as RGB, so input_size needs 3 channels");
  set_num_threads(cfg.threads);

  const auto h = cfg.model.input_h, w = cfg.model.input_w;
  Dataset all = load_dir(cfg.train_dir, h, w, Partition::train, err);
  check_classes(cfg.model, all.class_names, cfg.train_dir);
  cfg.model.class_names = all.class_names;
  Rng split_rng(cfg.seed_for("split"));
  auto [train_set, val_set] = stage(kExitUsage, [&] { return split(all, cfg.val_fraction, split_rng); });
  std::optional<Dataset> test_set;
  if (!cfg.test_dir.empty()) {
    test_set = load_dir(cfg.test_dir, h, w, Partition::test, err);
    check_classes(cfg.model, test_set->class_names, cfg.test_dir);
  }

  Rng init_rng(cfg.seed_for("init"));
  Model<float> model(cfg.model, init_rng);
  model.reseed_dropout(cfg.seed_for("dropout"));

  const fs::path dir = cfg.out_dir;
  make_dir(dir);
  write_text(dir / "run.cfg", cfg.to_text());
  out << "train=" << train_set.size() << " val=" << val_set.size();
  if (test_set) out << " test=" << test_set->size();
  out << " out=" << dir.string() << '\n';

  double best = -1.0;
  TrainHistory history;
  try {
    history = train(model, train_set, val_set, cfg.train_config(), &out, [&](const EpochRecord& r, Model<float>& m) {
      const double score = r.val_acc.value_or(r.train_acc);
      if (score > best) {
        best = score;
        save_checkpoint(m, (dir / "best.sepse1").string());
      }
    });
  } catch (const Error& e) {
    fail(exit_code_for(e.code()), e.what());
  }
  write_text(dir / "history.csv", history.to_csv());
  write_text(dir / "timing.csv", history.timing_csv());
  stage(kExitData, [&] { save_checkpoint(model, (dir / "model.sepse1").string()); });

  const Dataset* report = test_set ? &*test_set : (val_set.empty() ? nullptr : &val_set);
  if (report) {
    const auto r = evaluate(model, *report, cfg.batch_size);
    out << to_string(report->partition) << " loss=" << fixed6(r.mean_loss) << " accuracy=" << fixed6(r.accuracy)
        << '\n'
        << r.confusion.to_text();
    write_text(dir / "confusion.csv", r.confusion.to_csv());
  }
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint, const std::string& data_dir,
                 std::size_t batch_size, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(flags);
  set_num_threads(cfg.threads);
  Model<float> model = open_checkpoint(checkpoint);
  const auto& mc = model.config();
  if (data_dir.empty()) fail(kExitUsage, "--data is required");

  const auto manifest = stage(kExitData, [&] { return scan_directory(data_dir); });
  for (const auto& warning : manifest.warnings) err << "warning: " << warning << '\n';
  if (manifest.entries.empty()) fail(kExitData, "EmptyDataset: no images under " + data_dir);
  check_classes(mc, manifest.class_names, data_dir);

  // Without --input-size the data is used at its native size.
  std::size_t h = 0, w = 0;
  if (!flags.input_size.empty()) {
    std::tie(h, w) = stage(kExitUsage, [&] { return parse_hw(flags.input_size); });
  } else {
    const auto first = stage(kExitData, [&] { return decode_image(manifest.entries.front().path); });
    h = first.dim(0);
    w = first.dim(1);
  }
  if (h != mc.input_h || w != mc.input_w) {
    fail(kExitUsage, "ShapeMismatch: data is " + std::to_string(h) + "x" + std::to_string(w) + " but the checkpoint expects " +
                         std::to_string(mc.input_h) + "x" + std::to_string(mc.input_w) + "; pass --input-size to resize");
  }
  const auto ds = stage(kExitData, [&] { return load_dataset(manifest, h, w, Partition::test); });
  const auto r = stage(kExitData, [&] { return evaluate(model, ds, batch_size); });
  out << "samples=" << ds.size() << " loss=" << fixed6(r.mean_loss) << " accuracy=" << fixed6(r.accuracy) << '\n'
      << r.confusion.to_text();

  const fs::path dir = flags.out.empty() ? fs::path(checkpoint).parent_path() : fs::path(flags.out);
  if (!dir.empty()) make_dir(dir);
  write_text(dir / "confusion.csv", r.confusion.to_csv());
  return kExitOk;
}

int cmd_predict(const CommonFlags& flags, const std::string& checkpoint, const std::vector<std::string>& images,
                std::ostream& out) {
  const RunConfig cfg = resolve(flags);
  set_num_threads(cfg.threads);
  Model<float> model = open_checkpoint(checkpoint);
  const auto& mc = model.config();
  if (mc.input_c != 3) fail(kExitUsage, "checkpoint expects " + std::to_string(mc.input_c) + " channels, images load as RGB");
  model.set_mode(Mode::infer);
  for (const auto& path : images) {
    Tensor img = stage(kExitData, [&] { return decode_image(path); });
    if (img.dim(0) != mc.input_h || img.dim(1) != mc.input_w) img = resize_bilinear(img, mc.input_h, mc.input_w);
    const auto probs = model.forward(normalize(img).reshaped(Shape{1, mc.input_h, mc.input_w, 3}));
    if (images.size() > 1) out << "image " << path << '\n';
    for (std::size_t k = 0; k < mc.num_classes; ++k) out << mc.class_name(k) << ' ' << fixed6(probs[k]) << '\n';
    out << "argmax " << mc.class_name(argmax_rows(probs)[0]) << '\n';
  }
  return kExitOk;
}

int cmd_summary(const CommonFlags& flags, const std::string& checkpoint, bool audit, std::ostream& out) {
  if (!checkpoint.empty()) {
    auto model = open_checkpoint(checkpoint);
    out << model_summary(model, audit);
    return kExitOk;
  }
  const RunConfig cfg = resolve(flags);
  Rng rng(cfg.seed_for("init"));
  Model<float> model = stage(kExitUsage, [&] { return Model<float>(cfg.model, rng); });
  out << model_summary(model, audit);
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& flags, const std::string& scope, const std::string& fault, std::ostream& out) {
  const RunConfig cfg = resolve(flags);
  set_num_threads(cfg.threads);
  ScopedCheck check;
  try {
    check = run_gradcheck(scope, cfg.seed_for("gradcheck"), fault == "sign-flip");
  } catch (const Error& e) {
    fail(exit_code_for(e.code()), e.what());
  }
  char line[160];
  std::snprintf(line, sizeof line, "scope=%s max_rel_error=%.3e tolerance=%.0e %s\n", scope.c_str(),
                check.report.max_rel_error(), check.tolerance, check.report.passed() ? "PASS" : "FAIL");
  out << check.report.to_text() << line;
  return check.report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const CommonFlags& flags, std::size_t per_class, std::size_t test_per_class, std::size_t size,
              std::ostream& out) {
  const RunConfig cfg = resolve(flags);
  const fs::path dir = cfg.out_dir;
  Rng train_rng(cfg.seed_for("synth-train")), test_rng(cfg.seed_for("synth-test"));
  const auto train_set = stage(kExitUsage, [&] { return synth_dataset(per_class, size, train_rng); });
  const auto test_set = stage(kExitUsage, [&] { return synth_dataset(test_per_class, size, test_rng); });
  make_dir(dir);
  stage(kExitData, [&] {
    write_dataset_png(train_set, dir / "train");
    write_dataset_png(test_set, dir / "test");
  });
  out << "wrote " << train_set.size() << " train and " << test_set.size() << " test images (" << size << "x" << size
      << ") to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Separable-convolution CNN with squeeze-and-excitation blocks", "sepcnn"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, predict_flags, summary_flags, grad_flags, synth_flags;

  std::string train_dir, test_dir;
  auto* train_cmd = app.add_subcommand("train", "Train on a class-per-directory image tree");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--train-dir", train_dir, "Training images, one subdirectory per class");
  train_cmd->add_option("--test-dir", test_dir, "Held-out images evaluated after training");

  std::string eval_ckpt, eval_data;
  std::size_t eval_batch = 32;
  auto* eval_cmd = app.add_subcommand("evaluate", "Loss, accuracy and confusion matrix of a checkpoint");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint (.sepse1)")->required();
  eval_cmd->add_option("--data", eval_data, "Image tree, one subdirectory per class")->required();
  eval_cmd->add_option("--batch-size", eval_batch, "Evaluation batch size")->check(CLI::PositiveNumber);

  std::string predict_ckpt;
  std::vector<std::string> predict_images;
  auto* predict_cmd = app.add_subcommand("predict", "Class probabilities for individual images");
  add_common(predict_cmd, predict_flags);
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Model checkpoint (.sepse1)")->required();
  predict_cmd->add_option("images", predict_images, "PNG or JPEG files")->required();

  std::string summary_ckpt;
  bool audit = false;
  auto* summary_cmd = app.add_subcommand("summary", "Layer table and parameter audit");
  add_common(summary_cmd, summary_flags);
  summary_cmd->add_option("--checkpoint", summary_ckpt, "Summarize a checkpoint instead of a config");
  summary_cmd->add_flag("--audit-paper", audit, "Compare against the published parameter totals");

  std::string scope = "full", fault = "none";
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(grad_cmd, grad_flags);
  grad_cmd->add_option("--scope", scope, "full, dense, batchnorm, se or sepconv")
      ->check(CLI::IsMember(gradcheck_scopes()));
  grad_cmd->add_option("--inject-fault", fault, "Negative control: sign-flip negates every analytic gradient")
      ->check(CLI::IsMember({"none", "sign-flip"}));

  std::size_t per_class = 100, test_per_class = 50, size = 32;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic 4-class PNG dataset (train/ and test/)");
  add_common(synth_cmd, synth_flags);
  synth_cmd->add_option("--per-class", per_class, "Training images per class");
  synth_cmd->add_option("--test-per-class", test_per_class, "Test images per class");
  synth_cmd->add_option("--size", size, "Image side length");

  std::vector<const char*> argv{"sepcnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags, train_dir, test_dir, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_flags, eval_ckpt, eval_data, eval_batch, out, err);
    if (predict_cmd->parsed()) return cmd_predict(predict_flags, predict_ckpt, predict_images, out);
    if (summary_cmd->parsed()) return cmd_summary(summary_flags, summary_ckpt, audit, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_flags, scope, fault, out);
    if (synth_cmd->parsed()) return cmd_synth(synth_flags, per_class, test_per_class, size, out);
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace sepcnn::cli
