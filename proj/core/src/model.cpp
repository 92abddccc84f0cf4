#include "sepcnn/model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sepcnn/keyvalue.hpp"

namespace sepcnn {

// ModelConfig -----------------------------------------------------------------

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (input_h == 0 || input_w == 0 || input_c == 0) fail("input_size dimensions must be positive");
  if (filter_ladder.empty()) fail("filter_ladder must not be empty");
  for (auto f : filter_ladder) {
    if (f == 0) fail("filter_ladder entries must be positive");
  }
  if (kernel_h == 0 || kernel_w == 0) fail("kernel must be positive");
  if (se_ratio == 0) fail("se_ratio must be positive");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (head_widths.size() != head_dropout.size()) fail("head_widths and head_dropout need the same length");
  for (auto w : head_widths) {
    if (w == 0) fail("head_widths entries must be positive");
  }
  for (auto p : head_dropout) {
    if (!(p >= 0.0 && p < 1.0)) fail("dropout rates must be in [0,1)");
  }
  if (pool.ph == 0 || pool.pw == 0 || pool.sh == 0 || pool.sw == 0) fail("pool window must be positive");
  if (!(bn_epsilon > 0.0)) fail("bn_epsilon must be positive");
  // 1.0 freezes the moving statistics.
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) fail("bn_momentum must be in (0,1]");
  if (!class_names.empty() && class_names.size() != num_classes) {
    fail("class_names has " + std::to_string(class_names.size()) + " entries, num_classes is " +
         std::to_string(num_classes));
  }
  for (const auto& n : class_names) {
    if (n.empty() || n.find_first_of(",\n#=") != std::string::npos) fail("invalid class name '" + n + "'");
  }

  ConvGeometry geom{kernel_h, kernel_w, 1, 1, padding};
  std::size_t h = input_h, w = input_w;
  for (std::size_t i = 0; i < filter_ladder.size(); ++i) {
    if (padding == Padding::valid && (h < kernel_h || w < kernel_w)) {
      fail("input too small for block " + std::to_string(i + 1) + " convolution");
    }
    h = geom.out_h(h);
    w = geom.out_w(w);
    if (h < pool.ph || w < pool.pw) fail("input too small for block " + std::to_string(i + 1) + " pooling");
    h = pool.out_h(h);
    w = pool.out_w(w);
  }
}

namespace {

std::vector<std::size_t> dims_x(std::string_view key, std::string_view value) {
  return kv::to_size_list(key, value, 'x');
}

}  // namespace

bool ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "input_size") {
    const auto d = dims_x(key, value);
    if (d.size() != 2 && d.size() != 3) throw Error(ErrorCode::BadConfig, "input_size must be HxW or HxWxC");
    input_h = d[0];
    input_w = d[1];
    if (d.size() == 3) input_c = d[2];
  } else if (key == "filter_ladder") {
    filter_ladder = kv::to_size_list(key, value);
  } else if (key == "kernel") {
    const auto d = dims_x(key, value);
    if (d.size() != 2) throw Error(ErrorCode::BadConfig, "kernel must be KHxKW");
    kernel_h = d[0];
    kernel_w = d[1];
  } else if (key == "se_ratio") {
    se_ratio = kv::to_size(key, value);
  } else if (key == "head_widths") {
    head_widths = kv::to_size_list(key, value);
  } else if (key == "head_dropout") {
    head_dropout = kv::to_double_list(key, value);
  } else if (key == "num_classes") {
    num_classes = kv::to_size(key, value);
  } else if (key == "padding") {
    if (value == "same") {
      padding = Padding::same;
    } else if (value == "valid") {
      padding = Padding::valid;
    } else {
      throw Error(ErrorCode::BadConfig, "padding must be same or valid");
    }
  } else if (key == "pool") {
    const auto d = dims_x(key, value);
    if (d.size() != 2) throw Error(ErrorCode::BadConfig, "pool must be PHxPW");
    pool.ph = d[0];
    pool.pw = d[1];
  } else if (key == "pool_stride") {
    const auto d = dims_x(key, value);
    if (d.size() != 2) throw Error(ErrorCode::BadConfig, "pool_stride must be SHxSW");
    pool.sh = d[0];
    pool.sw = d[1];
  } else if (key == "bn_epsilon") {
    bn_epsilon = kv::to_double(key, value);
  } else if (key == "bn_momentum") {
    bn_momentum = kv::to_double(key, value);
  } else if (key == "class_names") {
    class_names = kv::trim(value).empty() ? std::vector<std::string>{} : kv::split(value, ',');
  } else {
    return false;
  }
  return true;
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "input_size=" << input_h << 'x' << input_w << 'x' << input_c << '\n'
     << "filter_ladder=" << kv::join(filter_ladder, ",") << '\n'
     << "kernel=" << kernel_h << 'x' << kernel_w << '\n'
     << "se_ratio=" << se_ratio << '\n'
     << "head_widths=" << kv::join(head_widths, ",") << '\n'
     << "head_dropout=" << kv::join(head_dropout, ",") << '\n'
     << "num_classes=" << num_classes << '\n'
     << "padding=" << (padding == Padding::same ? "same" : "valid") << '\n'
     << "pool=" << pool.ph << 'x' << pool.pw << '\n'
     << "pool_stride=" << pool.sh << 'x' << pool.sw << '\n'
     << "bn_epsilon=" << kv::format_double(bn_epsilon) << '\n'
     << "bn_momentum=" << kv::format_double(bn_momentum) << '\n'
     << "class_names=" << kv::join(class_names, ",") << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig cfg;
  for (const auto& e : kv::parse(text)) {
    if (!cfg.set(e.key, e.value)) throw Error(ErrorCode::BadConfig, "unknown model key '" + e.key + "'");
  }
  cfg.validate();
  return cfg;
}

std::string ModelConfig::class_name(std::size_t label) const {
  if (label < class_names.size()) return class_names[label];
  return "class" + std::to_string(label);
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.input_h == b.input_h && a.input_w == b.input_w && a.input_c == b.input_c &&
         a.filter_ladder == b.filter_ladder && a.kernel_h == b.kernel_h && a.kernel_w == b.kernel_w &&
         a.se_ratio == b.se_ratio && a.head_widths == b.head_widths && a.head_dropout == b.head_dropout &&
         a.num_classes == b.num_classes && a.padding == b.padding && a.pool.ph == b.pool.ph &&
         a.pool.pw == b.pool.pw && a.pool.sh == b.pool.sh && a.pool.sw == b.pool.sw &&
         a.bn_epsilon == b.bn_epsilon && a.bn_momentum == b.bn_momentum && a.class_names == b.class_names;
}

// Model -----------------------------------------------------------------------

template <typename T>
Model<T>::Model(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  auto add = [this](std::string name, std::unique_ptr<Layer<T>> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
  };
  const ConvGeometry geom{config_.kernel_h, config_.kernel_w, 1, 1, config_.padding};
  std::size_t channels = config_.input_c;
  for (std::size_t b = 0; b < config_.filter_ladder.size(); ++b) {
    const std::size_t filters = config_.filter_ladder[b];
    const std::string prefix = "block" + std::to_string(b + 1) + ".";
    add(prefix + "sepconv", std::make_unique<SeparableConv2D<T>>(channels, filters, geom, rng));
    add(prefix + "bn", std::make_unique<BatchNorm<T>>(filters, config_.bn_epsilon, config_.bn_momentum));
    add(prefix + "relu", std::make_unique<ReLU<T>>());
    add(prefix + "pool", std::make_unique<MaxPool2D<T>>(config_.pool));
    add(prefix + "se", std::make_unique<SEBlock<T>>(filters, config_.se_ratio, rng));
    channels = filters;
  }
  add("gap", std::make_unique<GlobalAvgPool<T>>());
  std::size_t features = channels;
  for (std::size_t h = 0; h < config_.head_widths.size(); ++h) {
    const std::string suffix = std::to_string(h + 1);
    add("head.dense" + suffix, std::make_unique<Dense<T>>(features, config_.head_widths[h], rng));
    add("head.relu" + suffix, std::make_unique<ReLU<T>>());
    add("head.dropout" + suffix, std::make_unique<Dropout<T>>(config_.head_dropout[h], rng.next_u64()));
    features = config_.head_widths[h];
  }
  add("output.dense", std::make_unique<Dense<T>>(features, config_.num_classes, rng));
  add("output.softmax", std::make_unique<Softmax<T>>());
}

template <typename T>
BasicTensor<T> Model<T>::forward(const BasicTensor<T>& batch) {
  if (batch.rank() != 4 || batch.dim(1) != config_.input_h || batch.dim(2) != config_.input_w ||
      batch.dim(3) != config_.input_c) {
    throw Error(ErrorCode::ShapeMismatch, "model expects (N," + std::to_string(config_.input_h) + "," +
                                              std::to_string(config_.input_w) + "," +
                                              std::to_string(config_.input_c) + "), got " +
                                              batch.shape().to_string());
  }
  BasicTensor<T> x = batch;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) x = layers_[i]->forward(x, mode_);
  logits_ = x;
  has_forward_ = true;
  return layers_.back()->forward(x, mode_);
}

template <typename T>
void Model<T>::backward(const BasicTensor<T>& grad_logits) {
  if (!has_forward_) throw Error(ErrorCode::BackwardBeforeForward, "model backward called before forward");
  if (grad_logits.shape() != logits_.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "logit gradient " + grad_logits.shape().to_string() + " vs logits " +
                                              logits_.shape().to_string());
  }
  BasicTensor<T> g = grad_logits;
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

template <typename T>
void Model<T>::reseed_dropout(std::uint64_t seed) {
  std::size_t k = 0;
  for (auto& l : layers_) {
    if (auto* d = dynamic_cast<Dropout<T>*>(l.get())) d->reseed(derive_seed(seed, "dropout" + std::to_string(k++)));
  }
}

template <typename T>
std::vector<ModelParam<T>> Model<T>::params() {
  std::vector<ModelParam<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto& slot : layers_[i]->params()) {
      out.push_back({names_[i] + "." + slot.name, i, slot});
    }
  }
  return out;
}

template <typename T>
std::vector<ModelParam<T>> Model<T>::trainable_params() {
  auto all = params();
  std::vector<ModelParam<T>> out;
  for (auto& p : all) {
    if (p.slot.trainable) out.push_back(std::move(p));
  }
  return out;
}

// Audit / summary ---------------------------------------------------------------

template <typename T>
ParamAudit count_params(Model<T>& model) {
  const auto& cfg = model.config();
  ParamAudit audit;
  Shape shape{1, cfg.input_h, cfg.input_w, cfg.input_c};
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    auto& layer = model.layer(i);
    shape = layer.output_shape(shape);
    AuditRow row{model.layer_name(i), layer.kind(), shape, layer.trainable_count(), layer.non_trainable_count()};
    audit.trainable += row.trainable;
    audit.non_trainable += row.non_trainable;
    audit.rows.push_back(std::move(row));
  }
  return audit;
}

namespace {

std::string keras_shape(const Shape& s) {
  std::string out = "(None";
  for (std::size_t i = 1; i < s.rank(); ++i) out += ", " + std::to_string(s[i]);
  return out + ")";
}

std::string grouped(std::size_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

template <typename T>
std::string model_summary(Model<T>& model, bool compare_reported) {
  const auto audit = count_params(model);
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %-16s %-22s %12s %14s\n", "Layer", "Type", "Output Shape", "Trainable",
                "Non-trainable");
  os << line << std::string(90, '=') << '\n';
  for (const auto& row : audit.rows) {
    std::snprintf(line, sizeof line, "%-22s %-16s %-22s %12s %14s\n", row.name.c_str(),
                  std::string(to_string(row.kind)).c_str(), keras_shape(row.output_shape).c_str(),
                  grouped(row.trainable).c_str(), grouped(row.non_trainable).c_str());
    os << line;
  }
  os << std::string(90, '=') << '\n';
  os << "Total params: " << grouped(audit.total()) << '\n'
     << "Trainable params: " << grouped(audit.trainable) << '\n'
     << "Non-trainable params: " << grouped(audit.non_trainable) << '\n';
  if (compare_reported) {
    auto mark = [](std::size_t audited, std::size_t reported) {
      return audited == reported ? std::string("reproduced") : std::string("UNREPRODUCED");
    };
    os << '\n';
    std::snprintf(line, sizeof line, "%-22s %14s %14s  %s\n", "Reported vs audited", "reported", "audited", "status");
    os << line;
    const std::pair<const char*, std::pair<std::size_t, std::size_t>> items[] = {
        {"Total params", {ReportedTotals::total, audit.total()}},
        {"Trainable params", {ReportedTotals::trainable, audit.trainable}},
        {"Non-trainable params", {ReportedTotals::non_trainable, audit.non_trainable}},
    };
    for (const auto& [label, v] : items) {
      std::snprintf(line, sizeof line, "%-22s %14s %14s  %s\n", label, grouped(v.first).c_str(),
                    grouped(v.second).c_str(), mark(v.second, v.first).c_str());
      os << line;
    }
  }
  return os.str();
}

// Checkpoints -------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[6] = {'S', 'E', 'P', 'S', 'E', '1'};

}  // namespace

void save_checkpoint(Model<float>& model, std::ostream& sink) {
  const std::string config = model.config().to_text();
  sink.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const auto len = static_cast<std::uint32_t>(config.size());
  const unsigned char b[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                              static_cast<unsigned char>(len >> 16), static_cast<unsigned char>(len >> 24)};
  sink.write(reinterpret_cast<const char*>(b), 4);
  sink.write(config.data(), static_cast<std::streamsize>(config.size()));
  for (auto& p : model.params()) write_tensor(*p.slot.value, sink);
  if (!sink) throw Error(ErrorCode::IoError, "checkpoint write failed");
}

Model<float> load_checkpoint(std::istream& source) {
  char magic[sizeof kCheckpointMagic];
  source.read(magic, sizeof magic);
  if (source.gcount() != sizeof magic) throw Error(ErrorCode::TruncatedPayload, "missing checkpoint header");
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::BadMagic, "not a SEPSE1 checkpoint");
  }
  unsigned char b[4];
  source.read(reinterpret_cast<char*>(b), 4);
  if (source.gcount() != 4) throw Error(ErrorCode::TruncatedPayload, "missing config length");
  const std::uint32_t len =
      std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
  std::string text(len, '\0');
  source.read(text.data(), len);
  if (static_cast<std::uint32_t>(source.gcount()) != len) {
    throw Error(ErrorCode::TruncatedPayload, "config block shorter than " + std::to_string(len) + " bytes");
  }

  ModelConfig config;
  try {
    config = ModelConfig::from_text(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigMismatch, std::string("checkpoint config invalid: ") + e.message());
  }
  Rng unused(0);
  Model<float> model(config, unused);
  for (auto& p : model.params()) {
    Tensor t = read_tensor(source);
    if (t.shape() != p.slot.value->shape()) {
      throw Error(ErrorCode::ConfigMismatch, p.name + " stored as " + t.shape().to_string() + ", architecture needs " +
                                                 p.slot.value->shape().to_string());
    }
    *p.slot.value = std::move(t);
  }
  return model;
}

void save_checkpoint(Model<float>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  save_checkpoint(model, os);
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  return load_checkpoint(is);
}

template class Model<float>;
template class Model<double>;
template ParamAudit count_params(Model<float>&);
template ParamAudit count_params(Model<double>&);
template std::string model_summary(Model<float>&, bool);
template std::string model_summary(Model<double>&, bool);

}  // namespace sepcnn
