#include "sepcnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <numbers>
#include <ostream>

#include "sepcnn/image_io.hpp"
#include "sepcnn/keyvalue.hpp"
#include "sepcnn/parallel.hpp"

namespace fs = std::filesystem;

namespace sepcnn {

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "unknown";
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& s : samples) {
    if (s.label >= counts.size()) counts.resize(s.label + 1, 0);
    counts[s.label]++;
  }
  return counts;
}

// Manifest ----------------------------------------------------------------------

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one CSV record; quoted fields may contain separators and doubled quotes.
std::vector<std::string> csv_record(std::istream& is, bool& ok) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  ok = false;
  char c;
  while (is.get(c)) {
    ok = true;
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          fields.back() += '"';
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

Manifest scan_directory(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::NoClassesFound, "data directory does not exist: " + root.string());
  }
  Manifest m;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) m.class_names.push_back(entry.path().filename().string());
  }
  if (m.class_names.empty()) throw Error(ErrorCode::NoClassesFound, "no class directories under " + root.string());
  std::sort(m.class_names.begin(), m.class_names.end());

  for (std::size_t label = 0; label < m.class_names.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(root / m.class_names[label])) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) m.warnings.push_back("EmptyClass: " + m.class_names[label] + " has no images");
    for (auto& f : files) m.entries.push_back({std::move(f), m.class_names[label], label});
  }
  return m;
}

void write_manifest(const Manifest& manifest, std::ostream& os) {
  os << "path,class_name,label\n";
  for (const auto& e : manifest.entries) {
    os << csv_field(e.path) << ',' << csv_field(e.class_name) << ',' << e.label << '\n';
  }
}

Manifest read_manifest(std::istream& is) {
  bool ok = false;
  const auto header = csv_record(is, ok);
  if (!ok || header != std::vector<std::string>{"path", "class_name", "label"}) {
    throw Error(ErrorCode::CorruptFile, "manifest header must be path,class_name,label");
  }
  Manifest m;
  while (true) {
    auto fields = csv_record(is, ok);
    if (!ok) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 3) throw Error(ErrorCode::CorruptFile, "manifest row needs 3 fields");
    const std::size_t label = kv::to_size("label", fields[2]);
    if (label >= m.class_names.size()) m.class_names.resize(label + 1);
    if (!m.class_names[label].empty() && m.class_names[label] != fields[1]) {
      throw Error(ErrorCode::CorruptFile, "label " + fields[2] + " maps to two class names");
    }
    m.class_names[label] = fields[1];
    m.entries.push_back({std::move(fields[0]), std::move(fields[1]), label});
  }
  return m;
}

// Image transforms ----------------------------------------------------------------

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "resize expects (H,W,C)");
  if (out_h == 0 || out_w == 0) throw Error(ErrorCode::BadTarget, "resize target has a zero dimension");
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  Tensor out(Shape{out_h, out_w, C});
  const double scale_y = static_cast<double>(H) / static_cast<double>(out_h);
  const double scale_x = static_cast<double>(W) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = std::clamp((static_cast<double>(y) + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(H - 1));
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double wy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = std::clamp((static_cast<double>(x) + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(W - 1));
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double wx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        const double a = image[(y0 * W + x0) * C + c], b = image[(y0 * W + x1) * C + c];
        const double d = image[(y1 * W + x0) * C + c], e = image[(y1 * W + x1) * C + c];
        const double top = a + (b - a) * wx;
        const double bottom = d + (e - d) * wx;
        out[(y * out_w + x) * C + c] = static_cast<float>(top + (bottom - top) * wy);
      }
    }
  }
  return out;
}

Tensor normalize(const Tensor& image255) {
  Tensor out(image255.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image255[i] / 255.0f;
  return out;
}

Tensor hflip(const Tensor& image) {
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) out[(y * W + x) * C + c] = image[(y * W + (W - 1 - x)) * C + c];
    }
  }
  return out;
}

Tensor rotate(const Tensor& image, double degrees) {
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(H) - 1.0) / 2.0, cx = (static_cast<double>(W) - 1.0) / 2.0;
  auto pixel = [&](std::ptrdiff_t y, std::ptrdiff_t x, std::size_t c) -> double {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(H) || x >= static_cast<std::ptrdiff_t>(W)) return 0.0;
    return image[(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) * C + c];
  };
  Tensor out(image.shape());
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = pixel(y0, x0, c) * (1 - wx) + pixel(y0, x0 + 1, c) * wx;
        const double bottom = pixel(y0 + 1, x0, c) * (1 - wx) + pixel(y0 + 1, x0 + 1, c) * wx;
        out[(y * W + x) * C + c] = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng) {
  Sample out = sample;
  // Both draws always happen so the stream position does not depend on outcomes.
  const bool flip = rng.bernoulli(config.hflip_prob);
  const double angle = rng.uniform(-config.rotate_degrees_max, config.rotate_degrees_max);
  if (flip) out.image = hflip(out.image);
  if (config.rotate_degrees_max > 0.0) out.image = rotate(out.image, angle);
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, Rng& rng) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorCode::BadFraction, "validation fraction must be in [0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(dataset.class_names.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto label = dataset.samples[i].label;
    if (label >= by_class.size()) by_class.resize(label + 1);
    by_class[label].push_back(i);
  }
  std::vector<bool> to_val(dataset.samples.size(), false);
  for (const auto& members : by_class) {
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
    const auto order = rng.permutation(members.size());
    for (std::size_t k = 0; k < n_val; ++k) to_val[members[order[k]]] = true;
  }
  Dataset train{{}, dataset.class_names, Partition::train};
  Dataset val{{}, dataset.class_names, Partition::val};
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (to_val[i] ? val : train).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train), std::move(val)};
}

Dataset load_dataset(const Manifest& manifest, std::size_t height, std::size_t width, Partition partition) {
  Dataset ds{std::vector<Sample>(manifest.entries.size()), manifest.class_names, partition};
  std::vector<std::exception_ptr> failures(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    try {
      const auto& e = manifest.entries[i];
      Tensor img = decode_image(e.path);
      if (img.dim(0) != height || img.dim(1) != width) img = resize_bilinear(img, height, width);
      ds.samples[i] = Sample{normalize(img), e.label, e.path};
    } catch (...) {
      failures[i] = std::current_exception();
    }
  });
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return ds;
}

// Synthetic patterns ----------------------------------------------------------------

Dataset synth_dataset(std::size_t n_per_class, std::size_t size, Rng& rng) {
  if (size < 8) throw Error(ErrorCode::BadConfig, "synthetic images need size >= 8");
  Dataset ds{{}, {"class0_disc", "class1_ring", "class2_cross", "class3_checker"}, Partition::train};
  const double s = static_cast<double>(size);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t label = 0; label < 4; ++label) {
      const double bg = rng.uniform(0.0, 0.15);
      const double fg = rng.uniform(0.75, 1.0);
      const double cx = s / 2 + rng.uniform(-0.1, 0.1) * s;
      const double cy = s / 2 + rng.uniform(-0.1, 0.1) * s;
      const double radius = rng.uniform(0.25, 0.33) * s;
      const double ring_width = rng.uniform(0.05, 0.08) * s;
      const double arm = rng.uniform(0.28, 0.4) * s;
      const double bar = rng.uniform(0.05, 0.08) * s;
      const double cell = std::max(2.0, std::floor(rng.uniform(s / 8, s / 4)));
      auto inside = [&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        const double d = std::hypot(dx, dy);
        switch (label) {
          case 0: return d <= radius;
          case 1: return d <= radius && d >= radius - ring_width;
          case 2:
            return (std::abs(dx) <= bar && std::abs(dy) <= arm) || (std::abs(dy) <= bar && std::abs(dx) <= arm);
          default: {
            const auto gx = static_cast<long>(std::floor((x - cx) / cell));
            const auto gy = static_cast<long>(std::floor((y - cy) / cell));
            return ((gx + gy) & 1) == 0;
          }
        }
      };
      Tensor img(Shape{size, size, 3});
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          double v = inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5) ? fg : bg;
          v = std::clamp(v + rng.uniform(-0.08, 0.08), 0.0, 1.0);
          const float q = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
          for (std::size_t c = 0; c < 3; ++c) img[(y * size + x) * 3 + c] = q;
        }
      }
      ds.samples.push_back({std::move(img), label, {}});
    }
  }
  return ds;
}

void write_dataset_png(const Dataset& dataset, const fs::path& root) {
  std::vector<std::size_t> counter(dataset.class_names.size(), 0);
  for (const auto& name : dataset.class_names) fs::create_directories(root / name);
  for (const auto& s : dataset.samples) {
    char file[32];
    std::snprintf(file, sizeof file, "%06zu.png", counter[s.label]++);
    write_png((root / dataset.class_names[s.label] / file).string(), s.image);
  }
}

std::pair<Tensor, std::vector<std::size_t>> make_batch(const std::vector<Sample>& samples,
                                                       const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  const Shape& img = samples.at(indices.front()).image.shape();
  const std::size_t per = img.elements();
  Tensor batch(Shape{indices.size(), img[0], img[1], img[2]});
  std::vector<std::size_t> labels;
  labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = samples.at(indices[k]);
    if (s.image.shape() != img) {
      throw Error(ErrorCode::ShapeMismatch, "sample " + std::to_string(indices[k]) + " has shape " +
                                                s.image.shape().to_string() + ", batch uses " + img.to_string());
    }
    std::copy(s.image.data().begin(), s.image.data().end(), batch.raw() + k * per);
    labels.push_back(s.label);
  }
  return {std::move(batch), std::move(labels)};
}

}  // namespace sepcnn
