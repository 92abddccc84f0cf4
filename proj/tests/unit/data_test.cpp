#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sepcnn/data.hpp"
#include "sepcnn/image_io.hpp"
#include "test_util.hpp"

using namespace sepcnn;
using testutil::code_of;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

void touch_png(const fs::path& p, std::uint8_t value = 128) {
  write_gray_png(p.string(), 4, 4, std::vector<std::uint8_t>(16, value));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Tensor ramp(std::size_t h, std::size_t w, std::size_t c) {
  Tensor t(Shape{h, w, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i % 251) / 255.0f;
  return t;
}

Dataset labelled(std::size_t per_class, std::size_t classes) {
  Dataset ds;
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    Tensor img(Shape{2, 2, 3}, static_cast<float>(i));
    ds.samples.push_back({img, i % classes, {}});
  }
  return ds;
}

}  // namespace

// --- scanning

TEST(Scan, SortedClassesGetConsecutiveLabels) {
  TempDir dir("scan");
  for (const char* cls : {"pituitary", "glioma", "notumor", "meningioma"}) {
    fs::create_directories(dir / cls);
    touch_png(dir / cls / "b.png");
    touch_png(dir / cls / "a.PNG");
  }
  std::ofstream(dir / "glioma" / "notes.txt") << "x";
  auto m = scan_directory(dir.path());
  ASSERT_EQ(m.class_names, (std::vector<std::string>{"glioma", "meningioma", "notumor", "pituitary"}));
  ASSERT_EQ(m.entries.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(m.entries[i].label, i / 2);
    EXPECT_EQ(m.entries[i].class_name, m.class_names[i / 2]);
  }
  EXPECT_TRUE(m.entries[0].path.ends_with("a.PNG"));
  EXPECT_TRUE(m.warnings.empty());
}

TEST(Scan, EmptyClassIsAWarning) {
  TempDir dir("scan_empty");
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  touch_png(dir / "a" / "x.png");
  auto m = scan_directory(dir.path());
  EXPECT_EQ(m.class_names.size(), 2u);
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_NE(m.warnings[0].find("EmptyClass"), std::string::npos);
  EXPECT_NE(m.warnings[0].find("b"), std::string::npos);
}

TEST(Scan, NoClassesFound) {
  TempDir dir("scan_none");
  EXPECT_EQ(code_of([&] { scan_directory(dir.path()); }), ErrorCode::NoClassesFound);
  EXPECT_EQ(code_of([&] { scan_directory(dir / "missing"); }), ErrorCode::NoClassesFound);
}

TEST(Manifest, CsvRoundTripWithQuoting) {
  Manifest m;
  m.class_names = {"a", "b,c"};
  m.entries = {{"/x/1.png", "a", 0}, {"/y/\"q\",2.png", "b,c", 1}};
  std::stringstream ss;
  write_manifest(m, ss);
  EXPECT_TRUE(ss.str().starts_with("path,class_name,label\n"));
  auto back = read_manifest(ss);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[1].path, "/y/\"q\",2.png");
  EXPECT_EQ(back.entries[1].class_name, "b,c");
  EXPECT_EQ(back.entries[1].label, 1u);
  EXPECT_EQ(back.class_names, m.class_names);
}

TEST(Manifest, BadHeader) {
  std::stringstream ss("file,label\n");
  EXPECT_EQ(code_of([&] { read_manifest(ss); }), ErrorCode::CorruptFile);
}

// --- decoding

TEST(Decode, WhitePngIs255) {
  TempDir dir("dec");
  write_gray_png((dir / "w.png").string(), 2, 2, {255, 255, 255, 255});
  auto img = decode_image((dir / "w.png").string());
  ASSERT_EQ(img.shape(), (Shape{2, 2, 3}));
  for (float v : img.data()) EXPECT_EQ(v, 255.0f);
}

TEST(Decode, GrayscaleReplicatedToThreeChannels) {
  TempDir dir("gray");
  write_gray_png((dir / "g.png").string(), 3, 1, {10, 20, 30});
  auto img = decode_image((dir / "g.png").string());
  ASSERT_EQ(img.shape(), (Shape{1, 3, 3}));
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(img[x * 3 + c], 10.0f * (x + 1));
}

TEST(Decode, RgbPngRoundTripIsExact) {
  TempDir dir("rgb");
  Tensor img = ramp(5, 7, 3);
  write_png((dir / "r.png").string(), img);
  auto back = normalize(decode_image((dir / "r.png").string()));
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], img[i]);
}

TEST(Decode, JpegDecodesApproximately) {
  TempDir dir("jpg");
  Tensor img(Shape{16, 16, 3}, 0.5f);
  write_jpeg((dir / "j.jpg").string(), img, 95);
  auto back = decode_image((dir / "j.jpg").string());
  ASSERT_EQ(back.shape(), (Shape{16, 16, 3}));
  for (float v : back.data()) EXPECT_NEAR(v, 127.5, 3.0);
}

TEST(Decode, TruncatedFilesAreCorrupt) {
  TempDir dir("trunc");
  write_png((dir / "a.png").string(), ramp(32, 32, 3));
  write_jpeg((dir / "a.jpg").string(), ramp(32, 32, 3));
  for (const char* name : {"a.png", "a.jpg"}) {
    auto bytes = read_bytes(dir / name);
    bytes.resize(bytes.size() / 2);
    EXPECT_EQ(code_of([&] { decode_image_bytes(bytes); }), ErrorCode::CorruptFile) << name;
  }
}

TEST(Decode, UnknownSignatureAndMissingFile) {
  EXPECT_EQ(code_of([] { decode_image_bytes({'B', 'M', 0, 0, 0, 0}); }), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of([] { decode_image_bytes({}); }), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of([] { decode_image("/nonexistent/x.png"); }), ErrorCode::IoError);
}

// --- transforms

TEST(Resize, SameSizeIsIdentity) {
  Tensor img = ramp(6, 9, 3);
  auto out = resize_bilinear(img, 6, 9);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out[i], img[i]);
}

TEST(Resize, ConstantStaysConstant) {
  Tensor img(Shape{13, 7, 3}, 0.375f);
  auto out = resize_bilinear(img, 150, 150);
  ASSERT_EQ(out.shape(), (Shape{150, 150, 3}));
  for (float v : out.data()) EXPECT_FLOAT_EQ(v, 0.375f);
}

TEST(Resize, DownsampleAveragesRows) {
  Tensor img(Shape{2, 2, 1}, {0.f, 0.f, 255.f, 255.f});
  auto out = resize_bilinear(img, 1, 1);
  EXPECT_FLOAT_EQ(out[0], 127.5f);
  EXPECT_EQ(code_of([&] { resize_bilinear(img, 0, 3); }), ErrorCode::BadTarget);
}

TEST(Resize, UpsampleStaysWithinInputRange) {
  Rng rng(41);
  Tensor img = Tensor::random(Shape{5, 4, 3}, UniformDist{0.2, 0.8}, rng);
  auto out = resize_bilinear(img, 17, 23);
  for (float v : out.data()) {
    EXPECT_GE(v, 0.2f - 1e-6f);
    EXPECT_LE(v, 0.8f + 1e-6f);
  }
}

TEST(Normalize, DividesBy255) {
  Tensor img(Shape{1, 1, 3}, {255.f, 0.f, 127.f});
  auto out = normalize(img);
  EXPECT_EQ(out[0], 1.0f);
  EXPECT_EQ(out[1], 0.0f);
  EXPECT_FLOAT_EQ(out[2], 127.0f / 255.0f);
}

TEST(Augment, HflipIsAnInvolution) {
  Tensor img = ramp(5, 6, 3);
  auto twice = hflip(hflip(img));
  EXPECT_TRUE(same(twice, img));
  auto once = hflip(img);
  EXPECT_EQ(once[0], img[(5) * 3]);
}

TEST(Augment, ZeroRotationIsIdentity) {
  Tensor img = ramp(9, 9, 3);
  auto out = rotate(img, 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_FLOAT_EQ(out[i], img[i]);
}

TEST(Augment, FourQuarterTurnsAreIdentity) {
  Tensor img = ramp(7, 7, 1);
  auto out = rotate(img, 90.0);
  auto back = rotate(rotate(rotate(out, 90.0), 90.0), 90.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 1e-5);
}

TEST(Augment, DisabledConfigIsIdentity) {
  Sample s{ramp(8, 8, 3), 2, "p"};
  Rng rng(5);
  auto out = augment(s, AugmentConfig{0.0, 0.0}, rng);
  EXPECT_TRUE(same(out.image, s.image));
  EXPECT_EQ(out.label, 2u);
}

TEST(Augment, SeededAndPreservesLabelAndShape) {
  Sample s{ramp(12, 10, 3), 3, "p"};
  Rng a(77), b(77);
  for (int i = 0; i < 10; ++i) {
    auto x = augment(s, {}, a);
    auto y = augment(s, {}, b);
    EXPECT_TRUE(same(x.image, y.image));
    EXPECT_EQ(x.label, 3u);
    EXPECT_EQ(x.image.shape(), s.image.shape());
  }
}

// --- split

TEST(Split, ZeroFractionKeepsEverythingForTraining) {
  auto ds = labelled(10, 4);
  Rng rng(1);
  auto [train, val] = split(ds, 0.0, rng);
  EXPECT_EQ(train.size(), 40u);
  EXPECT_TRUE(val.empty());
  EXPECT_EQ(val.partition, Partition::val);
}

TEST(Split, TenPercentIsStratified) {
  auto ds = labelled(100, 4);
  Rng rng(2);
  auto [train, val] = split(ds, 0.1, rng);
  EXPECT_EQ(val.class_counts(), (std::vector<std::size_t>{10, 10, 10, 10}));
  EXPECT_EQ(train.class_counts(), (std::vector<std::size_t>{90, 90, 90, 90}));
}

TEST(Split, BadFraction) {
  auto ds = labelled(2, 2);
  Rng rng(3);
  for (double f : {-0.1, 1.0, 1.5, std::nan("")}) {
    EXPECT_EQ(code_of([&] { split(ds, f, rng); }), ErrorCode::BadFraction) << f;
  }
}

TEST(SplitProperty, PartitionsWithoutLossOrDuplication) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 1 + rng.below(5);
    auto ds = labelled(1 + rng.below(30), classes);
    const double f = rng.uniform(0.0, 0.9);
    auto [train, val] = split(ds, f, rng);
    ASSERT_EQ(train.size() + val.size(), ds.size());
    std::vector<int> seen(ds.size(), 0);
    for (const auto* part : {&train, &val}) {
      float prev = -1.0f;
      for (const auto& s : part->samples) {
        const auto id = static_cast<std::size_t>(s.image[0]);
        seen[id]++;
        ASSERT_GT(s.image[0], prev);  // relative order kept
        prev = s.image[0];
      }
    }
    for (int c : seen) ASSERT_EQ(c, 1);
  }
}

// --- synthetic data and loading

TEST(Synth, BalancedShapedAndQuantized) {
  Rng rng(10);
  auto ds = synth_dataset(5, 32, rng);
  ASSERT_EQ(ds.size(), 20u);
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{5, 5, 5, 5}));
  for (const auto& s : ds.samples) {
    ASSERT_EQ(s.image.shape(), (Shape{32, 32, 3}));
    for (float v : s.image.data()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
      ASSERT_EQ(std::lround(v * 255.0f) / 255.0f, v);
    }
  }
  EXPECT_EQ(code_of([&] { synth_dataset(1, 4, rng); }), ErrorCode::BadConfig);
}

TEST(Synth, SameSeedSameImages) {
  Rng a(11), b(11), c(12);
  auto x = synth_dataset(3, 16, a);
  auto y = synth_dataset(3, 16, b);
  auto z = synth_dataset(3, 16, c);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_TRUE(same(x.samples[i].image, y.samples[i].image));
  EXPECT_FALSE(same(x.samples[0].image, z.samples[0].image));
}

// Disc centers are filled, ring centers are background.
TEST(Synth, DiscAndRingSeparableByCenterIntensity) {
  Rng rng(13);
  auto ds = synth_dataset(100, 32, rng);
  std::size_t correct = 0, total = 0;
  for (const auto& s : ds.samples) {
    if (s.label > 1) continue;
    double center = 0.0;
    for (std::size_t y = 14; y < 18; ++y)
      for (std::size_t x = 14; x < 18; ++x) center += s.image[(y * 32 + x) * 3];
    center /= 16.0;
    const std::size_t guess = center > 0.45 ? 0 : 1;
    correct += guess == s.label;
    ++total;
  }
  EXPECT_GT(static_cast<double>(correct) / total, 0.9);
}

TEST(Load, DirectoryPipelineResizesAndNormalizes) {
  TempDir dir("load");
  Rng rng(14);
  auto ds = synth_dataset(2, 24, rng);
  write_dataset_png(ds, dir.path());
  auto m = scan_directory(dir.path());
  EXPECT_EQ(m.class_names, ds.class_names);
  ASSERT_EQ(m.entries.size(), 8u);

  auto loaded = load_dataset(m, 24, 24, Partition::test);
  EXPECT_EQ(loaded.partition, Partition::test);
  // Directory order groups by class; synth interleaves classes.
  for (const auto& s : loaded.samples) {
    const auto k = static_cast<std::size_t>(std::stoi(fs::path(s.source_path).stem().string()));
    EXPECT_TRUE(same(s.image, ds.samples[k * 4 + s.label].image));
  }

  auto resized = load_dataset(m, 16, 20, Partition::train);
  for (const auto& s : resized.samples) {
    ASSERT_EQ(s.image.shape(), (Shape{16, 20, 3}));
    for (float v : s.image.data()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Load, CorruptImagePropagates) {
  TempDir dir("load_bad");
  fs::create_directories(dir / "a");
  std::ofstream(dir / "a" / "bad.png", std::ios::binary) << "\x89PNG\r\n\x1a\n garbage";
  auto m = scan_directory(dir.path());
  EXPECT_EQ(code_of([&] { load_dataset(m, 8, 8, Partition::train); }), ErrorCode::CorruptFile);
}

TEST(Batch, StacksImagesAndLabels) {
  auto ds = labelled(2, 2);
  auto [x, y] = make_batch(ds.samples, {3, 0});
  ASSERT_EQ(x.shape(), (Shape{2, 2, 2, 3}));
  EXPECT_EQ(x[0], 3.0f);
  EXPECT_EQ(x[12], 0.0f);
  EXPECT_EQ(y, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(code_of([&] { make_batch(ds.samples, {}); }), ErrorCode::EmptyDataset);
  ds.samples[1].image = Tensor(Shape{3, 2, 3});
  EXPECT_EQ(code_of([&] { make_batch(ds.samples, {0, 1}); }), ErrorCode::ShapeMismatch);
}
