#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sepcnn/rng.hpp"
#include "sepcnn/tensor.hpp"

namespace sepcnn {

/// image is (H,W,3) in [0,1]; source_path is empty for generated samples.
struct Sample {
  Tensor image;
  std::size_t label = 0;
  std::string source_path;
};

enum class Partition { train, val, test };

std::string_view to_string(Partition p);

struct Dataset {
  std::vector<Sample> samples;
  /// Label i is class_names[i]; sorted directory names for scanned data.
  std::vector<std::string> class_names;
  Partition partition = Partition::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<std::size_t> class_counts() const;
};

struct ManifestEntry {
  std::string path;
  std::string class_name;
  std::size_t label = 0;
};

struct Manifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  /// Non-fatal findings, e.g. a class directory without images.
  std::vector<std::string> warnings;
};

/// Classes are the sorted immediate subdirectories of root; images are
/// files ending in .png/.jpg/.jpeg (any case), listed lexicographically.
/// Throws NoClassesFound when root has no subdirectories or does not exist.
Manifest scan_directory(const std::filesystem::path& root);

/// CSV with header "path,class_name,label", LF line endings.
void write_manifest(const Manifest& manifest, std::ostream& os);
Manifest read_manifest(std::istream& is);

/// Bilinear resampling with half-pixel centers. Throws BadTarget for a zero size.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Divides every pixel by 255.
Tensor normalize(const Tensor& image255);

/// Horizontal mirror of an (H,W,C) image.
Tensor hflip(const Tensor& image);

/// Rotation about the image center, bilinear resampling, zero fill outside.
Tensor rotate(const Tensor& image, double degrees);

struct AugmentConfig {
  double hflip_prob = 0.5;
  double rotate_degrees_max = 15.0;
};

/// Optional horizontal flip, then rotation by U(-max, max) degrees. The
/// label and shape are preserved.
Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng);

/// Stratified split: per class, round(fraction * count) samples go to the
/// validation set. Relative order is preserved. Throws BadFraction.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, Rng& rng);

/// Decodes, resizes and normalizes every manifest entry.
Dataset load_dataset(const Manifest& manifest, std::size_t height, std::size_t width, Partition partition);

/// Procedural 4-class set of grayscale-style patterns with seeded noise:
/// class0_disc, class1_ring, class2_cross, class3_checker. Pixel values are
/// multiples of 1/255 so PNG round trips are exact.
Dataset synth_dataset(std::size_t n_per_class, std::size_t size, Rng& rng);

/// Writes root/<class_name>/<index>.png for every sample.
void write_dataset_png(const Dataset& dataset, const std::filesystem::path& root);

/// Stacks samples[indices] into (N,H,W,C) plus their labels.
std::pair<Tensor, std::vector<std::size_t>> make_batch(const std::vector<Sample>& samples,
                                                       const std::vector<std::size_t>& indices);

}  // namespace sepcnn
