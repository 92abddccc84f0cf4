#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepcnn/tensor.hpp"

namespace sepcnn {

/// Decodes a PNG or JPEG (detected by signature) into an (H,W,3) tensor with
/// values in [0,255]. Grayscale is replicated to three channels and alpha is
/// dropped. Throws UnsupportedFormat, CorruptFile or IoError.
Tensor decode_image(const std::string& path);
Tensor decode_image_bytes(const std::vector<std::uint8_t>& bytes);

/// Writes an 8-bit RGB PNG. Values are in [0,1] and rounded to the nearest level.
void write_png(const std::string& path, const Tensor& image01);

/// Writes an 8-bit grayscale PNG from raw bytes (row-major, width * height).
void write_gray_png(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels);

/// Writes a baseline RGB JPEG from an (H,W,3) tensor in [0,1].
void write_jpeg(const std::string& path, const Tensor& image01, int quality = 95);

}  // namespace sepcnn
