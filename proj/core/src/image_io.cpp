#include "sepcnn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace sepcnn {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<std::uint8_t>& b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  return b.size() >= 8 && std::equal(sig, sig + 8, b.begin());
}

bool is_jpeg(const std::vector<std::uint8_t>& b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }

Tensor decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::CorruptFile, std::string("png header: ") + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptFile, "png data: " + msg);
  }
  const std::size_t h = image.height, w = image.width;
  Tensor out(Shape{h, w, 3});
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = static_cast<float>(rgba[i * 4 + c]);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  int warnings = 0;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_emit_message(j_common_ptr cinfo, int level) {
  // Level -1 is a warning such as "premature end of data"; treat as corrupt.
  if (level < 0) reinterpret_cast<JpegErrorManager*>(cinfo->err)->warnings++;
}

Tensor decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_emit_message;
  std::vector<std::uint8_t> rgb;
  std::size_t h = 0, w = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::CorruptFile, std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = cinfo.output_height;
  w = cinfo.output_width;
  rgb.resize(h * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (err.warnings > 0) throw Error(ErrorCode::CorruptFile, "jpeg stream is truncated or damaged");
  if (h == 0 || w == 0) throw Error(ErrorCode::CorruptFile, "jpeg has no pixels");

  Tensor out(Shape{h, w, 3});
  for (std::size_t i = 0; i < rgb.size(); ++i) out[i] = static_cast<float>(rgb[i]);
  return out;
}

std::uint8_t to_byte(float v01) {
  const float v = std::clamp(v01, 0.0f, 1.0f) * 255.0f;
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace

Tensor decode_image_bytes(const std::vector<std::uint8_t>& bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::UnsupportedFormat, "not a PNG or JPEG stream");
}

Tensor decode_image(const std::string& path) {
  try {
    return decode_image_bytes(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), path + ": " + e.message());
  }
}

void write_png(const std::string& path, const Tensor& image01) {
  if (image01.rank() != 3 || image01.dim(2) != 3) throw Error(ErrorCode::ShapeMismatch, "write_png expects (H,W,3)");
  std::vector<std::uint8_t> bytes(image01.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(image01[i]);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(image01.dim(1));
  image.height = static_cast<png_uint_32>(image01.dim(0));
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, "cannot write " + path + ": " + image.message);
  }
}

void write_gray_png(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != width * height) throw Error(ErrorCode::LengthMismatch, "gray png pixel count");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, "cannot write " + path + ": " + image.message);
  }
}

void write_jpeg(const std::string& path, const Tensor& image01, int quality) {
  if (image01.rank() != 3 || image01.dim(2) != 3) throw Error(ErrorCode::ShapeMismatch, "write_jpeg expects (H,W,3)");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  std::vector<std::uint8_t> bytes(image01.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(image01[i]);

  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(image01.dim(1));
  cinfo.image_height = static_cast<JDIMENSION>(image01.dim(0));
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = image01.dim(1) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = bytes.data() + static_cast<std::size_t>(cinfo.next_scanline) * stride;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

}  // namespace sepcnn
