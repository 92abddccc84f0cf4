#include "sepcnn/tensor.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sepcnn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadDistributionParams: return "BadDistributionParams";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::BackwardBeforeForward: return "BackwardBeforeForward";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::NotOneHot: return "NotOneHot";
    case ErrorCode::NotDistribution: return "NotDistribution";
    case ErrorCode::NonDeterministicForward: return "NonDeterministicForward";
    case ErrorCode::NoClassesFound: return "NoClassesFound";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::BadTarget: return "BadTarget";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NumericFailure: return "NumericFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > kMaxRank) {
    throw Error(ErrorCode::RankOutOfRange, "rank " + std::to_string(dims_.size()) + " not in 1..4");
  }
  for (auto d : dims_) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "zero-sized dimension in " + to_string());
  }
}

std::size_t Shape::elements() const noexcept {
  if (dims_.empty()) return 0;
  std::size_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

namespace {

constexpr std::array<char, 4> kMagic{'R', 'T', 'F', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_exact(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

}  // namespace

void write_tensor(const Tensor& t, std::ostream& sink) {
  if (t.empty()) throw Error(ErrorCode::RankOutOfRange, "cannot serialize an empty tensor");
  sink.write(kMagic.data(), kMagic.size());
  const auto rank = static_cast<unsigned char>(t.rank());
  sink.put(static_cast<char>(rank));
  for (auto d : t.shape().dims()) put_u32(sink, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(sink, std::bit_cast<std::uint32_t>(v));
  if (!sink) throw Error(ErrorCode::IoError, "tensor write failed");
}

Tensor read_tensor(std::istream& source) {
  std::array<char, 4> magic{};
  if (!get_exact(source, magic.data(), magic.size())) {
    throw Error(ErrorCode::TruncatedPayload, "missing tensor header");
  }
  if (magic != kMagic) throw Error(ErrorCode::BadMagic, "expected RTF1 tensor record");
  unsigned char rank = 0;
  if (!get_exact(source, &rank, 1)) throw Error(ErrorCode::TruncatedPayload, "missing rank byte");
  if (rank < 1 || rank > Shape::kMaxRank) {
    throw Error(ErrorCode::RankOutOfRange, "rank " + std::to_string(rank) + " not in 1..4");
  }
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) {
    unsigned char b[4];
    if (!get_exact(source, b, 4)) throw Error(ErrorCode::TruncatedPayload, "truncated dims");
    d = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
  }
  Shape shape(std::move(dims));
  std::vector<unsigned char> bytes(shape.elements() * 4);
  if (!get_exact(source, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::TruncatedPayload, "payload shorter than " + std::to_string(bytes.size()) + " bytes");
  }
  std::vector<float> values(shape.elements());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const unsigned char* b = &bytes[4 * i];
    const std::uint32_t u =
        std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
    values[i] = std::bit_cast<float>(u);
  }
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const Tensor& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
  write_tensor(t, os);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_tensor(is);
}

}  // namespace sepcnn
