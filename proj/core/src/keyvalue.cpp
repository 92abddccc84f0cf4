#include "sepcnn/keyvalue.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "sepcnn/error.hpp"

namespace sepcnn::kv {

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view value, const char* expected) {
  throw Error(ErrorCode::BadConfig,
              "key '" + std::string(key) + "': '" + std::string(value) + "' is not " + expected);
}

}  // namespace

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<Entry> parse(std::string_view text) {
  std::vector<Entry> entries;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key=value");
    }
    Entry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (e.key.empty()) throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty()) bad(key, value, "a non-negative integer");
  return v;
}

std::size_t to_size(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(std::string_view key, std::string_view value) {
  // from_chars for double is not available in every libstdc++ we target.
  const std::string buf(value);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size()) bad(key, value, "a number");
  return v;
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view value, char sep) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;
  for (const auto& part : split(value, sep)) out.push_back(to_size(key, part));
  return out;
}

std::vector<double> to_double_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  if (trim(value).empty()) return out;
  for (const auto& part : split(value, ',')) out.push_back(to_double(key, part));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace sepcnn::kv
