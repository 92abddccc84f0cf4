#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

// Flat "key=value" text, one entry per line, '#' starts a comment. Used for
// run configs and for the config block embedded in checkpoints.

namespace sepcnn::kv {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Throws BadConfig on lines without '=' or with an empty key.
std::vector<Entry> parse(std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::size_t to_size(std::string_view key, std::string_view value);
std::uint64_t to_u64(std::string_view key, std::string_view value);
double to_double(std::string_view key, std::string_view value);
std::vector<std::size_t> to_size_list(std::string_view key, std::string_view value, char sep = ',');
std::vector<double> to_double_list(std::string_view key, std::string_view value);

/// Shortest text that parses back to the identical double.
std::string format_double(double v);

template <typename Seq>
std::string join(const Seq& items, std::string_view sep) {
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += sep;
    first = false;
    if constexpr (std::is_convertible_v<decltype(item), std::string_view>) {
      out += item;
    } else if constexpr (std::is_floating_point_v<std::decay_t<decltype(item)>>) {
      out += format_double(item);
    } else {
      out += std::to_string(item);
    }
  }
  return out;
}

}  // namespace sepcnn::kv
