#ifndef FUGU_TEXT_HPP
#define FUGU_TEXT_HPP

// Small helpers for the project's text formats.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace fugu::text {

/// Shortest representation that parses back to the identical value.
template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Lines without trailing '\r'.
std::vector<std::string_view> lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fugu::text

#endif  // FUGU_TEXT_HPP
