#pragma once

// Small CSV helpers shared by the readers. Not part of the public API.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "cdnsim/types.hpp"

namespace cdnsim::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

/// Line-oriented reader that checks the header and tracks line numbers.
class Reader {
 public:
  Reader(std::istream& in, std::string_view source, std::string_view header)
      : in_(in), source_(source) {
    std::string line;
    if (!std::getline(in_, line)) throw ConfigError(fmt::format("{}: empty file", source_));
    ++line_no_;
    if (trim(line) != header) {
      throw ConfigError(fmt::format("{}:1: expected header '{}', got '{}'", source_, header, trim(line)));
    }
  }

  /// Next non-blank row split into fields; false at end of input.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (trim(line_).empty()) continue;
      fields = split(line_);
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_no_; }

  [[noreturn]] void fail(std::string_view what) const {
    throw ConfigError(fmt::format("{}:{}: {}", source_, line_no_, what));
  }

  template <typename T>
  T field(const std::vector<std::string_view>& fields, std::size_t k, std::string_view name) const {
    T v{};
    if (!parse(fields[k], v)) fail(fmt::format("invalid {} '{}'", name, fields[k]));
    return v;
  }

  void expect_fields(const std::vector<std::string_view>& fields, std::size_t n) const {
    if (fields.size() != n) fail(fmt::format("expected {} fields, got {}", n, fields.size()));
  }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  std::size_t line_no_ = 0;
};

}  // namespace cdnsim::csv
