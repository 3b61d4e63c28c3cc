// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmn/error.hpp"

namespace gmn::text {

/// 17 significant digits: enough for an exact double round-trip.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
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

inline std::optional<double> to_double(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by printf on some libcs.
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    return std::nullopt;
  }
  return v;
}

inline std::optional<std::uint64_t> to_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Line-oriented reader that reports 1-based line numbers in errors.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string expect_line(std::string_view what) {
    std::string line;
    if (!next(line)) error("unexpected end of file, expected " + std::string(what));
    return line;
  }

  [[noreturn]] void error(const std::string& message) const {
    fail(ErrorKind::ParseError, source_ + ":" + std::to_string(line_no_) + ": " + message);
  }

  double parse_double(std::string_view token, std::string_view field) const {
    auto v = to_double(token);
    if (!v) error("field '" + std::string(field) + "': not a number: '" + std::string(token) + "'");
    return *v;
  }

  std::uint64_t parse_uint(std::string_view token, std::string_view field) const {
    auto v = to_uint(token);
    if (!v) error("field '" + std::string(field) + "': not a non-negative integer: '" + std::string(token) + "'");
    return *v;
  }

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

/// Parses "key=value" header tokens; returns nullopt for other tokens.
inline std::optional<std::pair<std::string_view, std::string_view>> key_value(std::string_view token) {
  const auto eq = token.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  return std::pair{token.substr(0, eq), token.substr(eq + 1)};
}

/// Checks a "<MAGIC> v<k>" prefix; a wrong k is a VersionMismatch.
inline void check_magic(const LineReader& reader, const std::vector<std::string_view>& tokens,
                        std::string_view magic, std::string_view version) {
  if (tokens.size() < 2 || tokens[0] != magic) reader.error("missing '" + std::string(magic) + "' header");
  std::string_view v = tokens[1];
  if (v != version) {
    fail(ErrorKind::VersionMismatch,
         std::string(magic) + " version '" + std::string(v) + "' (supported: " + std::string(version) + ")");
  }
}

}  // namespace gmn::text
