// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gmn/text_io.hpp"

namespace gmn::verify {

/// Outcome of one property check. `pass` is decided by the check against
/// its own tolerance; `values` holds whatever was measured, in order.
struct PropertyReport {
  std::string name;
  bool pass = false;
  std::vector<std::pair<std::string, double>> values;
  std::size_t trials = 0;
  std::vector<std::uint64_t> seeds;
  std::string note;

  void add(std::string key, double v) { values.emplace_back(std::move(key), v); }

  double get(const std::string& key) const {
    for (const auto& [k, v] : values) {
      if (k == key) return v;
    }
    return 0.0;
  }
};

inline void write_report(std::ostream& out, const PropertyReport& r) {
  out << "[" << r.name << "] " << (r.pass ? "PASS" : "FAIL") << " trials=" << r.trials;
  if (!r.seeds.empty()) {
    out << " seeds=";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? "," : "") << r.seeds[i];
  }
  out << '\n';
  for (const auto& [k, v] : r.values) out << "  " << k << '=' << text::format_double(v) << '\n';
  if (!r.note.empty()) out << "  note: " << r.note << '\n';
}

}  // namespace gmn::verify
