// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "gmn/config.hpp"
#include "gmn/params.hpp"
#include "gmn/text_io.hpp"

namespace gmn {

/// Trained state: both configs plus every parameter tensor.
struct Checkpoint {
  LayerConfig layer;
  TrainConfig train;
  ParamSet params;
};

// Layout:
//   GMNCKPT v1
//   config <count>
//   <key>=<value>            (count lines, layer keys then train keys)
//   tensors <count>
//   <name> <rank> <dims...>  then 8 * size raw little-endian bytes, per tensor
inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  auto kv = to_kv(ck.layer);
  for (auto& p : to_kv(ck.train)) kv.push_back(std::move(p));
  out << "GMNCKPT v1\nconfig " << kv.size() << '\n';
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  out << "tensors " << ck.params.size() << '\n';
  for (const auto& [name, t] : ck.params) {
    out << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (double v : t.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (auto& b : bytes) {
        b = static_cast<char>(bits & 0xffU);
        bits >>= 8;
      }
      out.write(bytes, 8);
    }
  }
}

inline std::string checkpoint_bytes(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, ck);
  return out.str();
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>") {
  text::LineReader reader(in, source);
  const std::string header = reader.expect_line("GMNCKPT header");
  text::check_magic(reader, text::split_ws(header), "GMNCKPT", "v1");

  auto counted = [&](std::string_view word) {
    const std::string line = reader.expect_line(std::string(word) + " count");
    const auto tokens = text::split_ws(line);
    if (tokens.size() != 2 || tokens[0] != word) reader.error("expected '" + std::string(word) + " <count>'");
    return reader.parse_uint(tokens[1], word);
  };

  Checkpoint ck;
  const auto nkv = counted("config");
  for (std::uint64_t i = 0; i < nkv; ++i) {
    const std::string line = reader.expect_line("config entry");
    const auto kv = text::key_value(line);
    if (!kv) reader.error("malformed config entry '" + line + "'");
    try {
      if (!apply_kv(ck.layer, kv->first, kv->second) && !apply_kv(ck.train, kv->first, kv->second)) {
        reader.error("unknown config key '" + std::string(kv->first) + "'");
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw;
      reader.error(e.what());
    }
  }
  const auto nt = counted("tensors");
  for (std::uint64_t i = 0; i < nt; ++i) {
    const std::string line = reader.expect_line("tensor header");
    const auto tokens = text::split_ws(line);
    if (tokens.size() < 2) reader.error("tensor header needs a name and a rank");
    const auto rank = reader.parse_uint(tokens[1], "rank");
    if (tokens.size() != 2 + rank) reader.error("tensor header rank does not match its dims");
    num::Shape shape;
    for (std::size_t j = 0; j < rank; ++j) shape.push_back(reader.parse_uint(tokens[2 + j], "dim"));
    num::Tensor<double> t(shape);
    for (auto& v : t.data()) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) reader.error("truncated data for tensor " + std::string(tokens[0]));
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[b];
      v = std::bit_cast<double>(bits);
    }
    ck.params.emplace(std::string(tokens[0]), std::move(t));
  }
  validate(ck.layer);
  validate(ck.train);
  check_params(ck.params, ck.layer);
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path);
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
  return read_checkpoint(in, path);
}

}  // namespace gmn
