// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "gmn/graph.hpp"
#include "gmn/text_io.hpp"

namespace gmn {

// Text format:
//   GMNGRAPH v1 n=<n> l=<l> edges=<m> task=<kind> [selfloops=1]
//   <u> <v>                      (m lines)
//   <x_0> ... <x_{l-1}>          (n lines)
//   [LABELS node|graph           followed by n or 1 values, one per line]

inline void write_graph(std::ostream& out, const Graph& g) {
  out << "GMNGRAPH v1 n=" << g.num_nodes() << " l=" << g.feature_dim() << " edges=" << g.num_edges()
      << " task=" << to_string(g.task());
  if (g.self_loops()) out << " selfloops=1";
  out << '\n';
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
  const auto& x = g.features();
  const std::size_t l = g.feature_dim();
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    for (std::size_t j = 0; j < l; ++j) {
      if (j) out << ' ';
      out << text::format_double(x(u, j));
    }
    out << '\n';
  }
  const auto& labels = g.labels();
  if (labels.level != LabelLevel::None) {
    out << "LABELS " << (labels.level == LabelLevel::Node ? "node" : "graph") << '\n';
    for (double v : labels.values) out << text::format_double(v) << '\n';
  }
}

inline std::string graph_to_string(const Graph& g) {
  std::ostringstream os;
  write_graph(os, g);
  return os.str();
}

inline Graph read_graph(std::istream& in, const std::string& source = "<graph>") {
  text::LineReader reader(in, source);
  const std::string header = reader.expect_line("GMNGRAPH header");
  const auto tokens = text::split_ws(header);
  text::check_magic(reader, tokens, "GMNGRAPH", "v1");

  std::optional<std::uint64_t> n, l, m;
  TaskKind task = TaskKind::None;
  bool self_loops = false;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    auto kv = text::key_value(tokens[i]);
    if (!kv) reader.error("malformed header token '" + std::string(tokens[i]) + "'");
    auto [key, value] = *kv;
    if (key == "n") {
      n = reader.parse_uint(value, "n");
    } else if (key == "l") {
      l = reader.parse_uint(value, "l");
    } else if (key == "edges") {
      m = reader.parse_uint(value, "edges");
    } else if (key == "task") {
      try {
        task = parse_task_kind(value);
      } catch (const Error&) {
        reader.error("field 'task': unknown kind '" + std::string(value) + "'");
      }
    } else if (key == "selfloops") {
      self_loops = reader.parse_uint(value, "selfloops") != 0;
    } else {
      reader.error("unknown header field '" + std::string(key) + "'");
    }
  }
  if (!n || !l || !m) reader.error("header must define n, l and edges");

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(*m);
  for (std::uint64_t i = 0; i < *m; ++i) {
    const std::string line = reader.expect_line("edge line");
    const auto parts = text::split_ws(line);
    if (parts.size() != 2) reader.error("edge line needs two indices");
    edges.emplace_back(reader.parse_uint(parts[0], "edge.u"), reader.parse_uint(parts[1], "edge.v"));
  }

  num::Tensor<double> x({*n, *l});
  for (std::uint64_t u = 0; u < *n; ++u) {
    const std::string line = reader.expect_line("feature line");
    const auto parts = text::split_ws(line);
    if (parts.size() != *l) {
      reader.error("feature line has " + std::to_string(parts.size()) + " values, expected " + std::to_string(*l));
    }
    for (std::size_t j = 0; j < *l; ++j) x(u, j) = reader.parse_double(parts[j], "feature");
  }

  Labels labels;
  std::string line;
  while (reader.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto parts = text::split_ws(line);
    if (parts[0] != "LABELS" || parts.size() != 2) reader.error("expected 'LABELS node|graph'");
    if (labels.level != LabelLevel::None) reader.error("duplicate LABELS section");
    std::size_t count = 0;
    if (parts[1] == "node") {
      labels.level = LabelLevel::Node;
      count = *n;
    } else if (parts[1] == "graph") {
      labels.level = LabelLevel::Graph;
      count = 1;
    } else {
      reader.error("label level must be 'node' or 'graph'");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::string value = reader.expect_line("label value");
      labels.values.push_back(reader.parse_double(text::trim(value), "label"));
    }
  }

  return build_graph(*n, edges, std::move(x), {.self_loops = self_loops}).with_labels(task, std::move(labels));
}

inline Graph graph_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_graph(is);
}

inline void save_graph(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path);
  write_graph(out, g);
  require(static_cast<bool>(out), ErrorKind::IoError, "write failed for " + path);
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
  return read_graph(in, path);
}

}  // namespace gmn
