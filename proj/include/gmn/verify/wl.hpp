// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "gmn/graph.hpp"
#include "gmn/rng.hpp"

namespace gmn::verify {

using ColorHistogram = std::vector<std::pair<std::uint64_t, std::size_t>>;  // sorted by color

struct WlResult {
  std::vector<std::uint64_t> colors;  // per node
  ColorHistogram histogram;
  std::size_t iterations = 0;
};

/// Initial colors from the bits of each feature row.
inline std::vector<std::uint64_t> feature_colors(const Graph& g) {
  const auto& x = g.features();
  std::vector<std::uint64_t> c(g.num_nodes());
  for (std::size_t u = 0; u < c.size(); ++u) {
    std::uint64_t h = 0x77ULL;
    for (std::size_t j = 0; j < x.dim(1); ++j) h = mix64(h ^ mix64(std::bit_cast<std::uint64_t>(x(u, j))));
    c[u] = h;
  }
  return c;
}

inline ColorHistogram histogram_of(const std::vector<std::uint64_t>& colors) {
  std::map<std::uint64_t, std::size_t> counts;
  for (auto c : colors) ++counts[c];
  return {counts.begin(), counts.end()};
}

/// 1-WL color refinement: c'(u) = hash(c(u), sorted multiset of c(v), v in N(u)),
/// repeated until the partition stops splitting or `max_iters` is reached.
/// Colors are content hashes, so runs on different graphs are comparable
/// when they stop at the same iteration.
inline WlResult wl_refine(const Graph& g, std::size_t max_iters, std::vector<std::uint64_t> initial = {}) {
  const std::size_t n = g.num_nodes();
  WlResult r;
  r.colors = initial.empty() ? std::vector<std::uint64_t>(n, 0x9eULL) : std::move(initial);
  require(r.colors.size() == n, ErrorKind::ShapeMismatch, "one initial color per node");
  auto classes = [](const std::vector<std::uint64_t>& c) { return std::set<std::uint64_t>(c.begin(), c.end()).size(); };
  std::size_t count = classes(r.colors);
  std::vector<std::uint64_t> next(n), nbr;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t u = 0; u < n; ++u) {
      nbr.clear();
      for (auto v : g.neighbors(u)) nbr.push_back(r.colors[v]);
      std::sort(nbr.begin(), nbr.end());
      std::uint64_t h = mix64(r.colors[u] ^ 0xc01dULL);
      for (auto c : nbr) h = mix64(h ^ mix64(c));
      next[u] = h;
    }
    r.colors.swap(next);
    ++r.iterations;
    const std::size_t now = classes(r.colors);
    if (now == count) break;
    count = now;
  }
  r.histogram = histogram_of(r.colors);
  return r;
}

/// Refines the disjoint union so both graphs share one coloring, then
/// compares the color histograms of the two halves.
inline bool wl_equivalent(const Graph& a, const Graph& b, bool use_features = false) {
  if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges()) return false;
  std::vector<std::pair<std::size_t, std::size_t>> edges = edge_pairs(a);
  const std::size_t off = a.num_nodes();
  for (auto [u, v] : edge_pairs(b)) edges.emplace_back(u + off, v + off);
  const std::size_t n = off + b.num_nodes();
  const Graph both = build_graph(n, edges, num::Tensor<double>({n, 1}), {.self_loops = a.self_loops() || b.self_loops()});
  std::vector<std::uint64_t> init;
  if (use_features) {
    init = feature_colors(a);
    const auto cb = feature_colors(b);
    init.insert(init.end(), cb.begin(), cb.end());
  }
  const auto r = wl_refine(both, n, std::move(init));
  const std::vector<std::uint64_t> ca(r.colors.begin(), r.colors.begin() + static_cast<std::ptrdiff_t>(off));
  const std::vector<std::uint64_t> cb(r.colors.begin() + static_cast<std::ptrdiff_t>(off), r.colors.end());
  return histogram_of(ca) == histogram_of(cb);
}

}  // namespace gmn::verify
