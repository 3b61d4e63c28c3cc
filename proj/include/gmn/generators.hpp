// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/graph.hpp"
#include "gmn/rng.hpp"

namespace gmn {

namespace detail {

inline num::Tensor<double> ones_features(std::size_t n) { return num::Tensor<double>({n, 1}, 1.0); }

}  // namespace detail

inline Graph path_graph(std::size_t n) {
  require(n >= 1, ErrorKind::InvalidParams, "path needs at least one node");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return build_graph(n, edges, detail::ones_features(n));
}

inline Graph cycle_graph(std::size_t n) {
  require(n >= 3, ErrorKind::InvalidParams, "cycle needs at least three nodes");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return build_graph(n, edges, detail::ones_features(n));
}

/// Connects i to i +- s (mod n) for every jump s.
inline Graph circulant_graph(std::size_t n, const std::vector<std::size_t>& jumps) {
  require(n >= 3 && !jumps.empty(), ErrorKind::InvalidParams, "circulant needs n >= 3 and a jump set");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (auto s : jumps) {
    require(s >= 1 && s <= n / 2, ErrorKind::InvalidParams, "circulant jump out of range: " + std::to_string(s));
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + s) % n);
  }
  return build_graph(n, edges, detail::ones_features(n));
}

/// Nodes of `b` follow the nodes of `a`; feature widths must agree.
inline Graph disjoint_union(const Graph& a, const Graph& b) {
  require(a.feature_dim() == b.feature_dim(), ErrorKind::InvalidParams, "feature widths differ");
  const std::size_t na = a.num_nodes();
  const std::size_t l = a.feature_dim();
  auto edges = edge_pairs(a);
  for (const auto& e : b.edges()) edges.emplace_back(e.u + na, e.v + na);
  num::Tensor<double> x({na + b.num_nodes(), l});
  std::copy(a.features().data().begin(), a.features().data().end(), x.data().begin());
  std::copy(b.features().data().begin(), b.features().data().end(),
            x.data().begin() + static_cast<std::ptrdiff_t>(na * l));
  return build_graph(na + b.num_nodes(), edges, std::move(x), {.self_loops = a.self_loops() || b.self_loops()});
}

/// G(n, p) with p = avg_degree / (n - 1), sampled by geometric edge skipping.
inline Graph er_avg_degree(std::size_t n, double avg_degree, std::uint64_t seed) {
  require(n >= 2 && avg_degree > 0 && avg_degree < static_cast<double>(n - 1), ErrorKind::InvalidParams,
          "er_avg_degree needs 0 < degree < n-1");
  const double p = avg_degree / static_cast<double>(n - 1);
  Rng rng(hash_key({seed, 0xe5ULL}));
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(static_cast<std::size_t>(avg_degree * static_cast<double>(n) / 2 * 1.1));
  const double log_q = std::log1p(-p);
  // Walk the strictly-lower triangle (v, w), w < v, in row-major order.
  std::int64_t v = 1;
  std::int64_t w = -1;
  const auto nn = static_cast<std::int64_t>(n);
  while (v < nn) {
    double r = rng.uniform();
    while (r <= 0.0) r = rng.uniform();
    w += 1 + static_cast<std::int64_t>(std::floor(std::log(r) / log_q));
    while (w >= v && v < nn) {
      w -= v;
      ++v;
    }
    if (v < nn) edges.emplace_back(static_cast<std::size_t>(w), static_cast<std::size_t>(v));
  }
  return build_graph(n, edges, detail::ones_features(n));
}

struct SbmParams {
  std::size_t n = 120;
  std::size_t k = 4;
  double p_in = 0.5;
  double p_out = 0.05;
};

/// Balanced stochastic block model. Node u belongs to community floor(u*k/n).
/// Features follow the cluster-seeding convention: one random node per
/// community carries a one-hot of its community in columns 1..k, every other
/// node has column 0 set. Node labels are the community ids.
inline Graph sbm(const SbmParams& params, std::uint64_t seed) {
  const auto [n, k, p_in, p_out] = params;
  require(k >= 1 && n >= k, ErrorKind::InvalidParams, "sbm needs 1 <= k <= n");
  require(p_in > p_out && p_in <= 1.0 && p_out >= 0.0, ErrorKind::InvalidParams, "sbm needs 0 <= p_out < p_in <= 1");
  Rng rng(hash_key({seed, 0x5b3ULL}));
  std::vector<std::size_t> community(n);
  for (std::size_t u = 0; u < n; ++u) community[u] = u * k / n;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.bernoulli(community[u] == community[v] ? p_in : p_out)) edges.emplace_back(u, v);
    }
  }
  num::Tensor<double> x({n, k + 1});
  for (std::size_t u = 0; u < n; ++u) x(u, 0) = 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t first = (c * n + k - 1) / k;
    const std::size_t last = ((c + 1) * n + k - 1) / k;
    const std::size_t seeded = first + rng.below(last - first);
    x(seeded, 0) = 0.0;
    x(seeded, c + 1) = 1.0;
  }
  Labels labels{LabelLevel::Node, {}};
  labels.values.reserve(n);
  for (auto c : community) labels.values.push_back(static_cast<double>(c));
  return build_graph(n, edges, std::move(x)).with_labels(TaskKind::NodeClass, std::move(labels));
}

struct PathSpec { std::size_t n = 2; };
struct CycleSpec { std::size_t n = 3; };
struct CirculantSpec { std::size_t n = 3; std::vector<std::size_t> jumps{1}; };
struct ErSpec { std::size_t n = 2; double avg_degree = 1.0; };
struct SbmSpec { SbmParams params; };
struct UnionSpec { std::vector<CycleSpec> cycles; };

/// Parameters for `generate`; disjoint_union composes cycle components,
/// which is what the expressiveness corpus needs.
using GeneratorSpec = std::variant<PathSpec, CycleSpec, CirculantSpec, ErSpec, SbmSpec, UnionSpec>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

/// Pure function of (spec, seed).
inline Graph generate(const GeneratorSpec& spec, std::uint64_t seed) {
  return std::visit(
      Overloaded{
          [](const PathSpec& s) { return path_graph(s.n); },
          [](const CycleSpec& s) { return cycle_graph(s.n); },
          [](const CirculantSpec& s) { return circulant_graph(s.n, s.jumps); },
          [seed](const ErSpec& s) { return er_avg_degree(s.n, s.avg_degree, seed); },
          [seed](const SbmSpec& s) { return sbm(s.params, seed); },
          [](const UnionSpec& s) {
            require(!s.cycles.empty(), ErrorKind::InvalidParams, "disjoint union of nothing");
            Graph g = cycle_graph(s.cycles.front().n);
            for (std::size_t i = 1; i < s.cycles.size(); ++i) g = disjoint_union(g, cycle_graph(s.cycles[i].n));
            return g;
          },
      },
      spec);
}

}  // namespace gmn
