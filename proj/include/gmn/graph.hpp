// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

enum class TaskKind { None, NodeClass, GraphClass, GraphRegression };

constexpr std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::None: return "none";
    case TaskKind::NodeClass: return "node_class";
    case TaskKind::GraphClass: return "graph_class";
    case TaskKind::GraphRegression: return "graph_regression";
  }
  return "none";
}

inline TaskKind parse_task_kind(std::string_view text) {
  for (auto k : {TaskKind::None, TaskKind::NodeClass, TaskKind::GraphClass, TaskKind::GraphRegression}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorKind::ParseError, "unknown task kind '" + std::string(text) + "'");
}

enum class LabelLevel { None, Node, Graph };

struct Labels {
  LabelLevel level = LabelLevel::None;
  std::vector<double> values;  // n entries for node level, 1 for graph level

  friend bool operator==(const Labels&, const Labels&) = default;
};

/// Undirected edge in canonical (min, max) orientation.
struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct BuildOptions {
  bool self_loops = false;
};

/// Immutable undirected graph with dense row-major node features.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t feature_dim() const noexcept { return features_.rank() == 2 ? features_.dim(1) : 0; }
  bool self_loops() const noexcept { return self_loops_; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  const num::Tensor<double>& features() const noexcept { return features_; }

  /// Entries of row u of the adjacency matrix; a self-loop counts once.
  std::size_t degree(std::size_t u) const { return offsets_.at(u + 1) - offsets_[u]; }
  std::span<const std::uint32_t> neighbors(std::size_t u) const {
    return {adjacency_.data() + offsets_.at(u), offsets_[u + 1] - offsets_[u]};
  }

  TaskKind task() const noexcept { return task_; }
  const Labels& labels() const noexcept { return labels_; }

  Graph with_features(num::Tensor<double> features) const;
  Graph with_labels(TaskKind task, Labels labels) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.self_loops_ == b.self_loops_ && a.edges_ == b.edges_ &&
           a.features_ == b.features_ && a.task_ == b.task_ && a.labels_ == b.labels_;
  }

  friend Graph build_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                           num::Tensor<double> features, BuildOptions options);

 private:
  void index_adjacency();

  std::size_t n_ = 0;
  bool self_loops_ = false;
  std::vector<Edge> edges_;
  num::Tensor<double> features_{num::Shape{0, 0}};
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adjacency_;
  TaskKind task_ = TaskKind::None;
  Labels labels_;
};

inline void Graph::index_adjacency() {
  offsets_.assign(n_ + 1, 0);
  for (const auto& e : edges_) {
    ++offsets_[e.u + 1];
    if (e.u != e.v) ++offsets_[e.v + 1];
  }
  for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.assign(offsets_[n_], 0);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[cursor[e.u]++] = e.v;
    if (e.u != e.v) adjacency_[cursor[e.v]++] = e.u;
  }
  for (std::size_t u = 0; u < n_; ++u) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]));
  }
}

inline Graph Graph::with_features(num::Tensor<double> features) const {
  require(features.rank() == 2 && features.dim(0) == n_, ErrorKind::FeatureRowMismatch,
          "feature matrix " + num::shape_string(features.shape()) + " for " + std::to_string(n_) + " nodes");
  Graph g(*this);
  g.features_ = std::move(features);
  return g;
}

inline Graph Graph::with_labels(TaskKind task, Labels labels) const {
  if (labels.level == LabelLevel::Node) {
    require(labels.values.size() == n_, ErrorKind::InvalidParams, "node labels must have one value per node");
  } else if (labels.level == LabelLevel::Graph) {
    require(labels.values.size() == 1, ErrorKind::InvalidParams, "graph label must be a single value");
  } else {
    require(labels.values.empty(), ErrorKind::InvalidParams, "label values without a label level");
  }
  Graph g(*this);
  g.task_ = task;
  g.labels_ = std::move(labels);
  return g;
}

/// Canonicalizes the edge list (sorted, deduplicated, (min,max) orientation)
/// and indexes adjacency. Duplicates and reversed pairs collapse.
inline Graph build_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                         num::Tensor<double> features, BuildOptions options = {}) {
  require(features.rank() == 2 && features.dim(0) == n, ErrorKind::FeatureRowMismatch,
          "feature matrix " + num::shape_string(features.shape()) + " for " + std::to_string(n) + " nodes");
  require(n <= std::size_t{UINT32_MAX}, ErrorKind::InvalidParams, "node count exceeds 32-bit indexing");
  Graph g;
  g.n_ = n;
  g.self_loops_ = options.self_loops;
  g.features_ = std::move(features);
  g.edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    require(a < n && b < n, ErrorKind::IndexOutOfRange,
            "edge (" + std::to_string(a) + "," + std::to_string(b) + ") with n=" + std::to_string(n));
    require(a != b || options.self_loops, ErrorKind::DuplicateSelfLoop,
            "self-loop (" + std::to_string(a) + "," + std::to_string(a) + ") without the self_loops flag");
    g.edges_.push_back({static_cast<std::uint32_t>(std::min(a, b)), static_cast<std::uint32_t>(std::max(a, b))});
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  g.index_adjacency();
  return g;
}

inline Graph build_graph(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges,
                         num::Tensor<double> features, BuildOptions options = {}) {
  return build_graph(n, std::span<const std::pair<std::size_t, std::size_t>>(edges.begin(), edges.size()),
                     std::move(features), options);
}

inline std::vector<std::pair<std::size_t, std::size_t>> edge_pairs(const Graph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(g.num_edges());
  for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
  return out;
}

/// Adds a self-loop at every node (used to build Ã = D^-1/2 (A+I) D^-1/2).
inline Graph with_self_loops(const Graph& g) {
  auto pairs = edge_pairs(g);
  for (std::size_t u = 0; u < g.num_nodes(); ++u) pairs.emplace_back(u, u);
  return build_graph(g.num_nodes(), pairs, g.features(), {.self_loops = true})
      .with_labels(g.task(), g.labels());
}

/// True when `perm` is a bijection on [0, n).
inline bool is_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (auto p : perm) {
    if (p >= n || seen[p]) return false;
    seen[p] = 1;
  }
  return true;
}

inline std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  require(is_permutation(perm, perm.size()), ErrorKind::InvalidPermutation, "not a permutation");
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

/// Row u of `rows` moves to row perm[u].
template <std::floating_point Real>
num::Tensor<Real> permute_rows(const num::Tensor<Real>& rows, std::span<const std::size_t> perm) {
  require(rows.rank() >= 1 && is_permutation(perm, rows.dim(0)), ErrorKind::InvalidPermutation,
          "permutation does not match row count");
  num::Tensor<Real> out(rows.shape());
  const std::size_t stride = rows.dim(0) ? rows.size() / rows.dim(0) : 0;
  for (std::size_t u = 0; u < perm.size(); ++u) {
    std::copy_n(rows.data().begin() + static_cast<std::ptrdiff_t>(u * stride), stride,
                out.data().begin() + static_cast<std::ptrdiff_t>(perm[u] * stride));
  }
  return out;
}

/// Relabels node u as perm[u]; features and node labels move with their node.
inline Graph permute(const Graph& g, std::span<const std::size_t> perm) {
  require(is_permutation(perm, g.num_nodes()), ErrorKind::InvalidPermutation, "not a permutation of the nodes");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(g.num_edges());
  for (const auto& e : g.edges()) pairs.emplace_back(perm[e.u], perm[e.v]);
  Labels labels = g.labels();
  if (labels.level == LabelLevel::Node) {
    for (std::size_t u = 0; u < perm.size(); ++u) labels.values[perm[u]] = g.labels().values[u];
  }
  return build_graph(g.num_nodes(), pairs, permute_rows(g.features(), perm), {.self_loops = g.self_loops()})
      .with_labels(g.task(), std::move(labels));
}

/// Re-checks every Graph invariant; returns an empty string when all hold.
inline std::string validate(const Graph& g) {
  const std::size_t n = g.num_nodes();
  if (g.features().rank() != 2 || g.features().dim(0) != n) return "feature rows do not match node count";
  const auto edges = g.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u > e.v) return "edge not in (min,max) form";
    if (e.v >= n) return "edge endpoint out of range";
    if (e.u == e.v && !g.self_loops()) return "self-loop without flag";
    if (i > 0 && !(edges[i - 1] < e)) return "edge list not sorted and unique";
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (auto v : g.neighbors(u)) {
      const auto back = g.neighbors(v);
      if (!std::binary_search(back.begin(), back.end(), static_cast<std::uint32_t>(u))) {
        return "adjacency not symmetric";
      }
    }
  }
  for (auto v : g.features().data()) {
    if (!std::isfinite(v)) return "non-finite feature";
  }
  return {};
}

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  TaskKind task = TaskKind::None;
};

/// Index lists must be disjoint and together cover [0, dataset_size).
inline bool is_valid_split(const DatasetSplit& split, std::size_t dataset_size) {
  std::vector<char> seen(dataset_size, 0);
  std::size_t count = 0;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (auto i : *part) {
      if (i >= dataset_size || seen[i]) return false;
      seen[i] = 1;
      ++count;
    }
  }
  return count == dataset_size;
}

}  // namespace gmn
