// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gmn/gmn_layer.hpp"
#include "gmn/graph.hpp"
#include "gmn/sparse.hpp"

namespace gmn {

/// Graph structure used by the local blocks, built once per graph.
struct LocalStructure {
  SparseMatrix gcn;                // (deg_u deg_v)^{-1/2} on every edge
  std::vector<std::uint32_t> dst;  // directed edge list (u receives from v)
  std::vector<std::uint32_t> src;
};

inline LocalStructure local_structure(const Graph& g) {
  const std::size_t n = g.num_nodes();
  LocalStructure s;
  std::vector<Triplet> trips;
  for (std::size_t u = 0; u < n; ++u) {
    for (auto v : g.neighbors(u)) {
      const double w = 1.0 / std::sqrt(static_cast<double>(g.degree(u)) * static_cast<double>(g.degree(v)));
      trips.push_back({u, v, w});
      s.dst.push_back(static_cast<std::uint32_t>(u));
      s.src.push_back(v);
    }
  }
  s.gcn = from_triplets(n, trips);
  return s;
}

/// gcn_lite:      H'_u = W1 h_u + sum_{v in N(u)} (deg_u deg_v)^{-1/2} W2 h_v
/// gatedgcn_lite: H'_u = W1 h_u + sum_{v in N(u)} sigmoid(W3 h_u + W4 h_v) * W2 h_v
template <std::floating_point Real>
Var<Real> local_block(const LocalStructure& s, Var<Real> h, const ParamView<Real>& p, LocalKind kind) {
  const auto self = linear(h, p("W1"));
  const auto msg = linear(h, p("W2"));
  if (kind == LocalKind::GcnLite) return num::add(self, num::spmm(s.gcn, msg));
  require(kind == LocalKind::GatedGcnLite, ErrorKind::InvalidValue, "local block kind 'none' has no output");
  const auto at_dst = num::gather_rows(linear(h, p("W3")), s.dst);
  const auto at_src = num::gather_rows(linear(h, p("W4")), s.src);
  const auto gatev = num::sigmoid(num::add(at_dst, at_src));
  const auto edge_msg = num::mul(gatev, num::gather_rows(msg, s.src));
  return num::add(self, num::scatter_add_rows(edge_msg, s.dst, h.dim(0)));
}

/// Everything the model needs to know about one input graph.
struct GraphInput {
  const Graph* graph = nullptr;
  const SpectralCache* cache = nullptr;
  const LocalStructure* local = nullptr;
};

enum class DropSite : std::uint64_t { Ffn = 1, Local = 2, Residual = 3, Gmn = 4 };

/// Forward-pass switches; the key feeds every dropout mask.
struct RunMode {
  bool training = false;
  std::uint64_t key = 0;
};

inline std::uint64_t dropout_key(const RunMode& mode, std::size_t layer, DropSite site) {
  return hash_key({mode.key, layer, static_cast<std::uint64_t>(site)});
}

/// y = LN1(drop_res(Hin) + drop_gmn(GMN(Hin)) + drop_local(Local(Hin)))
/// Hout = LN2(y + drop_ffn(FFN(y)))
template <std::floating_point Real>
Var<Real> hybrid_layer(const GraphInput& in, Var<Real> h, const Bound<Real>& bound, const LayerConfig& c,
                       std::size_t layer, const RunMode& mode) {
  const ParamView<Real> lp{&bound, "layer" + std::to_string(layer)};
  const auto& r = c.dropout;
  auto drop = [&](Var<Real> x, double rate, DropSite site) {
    return num::dropout(x, rate, dropout_key(mode, layer, site), mode.training);
  };
  auto y = num::add(drop(h, r.residual, DropSite::Residual), drop(gmn_forward(*in.cache, h, lp.sub("gmn"), c), r.gmn, DropSite::Gmn));
  if (c.local != LocalKind::None) {
    y = num::add(y, drop(local_block(*in.local, h, lp.sub("local"), c.local), r.local, DropSite::Local));
  }
  if (c.layer_norm) y = num::layer_norm(y, lp("ln1.g"), lp("ln1.b"));
  if (c.ffn) {
    const auto hidden = num::unary(unary_of(c.ffn_act), linear(y, lp("ffn1.W"), lp("ffn1.b")));
    y = num::add(y, drop(linear(hidden, lp("ffn2.W"), lp("ffn2.b")), r.ffn, DropSite::Ffn));
  }
  if (c.layer_norm) y = num::layer_norm(y, lp("ln2.g"), lp("ln2.b"));
  return y;
}

/// Permutation-invariant pooling of node rows to a 1 x l row.
template <std::floating_point Real>
Var<Real> readout(Var<Real> h, Readout kind) {
  require(h.rank() == 2 && h.dim(0) > 0, ErrorKind::ShapeMismatch, "readout needs a nonempty n x l matrix");
  const auto pooled = num::reduce(kind == Readout::Mean ? num::Reduce::Mean : num::Reduce::Sum, h, 0);
  return num::reshape(pooled, num::Shape{1, h.dim(1)});
}

/// Encoder, stacked hybrid layers, optional pooling and head. Node-level
/// configs return n x out rows; graph-level configs return one row.
template <std::floating_point Real>
Var<Real> model_forward(const GraphInput& in, Var<Real> x, const Bound<Real>& bound, const LayerConfig& c,
                        const RunMode& mode) {
  auto h = x;
  if (c.in_dim > 0) {
    require(x.dim(1) == c.in_dim, ErrorKind::ConfigMismatch,
            "features have width " + std::to_string(x.dim(1)) + ", config in_dim=" + std::to_string(c.in_dim));
    h = linear(x, bound["encoder.W"], bound["encoder.b"]);
  }
  for (std::size_t i = 0; i < c.num_layers; ++i) h = hybrid_layer(in, h, bound, c, i, mode);
  if (c.level == Level::Graph) h = readout(h, c.readout);
  if (c.out_dim > 0) h = linear(h, bound["head.W"], bound["head.b"]);
  return h;
}

/// Node features of the graph as a tape constant of the requested precision.
template <std::floating_point Real>
Var<Real> features_of(Tape<Real>& tape, const Graph& g) {
  if constexpr (std::is_same_v<Real, double>) return tape.constant(g.features());
  else return tape.constant(g.features().template cast<Real>());
}

}  // namespace gmn
