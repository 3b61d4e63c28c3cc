// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gmn/generators.hpp"
#include "gmn/gmn_layer.hpp"
#include "gmn/verify/equivariance.hpp"
#include "gmn/verify/report.hpp"
#include "gmn/verify/wl.hpp"

namespace gmn::verify {

struct GraphPair {
  std::string name;
  Graph a;
  Graph b;
};

inline Graph cycle_union(std::initializer_list<std::size_t> sizes) {
  return generate(UnionSpec{std::vector<CycleSpec>(sizes.begin(), sizes.end())}, 0);
}

/// Regular pairs that color refinement cannot tell apart: single cycles
/// against unions of shorter cycles, and circulant graphs with different jumps.
inline std::vector<GraphPair> wl_corpus() {
  std::vector<GraphPair> pairs{
      {"C6|C3+C3", cycle_graph(6), cycle_union({3, 3})},
      {"C8|C4+C4", cycle_graph(8), cycle_union({4, 4})},
      {"C9|C3+C3+C3", cycle_graph(9), cycle_union({3, 3, 3})},
      {"C10|C5+C5", cycle_graph(10), cycle_union({5, 5})},
      {"C12|C6+C6", cycle_graph(12), cycle_union({6, 6})},
      {"C12|C4+C4+C4", cycle_graph(12), cycle_union({4, 4, 4})},
      {"C7+C5|C3+C9", cycle_union({7, 5}), cycle_union({3, 9})},
      {"Ci8(1,2)|Ci8(1,3)", circulant_graph(8, {1, 2}), circulant_graph(8, {1, 3})},
  };
  const std::vector<std::pair<std::size_t, std::size_t>> skips{{2, 3}, {2, 4}, {3, 5}, {4, 6}, {5, 9}, {6, 11}};
  for (auto [s, t] : skips) {
    pairs.push_back({"Ci41(1," + std::to_string(s) + ")|Ci41(1," + std::to_string(t) + ")", circulant_graph(41, {1, s}),
                     circulant_graph(41, {1, t})});
  }
  return pairs;
}

/// Each corpus graph against a random relabeling of itself.
inline std::vector<GraphPair> isomorphic_controls(const std::vector<GraphPair>& corpus, std::uint64_t seed) {
  std::vector<GraphPair> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& g = corpus[i].a;
    out.push_back({corpus[i].name + "~perm", g, permute(g, random_permutation(g.num_nodes(), hash_key({seed, i})))});
  }
  return out;
}

/// Full symmetric-Laplacian spectrum, ascending.
inline std::vector<double> laplacian_spectrum(const Graph& g) {
  EigOptions eo;
  eo.skip_zero = false;
  eo.solver = SolverKind::Dense;
  return spectral_cache(g, Normalization::Sym, g.num_nodes(), eo).eigenvalues;
}

/// Different spectra certify non-isomorphism.
inline bool spectra_differ(const Graph& a, const Graph& b, double tol = 1e-8) {
  if (a.num_nodes() != b.num_nodes()) return true;
  const auto x = laplacian_spectrum(a), y = laplacian_spectrum(b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i] - y[i]) > tol) return true;
  }
  return false;
}

struct ExpressivenessOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double separation = 1e-4;
  double iso_tol = 1e-8;
  double pair_fraction = 0.9;
  std::size_t min_seeds = 4;
  std::size_t d = 4;
  std::size_t l = 8;
  std::size_t m = 4;
};

/// One layer, T1 on additive encodings with the self-term, setagg phi.
inline LayerConfig expressiveness_config(const ExpressivenessOptions& o) {
  LayerConfig c;
  c.l = o.l;
  c.d = o.d;
  c.m = o.m;
  c.num_layers = 1;
  c.inner = InnerType::T1;
  c.agg = Agg::Add;
  c.self_term = true;
  c.phi.mode = PhiMode::SetAgg;
  c.local = LocalKind::None;
  c.layer_norm = false;
  c.ffn = false;
  return c;
}

/// Mean over nodes of the layer output on constant features.
inline std::vector<double> pooled_embedding(const LayerConfig& c, const ParamSet& ps, const Graph& g) {
  const auto cache = spectral_cache(g, Normalization::Sym, c.d);
  const auto h = gmn_layer_fn(c, ps)(cache, num::Tensor<double>({g.num_nodes(), c.l}, 1.0));
  std::vector<double> e(c.l, 0.0);
  for (std::size_t u = 0; u < h.dim(0); ++u) {
    for (std::size_t k = 0; k < c.l; ++k) e[k] += h(u, k) / static_cast<double>(h.dim(0));
  }
  return e;
}

inline double embedding_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Every pair must be 1-WL-equivalent (PairNotWLEquivalent otherwise). Passes
/// when, in at least `min_seeds` seeds, `pair_fraction` of the pairs sit at
/// least `separation` apart and every control at most `iso_tol` apart.
inline PropertyReport expressiveness_suite(const std::vector<GraphPair>& pairs, const std::vector<GraphPair>& controls,
                                           const ExpressivenessOptions& o = {}) {
  for (const auto& p : pairs) {
    require(wl_equivalent(p.a, p.b), ErrorKind::PairNotWLEquivalent, "pair " + p.name + " is separated by 1-WL");
  }
  const auto c = expressiveness_config(o);
  PropertyReport r;
  r.name = "expressiveness";
  r.seeds = o.seeds;
  r.trials = o.seeds.size() * (pairs.size() + controls.size());
  std::size_t good_seeds = 0;
  double worst_control = 0, min_sep = std::numeric_limits<double>::infinity();
  for (auto seed : o.seeds) {
    const auto ps = init_params(c, seed);
    std::size_t separated = 0;
    for (const auto& p : pairs) {
      const double dist = embedding_distance(pooled_embedding(c, ps, p.a), pooled_embedding(c, ps, p.b));
      min_sep = std::min(min_sep, dist);
      separated += dist >= o.separation ? 1 : 0;
    }
    double control = 0;
    for (const auto& p : controls) {
      control = std::max(control, embedding_distance(pooled_embedding(c, ps, p.a), pooled_embedding(c, ps, p.b)));
    }
    worst_control = std::max(worst_control, control);
    const double frac = pairs.empty() ? 0.0 : static_cast<double>(separated) / static_cast<double>(pairs.size());
    r.add("separated_fraction_seed" + std::to_string(seed), frac);
    if (frac >= o.pair_fraction && control <= o.iso_tol) ++good_seeds;
  }
  r.add("pairs", static_cast<double>(pairs.size()));
  r.add("min_pair_distance", min_sep);
  r.add("max_control_distance", worst_control);
  r.add("good_seeds", static_cast<double>(good_seeds));
  r.pass = good_seeds >= o.min_seeds;
  return r;
}

}  // namespace gmn::verify
