// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "gmn/generators.hpp"
#include "gmn/hybrid.hpp"
#include "gmn/verify/report.hpp"

namespace gmn::verify {

struct LrdSpec {
  std::size_t n = 64;
  std::size_t source = 0;
  // kernel sum_i Ã^(2 s_i); every entry with spd <= 2 s_i is positive
  std::vector<unsigned> exponents{150, 300};
  std::size_t min_spd = 2;
  std::size_t max_spd = 20;
  double floor_ratio = 0.25;
  std::size_t contrast_layers = 20;
  double contrast_ratio = 0.1;
  std::vector<std::size_t> fd_distances{2, 10};
  double fd_tol = 1e-4;
};

/// The constructed single-layer model on a self-looped path.
struct LrdSetup {
  Graph graph;
  SpectralCache cache;
  LayerConfig config;
  ParamSet params;
};

inline LrdSetup lrd_setup(const LrdSpec& spec) {
  LrdSetup s;
  s.graph = with_self_loops(path_graph(spec.n));
  EigOptions eo;
  eo.skip_zero = false;
  eo.solver = SolverKind::Dense;
  s.cache = spectral_cache(s.graph, Normalization::NormAdjacency, spec.n, eo);
  auto& c = s.config;
  c.l = 1;
  c.d = spec.n;
  c.m = spec.exponents.size();
  c.num_layers = 1;
  c.inner = InnerType::T4;
  c.t4_second = InnerType::T3;
  c.phi.mode = PhiMode::Power;
  c.phi.exponents = spec.exponents;
  c.local = LocalKind::None;
  c.layer_norm = false;
  c.ffn = false;
  s.params = init_params(c, 0);
  for (auto& [name, t] : s.params) t.fill(0.0);
  // W = B = 1, z = sigmoid(0) = 1/2, h~ = x
  s.params.at("layer0.gmn.W").fill(1.0);
  s.params.at("layer0.gmn.B").fill(1.0);
  s.params.at("layer0.gmn.h.W").fill(1.0);
  return s;
}

namespace detail {

// |d h_u / d x_v|_F for every v, by one reverse sweep per output channel.
template <class Forward>
std::vector<double> jacobian_row_norms(const Forward& forward, const num::Tensor<double>& x, std::size_t u) {
  const std::size_t n = x.dim(0), l = x.dim(1);
  std::vector<double> sq(n, 0.0);
  for (std::size_t k = 0; k < l; ++k) {
    num::Tape<double> tape;
    const auto xv = tape.leaf(x);
    const auto h = forward(tape, xv);
    num::Tensor<double> seed(h.shape());
    seed(u, k) = 1.0;
    const auto g = num::backward(tape, h, seed)[xv];
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t j = 0; j < l; ++j) sq[v] += g(v, j) * g(v, j);
    }
  }
  for (auto& s : sq) s = std::sqrt(s);
  return sq;
}

// Same norm by central differences in every coordinate of x_v.
template <class Forward>
double fd_block_norm(const Forward& forward, const num::Tensor<double>& x, std::size_t u, std::size_t v,
                     double h = 1e-5) {
  const std::size_t l = x.dim(1);
  auto value = [&](const num::Tensor<double>& xs) {
    num::Tape<double> tape;
    return forward(tape, tape.constant(xs)).value();
  };
  double sq = 0;
  for (std::size_t j = 0; j < l; ++j) {
    auto xp = x, xm = x;
    xp(v, j) += h;
    xm(v, j) -= h;
    const auto fp = value(xp), fm = value(xm);
    for (std::size_t k = 0; k < l; ++k) {
      const double d = (fp(u, k) - fm(u, k)) / (2 * h);
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

}  // namespace detail

struct LrdProfile {
  std::vector<double> gmn;  // indexed by node v, equal to spd(source, v) + source offset
  std::vector<double> gcn;
  std::vector<std::pair<std::size_t, double>> fd_rel_error;  // (spd, relative error)
};

inline LrdProfile lrd_profile(const LrdSpec& spec) {
  const auto s = lrd_setup(spec);
  const num::Tensor<double> x({spec.n, 1}, 1.0);
  auto gmn_fwd = [&](num::Tape<double>& tape, Var<double> xv) {
    const Bound<double> bound(tape, s.params);
    return gmn_forward(s.cache, xv, ParamView<double>{&bound, "layer0.gmn"}, s.config);
  };
  LrdProfile p;
  p.gmn = detail::jacobian_row_norms(gmn_fwd, x, spec.source);
  for (auto dist : spec.fd_distances) {
    const std::size_t v = spec.source + dist;
    const double fd = detail::fd_block_norm(gmn_fwd, x, spec.source, v);
    p.fd_rel_error.emplace_back(dist, std::abs(fd - p.gmn[v]) / std::max(std::abs(p.gmn[v]), 1e-300));
  }

  const auto local = local_structure(s.graph);
  const ParamSet gcn_params{{"gcn.W1", num::Tensor<double>({1, 1}, 1.0)}, {"gcn.W2", num::Tensor<double>({1, 1}, 1.0)}};
  auto gcn_fwd = [&](num::Tape<double>& tape, Var<double> h) {
    const Bound<double> bound(tape, gcn_params);
    const ParamView<double> view{&bound, "gcn"};
    for (std::size_t i = 0; i < spec.contrast_layers; ++i) h = local_block(local, h, view, LocalKind::GcnLite);
    return h;
  };
  p.gcn = detail::jacobian_row_norms(gcn_fwd, x, spec.source);
  return p;
}

/// Non-decay of the constructed GMN gradient over spd in [min_spd, max_spd]
/// against the decay of a deep gcn_lite stack on the same path.
inline PropertyReport grad_profile_lrd(const LrdSpec& spec = {}) {
  require(spec.source + spec.max_spd < spec.n, ErrorKind::InvalidParams, "path too short for the distance range");
  const auto p = lrd_profile(spec);
  PropertyReport r;
  r.name = "long_range_dependency";
  r.trials = 1;
  const double base = p.gmn[spec.source + spec.min_spd];
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t d = spec.min_spd; d <= spec.max_spd; ++d) {
    min_ratio = std::min(min_ratio, p.gmn[spec.source + d] / base);
  }
  const double gcn_ratio = p.gcn[spec.source + spec.max_spd] / p.gcn[spec.source + spec.min_spd];
  double fd_worst = 0;
  for (const auto& [d, e] : p.fd_rel_error) fd_worst = std::max(fd_worst, e);
  r.add("gmn_norm_at_min_spd", base);
  r.add("gmn_min_ratio", min_ratio);
  r.add("gcn_ratio_at_max_spd", gcn_ratio);
  r.add("fd_max_rel_error", fd_worst);
  r.pass = min_ratio >= spec.floor_ratio && gcn_ratio <= spec.contrast_ratio && fd_worst <= spec.fd_tol;
  return r;
}

}  // namespace gmn::verify
