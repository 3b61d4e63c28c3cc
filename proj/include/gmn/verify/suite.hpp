// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gmn/mingru.hpp"
#include "gmn/verify/bench.hpp"
#include "gmn/verify/expressiveness.hpp"
#include "gmn/verify/lrd.hpp"
#include "gmn/verify/stability.hpp"

namespace gmn::verify {

/// max |recurrence - closed form| over random minGRU sequences.
inline PropertyReport mingru_closed_form(std::size_t seeds = 50, std::size_t steps = 64, std::size_t dh = 8,
                                         double tol = 1e-9) {
  PropertyReport r;
  r.name = "mingru_closed_form";
  r.trials = seeds;
  double worst = 0;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto p = init_mingru(dh, 1, s);
    num::Tensor<double> x({steps, dh});
    Rng rng(hash_key({s, 0x78ULL}));
    for (auto& v : x.data()) v = rng.normal();
    worst = std::max(worst, num::max_abs_diff(mingru_seq(x, p, MinGruMode::Recurrence),
                                              mingru_seq(x, p, MinGruMode::ClosedForm)));
    r.seeds.push_back(s);
  }
  r.add("max_abs_diff", worst);
  r.pass = worst <= tol;
  return r;
}

/// Every inner type x aggregation x self-term variant of `base` on one ER graph.
inline PropertyReport equivariance_sweep(const LayerConfig& base, std::size_t n, std::size_t trials,
                                         std::uint64_t seed, double tol = 1e-6) {
  const auto g = er_avg_degree(n, 4.0, hash_key({seed, 0x6572ULL}));
  const auto cache = spectral_cache(g, Normalization::Sym, std::min(base.d, n));
  PropertyReport r;
  r.name = "equivariance";
  r.seeds = {seed};
  double worst = 0;
  for (auto inner : {InnerType::T1, InnerType::T2, InnerType::T3, InnerType::T4}) {
    for (auto agg : {Agg::Mul, Agg::Add}) {
      for (bool self : {false, true}) {
        auto c = base;
        c.d = cache.dim();
        c.inner = inner;
        c.agg = agg;
        c.self_term = self;
        if (inner == InnerType::T2) {
          c.m = c.l;
          c.phi.exponents.clear();
        }
        num::Tensor<double> x({n, c.l});
        Rng rng(hash_key({seed, 0x7866ULL}));
        for (auto& v : x.data()) v = rng.uniform(-1, 1);
        const auto rep = check_equivariance(gmn_layer_fn(c, init_params(c, seed)), cache, x,
                                            {.trials = trials, .seed = seed, .tol = tol});
        const double dev = rep.get("max_deviation");
        r.add(std::string(to_string(inner)) + "_" + std::string(to_string(agg)) + (self ? "_self" : ""), dev);
        worst = std::max(worst, dev);
        r.trials += trials;
      }
    }
  }
  r.add("max_deviation", worst);
  r.pass = worst <= tol;
  return r;
}

/// The model under the stability probe: one layer of `base` with setagg phi.
inline LayerConfig stability_config(LayerConfig c) {
  c.num_layers = 1;
  c.phi.mode = PhiMode::SetAgg;
  c.local = LocalKind::None;
  c.layer_norm = false;
  c.ffn = false;
  c.in_dim = 0;
  c.out_dim = 0;
  return c;
}

struct SuiteOptions {
  LayerConfig layer;
  std::size_t equivariance_trials = 100;
  bool bench = true;
  BenchOptions bench_options;
  std::uint64_t seed = 0;
};

inline std::vector<PropertyReport> run_suite(const SuiteOptions& o) {
  std::vector<PropertyReport> out;
  out.push_back(mingru_closed_form());
  out.push_back(equivariance_sweep(o.layer, 20, o.equivariance_trials, o.seed));
  out.push_back(grad_profile_lrd());
  const auto corpus = wl_corpus();
  out.push_back(expressiveness_suite(corpus, isomorphic_controls(corpus, o.seed)));
  {
    const auto c = stability_config(o.layer);
    const std::size_t n = 20;
    const auto g = er_avg_degree(n, 4.0, hash_key({o.seed, 0x7374ULL}));
    const auto cache = spectral_cache(g, Normalization::Sym, std::min(c.d, n));
    auto cc = c;
    cc.d = cache.dim();
    num::Tensor<double> x({n, cc.l});
    Rng rng(hash_key({o.seed, 0x7378ULL}));
    for (auto& v : x.data()) v = rng.uniform(-1, 1);
    out.push_back(stability_probe(gmn_layer_fn(cc, init_params(cc, o.seed)), cache, x));
    out.push_back(weyl_check(g, Normalization::Sym, 100, o.seed));
  }
  if (o.bench) out.push_back(scaling_report(bench_scaling(o.bench_options)));
  return out;
}

inline bool all_pass(const std::vector<PropertyReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const PropertyReport& r) { return r.pass; });
}

}  // namespace gmn::verify
