// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "gmn/gmn_layer.hpp"
#include "gmn/verify/report.hpp"

namespace gmn::verify {

/// Node-level map from (spectral cache, features) to n x l outputs.
using LayerFn = std::function<num::Tensor<double>(const SpectralCache&, const num::Tensor<double>&)>;

/// One GMN layer ("layer0.gmn" in `ps`) evaluated in double precision.
inline LayerFn gmn_layer_fn(LayerConfig c, ParamSet ps) {
  return [c = std::move(c), ps = std::move(ps)](const SpectralCache& cache, const num::Tensor<double>& x) {
    num::Tape<double> tape;
    const Bound<double> bound(tape, ps);
    return gmn_forward(cache, tape.constant(x), ParamView<double>{&bound, "layer0.gmn"}, c).value();
  };
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

struct EquivarianceOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  /// false feeds the unpermuted cache, a control that should break equivariance.
  bool permute_spectrum = true;
};

/// max over trials of |f(QX, Q cache) - Q f(X, cache)|_inf.
inline PropertyReport check_equivariance(const LayerFn& f, const SpectralCache& cache, const num::Tensor<double>& x,
                                         const EquivarianceOptions& opts = {}) {
  PropertyReport r;
  r.name = opts.permute_spectrum ? "equivariance" : "equivariance_control";
  r.trials = opts.trials;
  r.seeds = {opts.seed};
  const auto base = f(cache, x);
  double worst = 0;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const auto perm = random_permutation(x.dim(0), hash_key({opts.seed, t}));
    const auto& c2 = opts.permute_spectrum ? permute_cache(cache, perm) : cache;
    worst = std::max(worst, num::max_abs_diff(f(c2, permute_rows(x, perm)), permute_rows(base, perm)));
  }
  r.add("max_deviation", worst);
  r.add("tolerance", opts.tol);
  r.pass = opts.permute_spectrum ? worst <= opts.tol : worst > opts.tol;
  return r;
}

}  // namespace gmn::verify
