// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "gmn/training.hpp"

namespace gmn::verify {

enum class NoiseKind { White, SignalDependent };

inline std::string_view to_string(NoiseKind k) { return k == NoiseKind::White ? "white" : "signal_dependent"; }

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "white") return NoiseKind::White;
  if (s == "signal_dependent") return NoiseKind::SignalDependent;
  fail(ErrorKind::InvalidValue, "unknown noise kind '" + std::string(s) + "' (allowed: white, signal_dependent)");
}

struct NoiseSpec {
  double eps = 0.0;
  NoiseKind kind = NoiseKind::White;
  std::uint64_t seed = 0;
  /// Signal-dependent scale per feature column instead of one scalar.
  bool per_column = false;
};

/// x'_u = x_u + eps n_u with n_u ~ N(0, I) (white) or N(0, I) * mu(X), where
/// mu is the mean absolute entry of X (signal_dependent).
inline num::Tensor<double> perturb(const num::Tensor<double>& x, const NoiseSpec& spec) {
  require(spec.eps >= 0.0, ErrorKind::InvalidValue, "noise level must be non-negative");
  if (spec.eps == 0.0) return x;
  require(x.rank() == 2, ErrorKind::ShapeMismatch, "perturb expects an n x l feature matrix");
  const std::size_t n = x.dim(0), l = x.dim(1);
  std::vector<double> mu(l, 1.0);
  if (spec.kind == NoiseKind::SignalDependent) {
    if (spec.per_column) {
      for (std::size_t j = 0; j < l; ++j) {
        double s = 0;
        for (std::size_t u = 0; u < n; ++u) s += std::abs(x(u, j));
        mu[j] = n ? s / static_cast<double>(n) : 0.0;
      }
    } else {
      double s = 0;
      for (double v : x.data()) s += std::abs(v);
      std::fill(mu.begin(), mu.end(), x.size() ? s / static_cast<double>(x.size()) : 0.0);
    }
  }
  Rng rng(spec.seed);
  num::Tensor<double> out = x;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t j = 0; j < l; ++j) out(u, j) += spec.eps * rng.normal() * mu[j];
  }
  return out;
}

struct RobustnessRow {
  NoiseKind kind = NoiseKind::White;
  double eps = 0;
  double metric = 0;
  double loss = 0;
};

/// Evaluates `indices` with every graph's features perturbed (graph i uses
/// seed hash(seed, i)), once per (kind, eps).
inline std::vector<RobustnessRow> robustness_sweep(const Checkpoint& ck, const Dataset& ds,
                                                   const std::vector<std::size_t>& indices,
                                                   const std::vector<double>& eps_list,
                                                   const std::vector<NoiseKind>& kinds, std::uint64_t seed = 0) {
  std::vector<RobustnessRow> rows;
  for (auto kind : kinds) {
    for (double eps : eps_list) {
      Dataset noisy;
      noisy.num_classes = ds.num_classes;
      noisy.split.task = ds.split.task;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto& s = ds.samples.at(indices[k]);
        const NoiseSpec spec{eps, kind, hash_key({seed, indices[k]})};
        noisy.samples.push_back({s.graph.with_features(perturb(s.graph.features(), spec)), s.cache, s.local});
        noisy.split.test.push_back(k);
      }
      const auto ev = evaluate(ck, noisy, noisy.split.test);
      rows.push_back({kind, eps, ev.metric(ck.train.loss), ev.loss()});
    }
  }
  return rows;
}

}  // namespace gmn::verify
