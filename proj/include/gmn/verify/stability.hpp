// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "gmn/verify/equivariance.hpp"
#include "gmn/verify/report.hpp"

namespace gmn::verify {

struct StabilityOptions {
  std::vector<double> magnitudes{1e-3, 1e-2, 3e-2, 1e-1};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double band = 3.0;
};

namespace detail {

inline num::Tensor<double> unit_direction(num::Shape shape, std::uint64_t seed) {
  num::Tensor<double> t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.normal();
  const double norm = num::frobenius_norm(t);
  for (auto& v : t.data()) v /= norm;
  return t;
}

inline double diff_norm(const num::Tensor<double>& a, const num::Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct Family {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0;
  void add(double r) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  double spread() const { return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity(); }
};

}  // namespace detail

/// Empirical Lipschitz ratios |dH| / |dX| (features) and |dH| / |d lambda|
/// (eigenvalues, padded entries left at zero). Each seed fixes a direction and
/// its ratios over the magnitudes form one family; the probe passes when every
/// family's max / min stays within `band`. The spread pooled over all seeds is
/// reported alongside.
inline PropertyReport stability_probe(const LayerFn& f, const SpectralCache& cache, const num::Tensor<double>& x,
                                      const StabilityOptions& o = {}) {
  const auto base = f(cache, x);
  const auto mask = spectral_mask(cache);
  detail::Family feat, spec;
  double feat_worst = 0, spec_worst = 0;
  for (auto seed : o.seeds) {
    detail::Family f_seed, s_seed;
    const auto dx = detail::unit_direction(x.shape(), hash_key({seed, 0x66ULL}));
    auto dl = detail::unit_direction({cache.dim()}, hash_key({seed, 0x6cULL}));
    for (std::size_t j = 0; j < cache.dim(); ++j) dl[j] *= mask[j];
    const double dl_norm = num::frobenius_norm(dl);
    for (double t : o.magnitudes) {
      auto xp = x;
      for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += t * dx[i];
      const double fr = detail::diff_norm(f(cache, xp), base) / t;
      feat.add(fr);
      f_seed.add(fr);
      if (dl_norm > 0) {
        auto cp = cache;
        for (std::size_t j = 0; j < cp.dim(); ++j) cp.eigenvalues[j] += t * dl[j];
        const double sr = detail::diff_norm(f(cp, x), base) / (t * dl_norm);
        spec.add(sr);
        s_seed.add(sr);
      }
    }
    feat_worst = std::max(feat_worst, f_seed.spread());
    if (dl_norm > 0) spec_worst = std::max(spec_worst, s_seed.spread());
  }
  PropertyReport r;
  r.name = "stability";
  r.seeds = o.seeds;
  r.trials = o.seeds.size() * o.magnitudes.size();
  r.add("feature_ratio_min", feat.lo);
  r.add("feature_ratio_max", feat.hi);
  r.add("feature_spread", feat_worst);
  r.add("feature_spread_pooled", feat.spread());
  r.add("spectral_ratio_min", spec.lo);
  r.add("spectral_ratio_max", spec.hi);
  r.add("spectral_spread", spec_worst);
  r.add("spectral_spread_pooled", spec.spread());
  r.pass = feat_worst <= o.band && spec_worst <= o.band;
  return r;
}

inline Eigen::MatrixXd dense_of(const SparseMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.n), static_cast<Eigen::Index>(m.n));
  for (std::size_t r = 0; r < m.n; ++r) {
    for (std::size_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) {
      d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m.cols[k])) += m.values[k];
    }
  }
  return d;
}

/// |lambda_i(L + E) - lambda_i(L)| <= |E|_2 for random symmetric E.
inline PropertyReport weyl_check(const Graph& g, Normalization norm, std::size_t trials, std::uint64_t seed,
                                 double scale = 1e-2, double tol = 1e-8) {
  const Eigen::MatrixXd l = dense_of(laplacian(g, norm));
  const Eigen::VectorXd base = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(l, Eigen::EigenvaluesOnly).eigenvalues();
  const auto n = l.rows();
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(hash_key({seed, t}));
    const double s = scale * std::pow(10.0, rng.uniform(-2.0, 1.0));
    Eigen::MatrixXd e(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) e(i, j) = e(j, i) = s * rng.normal();
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e, Eigen::EigenvaluesOnly).eigenvalues();
    const double e_norm = std::max(std::abs(ev(0)), std::abs(ev(n - 1)));
    const Eigen::VectorXd pert =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(l + e, Eigen::EigenvaluesOnly).eigenvalues();
    worst_excess = std::max(worst_excess, (pert - base).cwiseAbs().maxCoeff() - e_norm);
  }
  PropertyReport r;
  r.name = "weyl_bound";
  r.trials = trials;
  r.seeds = {seed};
  r.add("max_excess_over_bound", worst_excess);
  r.pass = worst_excess <= tol;
  return r;
}

}  // namespace gmn::verify
