// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "gmn/verify/bench.hpp"
#include "gmn/verify/expressiveness.hpp"
#include "gmn/verify/lrd.hpp"
#include "gmn/verify/robustness.hpp"
#include "gmn/verify/stability.hpp"

namespace gmn::verify {
namespace {

using T = num::Tensor<double>;

T random_features(std::size_t n, std::size_t l, std::uint64_t seed) {
  T x({n, l});
  Rng rng(seed);
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  return x;
}

LayerConfig small_layer(InnerType inner) {
  LayerConfig c;
  c.l = 6;
  c.d = 6;
  c.m = 3;
  c.num_layers = 1;
  c.inner = inner;
  c.local = LocalKind::None;
  c.layer_norm = false;
  c.ffn = false;
  return c;
}

TEST(Equivariance, IdentityMapHasZeroDeviation) {
  const auto g = er_avg_degree(15, 3, 2);
  const auto cache = spectral_cache(g, Normalization::Sym, 5);
  const LayerFn id = [](const SpectralCache&, const T& x) { return x; };
  const auto r = check_equivariance(id, cache, random_features(15, 3, 1), {.trials = 10});
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.get("max_deviation"), 0.0);
}

TEST(Equivariance, GmnLayerPassesAndStaleSpectrumFails) {
  const auto c = small_layer(InnerType::T3);
  const auto g = er_avg_degree(20, 4, 5);
  const auto cache = spectral_cache(g, Normalization::Sym, c.d);
  const auto f = gmn_layer_fn(c, init_params(c, 1));
  const auto x = random_features(20, c.l, 4);
  EXPECT_TRUE(check_equivariance(f, cache, x, {.trials = 10}).pass);
  const auto control = check_equivariance(f, cache, x, {.trials = 10, .permute_spectrum = false});
  EXPECT_TRUE(control.pass);
  EXPECT_GT(control.get("max_deviation"), 1e-6);
}

TEST(Wl, CycleAgainstTwoTriangles) {
  EXPECT_TRUE(wl_equivalent(cycle_graph(6), cycle_union({3, 3})));
  EXPECT_FALSE(wl_equivalent(path_graph(3), cycle_graph(3)));
  EXPECT_FALSE(wl_equivalent(path_graph(6), cycle_graph(6)));
}

TEST(Wl, RelabelingIsEquivalent) {
  const auto g = er_avg_degree(30, 4, 9);
  EXPECT_TRUE(wl_equivalent(g, permute(g, random_permutation(30, 3))));
}

TEST(Wl, FeaturesSplitColors) {
  const auto g = cycle_graph(4);
  T x({4, 1}, 0.0);
  x(0, 0) = 1.0;
  const auto marked = g.with_features(x);
  EXPECT_TRUE(wl_equivalent(g, marked));
  EXPECT_FALSE(wl_equivalent(g, marked, true));
}

TEST(Corpus, PairsAreWlEquivalentWithDifferentSpectra) {
  const auto corpus = wl_corpus();
  EXPECT_GE(corpus.size(), 10u);
  for (const auto& p : corpus) {
    EXPECT_TRUE(wl_equivalent(p.a, p.b)) << p.name;
    EXPECT_TRUE(spectra_differ(p.a, p.b)) << p.name;
  }
}

TEST(Corpus, CycleSpectrumExample) {
  // sym Laplacian of C_k has eigenvalues 1 - cos(2 pi j / k)
  auto smallest_nonzero = [](const std::vector<double>& s) {
    for (double v : s) {
      if (v > 1e-9) return v;
    }
    return 0.0;
  };
  EXPECT_NEAR(smallest_nonzero(laplacian_spectrum(cycle_graph(6))), 0.5, 1e-12);
  EXPECT_NEAR(smallest_nonzero(laplacian_spectrum(cycle_union({3, 3}))), 1.5, 1e-12);
}

TEST(Expressiveness, RejectsPairSeparatedByWl) {
  const std::vector<GraphPair> bad{{"P6|C6", path_graph(6), cycle_graph(6)}};
  try {
    expressiveness_suite(bad, {});
    FAIL() << "expected PairNotWLEquivalent";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PairNotWLEquivalent);
  }
}

TEST(Expressiveness, SmallCorpusSeparates) {
  std::vector<GraphPair> pairs{{"C6|C3+C3", cycle_graph(6), cycle_union({3, 3})},
                               {"C8|C4+C4", cycle_graph(8), cycle_union({4, 4})}};
  const auto r = expressiveness_suite(pairs, isomorphic_controls(pairs, 1), {.seeds = {0, 1}, .min_seeds = 2});
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.get("max_control_distance"), 1e-8);
}

TEST(Perturb, ZeroNoiseIsIdentity) {
  const auto x = random_features(10, 3, 1);
  EXPECT_EQ(perturb(x, {0.0, NoiseKind::White, 5}), x);
  EXPECT_EQ(perturb(x, {0.0, NoiseKind::SignalDependent, 5}), x);
}

TEST(Perturb, SignalDependentNoiseVanishesOnZeroSignal) {
  const T zero({8, 2}, 0.0);
  EXPECT_EQ(perturb(zero, {0.5, NoiseKind::SignalDependent, 1}), zero);
  EXPECT_EQ(perturb(zero, {0.5, NoiseKind::SignalDependent, 1, true}), zero);
}

TEST(Perturb, ReproducibleAndScaled) {
  const auto x = random_features(200, 4, 2);
  const auto a = perturb(x, {0.3, NoiseKind::White, 7});
  EXPECT_EQ(a, perturb(x, {0.3, NoiseKind::White, 7}));
  EXPECT_NE(a, perturb(x, {0.3, NoiseKind::White, 8}));
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (a[i] - x[i]) * (a[i] - x[i]);
  EXPECT_NEAR(std::sqrt(s / static_cast<double>(x.size())), 0.3, 0.03);
  EXPECT_THROW(perturb(x, {-0.1, NoiseKind::White, 1}), Error);
  EXPECT_EQ(parse_noise_kind("signal_dependent"), NoiseKind::SignalDependent);
  EXPECT_THROW(parse_noise_kind("pink"), Error);
}

TEST(Robustness, ZeroNoiseRowMatchesCleanEvaluation) {
  SbmTask task;
  task.graphs = 6;
  task.train = 3;
  task.val = 1;
  task.params.n = 30;
  auto c = sbm_layer_config(4);
  c.l = 8;
  c.d = 4;
  c.m = 2;
  c.num_layers = 1;
  const auto ds = sbm_dataset(task, c.d, 0);
  const Checkpoint ck{c, TrainConfig{}, init_params(c, 0)};
  const auto clean = evaluate(ck, ds, ds.split.test);
  const auto rows = robustness_sweep(ck, ds, ds.split.test, {0.0, 0.3}, {NoiseKind::White, NoiseKind::SignalDependent});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].metric, clean.metric(ck.train.loss));
  EXPECT_EQ(rows[0].loss, clean.loss());
  EXPECT_EQ(rows[2].loss, clean.loss());
  EXPECT_NE(rows[1].loss, clean.loss());
}

TEST(Stability, LinearMapHasFlatRatios) {
  const auto g = er_avg_degree(12, 3, 1);
  const auto cache = spectral_cache(g, Normalization::Sym, 4);
  const LayerFn twice = [](const SpectralCache& sc, const T& x) {
    T y = x;
    for (auto& v : y.data()) v *= 2.0;
    y(0, 0) += sc.eigenvalues[0];
    return y;
  };
  const auto r = stability_probe(twice, cache, random_features(12, 2, 3));
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.get("feature_ratio_min"), 2.0, 1e-9);
  EXPECT_NEAR(r.get("feature_ratio_max"), 2.0, 1e-9);
  EXPECT_NEAR(r.get("feature_spread_pooled"), 1.0, 1e-9);
}

TEST(Stability, GmnLayerWithinBand) {
  auto c = small_layer(InnerType::T1);
  c.phi.mode = PhiMode::SetAgg;
  const auto g = er_avg_degree(20, 4, 1);
  const auto cache = spectral_cache(g, Normalization::Sym, c.d);
  const auto r = stability_probe(gmn_layer_fn(c, init_params(c, 0)), cache, random_features(20, c.l, 3));
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.get("feature_spread"), 1.0);
}

TEST(Stability, WeylBound) {
  const auto g = er_avg_degree(25, 4, 3);
  EXPECT_TRUE(weyl_check(g, Normalization::Sym, 20, 0).pass);
  EXPECT_TRUE(weyl_check(g, Normalization::Unnormalized, 20, 1).pass);
}

TEST(Stability, DenseOfLaplacianRowsSumToZero) {
  const auto d = dense_of(laplacian(cycle_graph(5), Normalization::Unnormalized));
  for (Eigen::Index i = 0; i < d.rows(); ++i) EXPECT_NEAR(d.row(i).sum(), 0.0, 1e-15);
  EXPECT_EQ(d(0, 0), 2.0);
}

TEST(Lrd, ShortPathProfile) {
  LrdSpec spec;
  spec.n = 32;
  spec.max_spd = 12;
  spec.fd_distances = {2, 6};
  const auto r = grad_profile_lrd(spec);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.get("fd_max_rel_error"), 1e-4);
  EXPECT_LE(r.get("gcn_ratio_at_max_spd"), 0.1);
}

TEST(Lrd, RejectsPathTooShort) {
  LrdSpec spec;
  spec.n = 10;
  EXPECT_THROW(grad_profile_lrd(spec), Error);
}

TEST(Bench, FitLinearExact) {
  const auto f = fit_linear({1, 2, 3, 4}, {4, 7, 10, 13});
  EXPECT_NEAR(f.slope, 3.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW(fit_linear({1}, {1}), Error);
}

TEST(Bench, ScalingReportOnSmallSizes) {
  BenchOptions o;
  o.ns = {200, 400, 800};
  o.repeats = 1;
  o.min_time_s = 0;
  o.config.l = 8;
  o.config.d = 8;
  o.config.m = 4;
  const auto rows = bench_scaling(o);
  ASSERT_EQ(rows.size(), 3u);
  const auto r = scaling_report(rows, {.max_wall_ratio = 1e9});
  EXPECT_GE(r.get("flops_r2"), 0.98);
  EXPECT_NEAR(r.get("flop_ratio_2n"), 2.0, 0.1);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  EXPECT_EQ(csv.str().rfind("n,edges,flops,peak_bytes,wall_s,spectral_s\n", 0), 0u);
}

TEST(Bench, DoublingMRoughlyDoublesT1Cost) {
  LayerConfig c;
  c.inner = InnerType::T1;
  c.l = 8;
  c.d = 16;
  c.m = 16;
  const double ratio = m_doubling_ratio(c, 300, 5, 0);
  EXPECT_NEAR(ratio, 2.0, 0.2);
}

TEST(Report, Format) {
  PropertyReport r;
  r.name = "x";
  r.pass = true;
  r.trials = 2;
  r.seeds = {1, 2};
  r.add("v", 0.5);
  std::ostringstream out;
  write_report(out, r);
  EXPECT_EQ(out.str(), "[x] PASS trials=2 seeds=1,2\n  v=0.5\n");
}

}  // namespace
}  // namespace gmn::verify
