// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "../support/oracles.hpp"
#include "gmn/generators.hpp"
#include "gmn/spectral.hpp"

namespace gmn {
namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected gmn::Error";
  return ErrorKind::IoError;
}

Graph k_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return build_graph(n, e, num::Tensor<double>({n, 1}, 1.0));
}

/// Largest connected component of an ER graph, relabeled.
Graph er_connected(std::size_t n, double deg, std::uint64_t seed) {
  Graph g = er_avg_degree(n, deg, seed);
  std::vector<int> comp(n, -1);
  int best = -1;
  std::size_t best_size = 0;
  for (std::size_t s = 0, id = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = static_cast<int>(id);
    std::size_t size = 0;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      ++size;
      for (auto v : g.neighbors(u))
        if (comp[v] < 0) comp[v] = static_cast<int>(id), stack.push_back(v);
    }
    if (size > best_size) best_size = size, best = static_cast<int>(id);
    ++id;
  }
  std::vector<std::size_t> idx(n, 0);
  std::size_t k = 0;
  for (std::size_t u = 0; u < n; ++u)
    if (comp[u] == best) idx[u] = k++;
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (const auto& ed : g.edges())
    if (comp[ed.u] == best) e.emplace_back(idx[ed.u], idx[ed.v]);
  return build_graph(k, e, num::Tensor<double>({k, 1}, 1.0));
}

TEST(Laplacian, SingleEdgeSym) {
  Graph g = path_graph(2);
  auto l = laplacian(g, Normalization::Sym).to_dense();
  EXPECT_DOUBLE_EQ(l(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(l(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(l(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(l(1, 1), 1.0);
}

TEST(Laplacian, MatchesDenseOracleForAllNormalizations) {
  Graph g = build_graph(6, {{0, 1}, {1, 2}, {2, 0}, {2, 3}}, num::Tensor<double>({6, 1}));  // nodes 4, 5 isolated
  auto sym = laplacian(g, Normalization::Sym).to_dense();
  auto adj = laplacian(g, Normalization::NormAdjacency).to_dense();
  auto un = laplacian(g, Normalization::Unnormalized).to_dense();
  auto osym = oracle::sym_laplacian(g);
  auto oadj = oracle::norm_adjacency(g);
  auto a = oracle::adjacency(g);
  for (std::size_t i = 0; i < 6; ++i) {
    double deg = 0;
    for (double v : a[i]) deg += v;
    for (std::size_t j = 0; j < 6; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      EXPECT_NEAR(sym(ii, jj), osym[i][j], 1e-15);
      EXPECT_NEAR(adj(ii, jj), oadj[i][j], 1e-15);
      EXPECT_DOUBLE_EQ(un(ii, jj), (i == j ? deg : 0.0) - a[i][j]);
    }
  }
  // Isolated nodes have zero rows.
  EXPECT_EQ(sym.row(4).norm(), 0.0);
  EXPECT_EQ(adj.row(5).norm(), 0.0);
}

TEST(Laplacian, SelfLoopsEnterNormalizedAdjacency) {
  Graph g = with_self_loops(path_graph(3));
  auto adj = laplacian(g, Normalization::NormAdjacency).to_dense();
  auto oadj = oracle::norm_adjacency(g);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      EXPECT_NEAR(adj(i, j), oadj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], 1e-15);
  EXPECT_NEAR(adj(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(adj(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_TRUE(laplacian(g, Normalization::Sym).is_symmetric());
}

TEST(EigTopd, TriangleSpectrum) {
  auto c = spectral_cache(k_graph(3), Normalization::Sym, 3, {.skip_zero = false});
  auto [ref, _] = oracle::jacobi_eigen(oracle::sym_laplacian(k_graph(3)));
  ASSERT_EQ(c.eigenvalues.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.eigenvalues[i], ref[i], 1e-12);
  EXPECT_NEAR(c.eigenvalues[0], 0.0, 1e-12);
  EXPECT_NEAR(c.eigenvalues[1], 1.5, 1e-12);
  EXPECT_NEAR(c.eigenvalues[2], 1.5, 1e-12);
}

TEST(EigTopd, CycleClosedForm) {
  auto c = spectral_cache(cycle_graph(6), Normalization::Sym, 6, {.skip_zero = false});
  std::vector<double> expected;
  for (int k = 0; k < 6; ++k) expected.push_back(1.0 - std::cos(std::numbers::pi * k / 3.0));
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(c.eigenvalues[i], expected[i], 1e-12);
}

TEST(EigTopd, SingleEdgeSkipZero) {
  auto c = spectral_cache(path_graph(2), Normalization::Sym, 1);
  ASSERT_EQ(c.eigenvalues.size(), 1u);
  EXPECT_NEAR(c.eigenvalues[0], 2.0, 1e-12);
  EXPECT_NEAR(c.P(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c.P(1, 0), -1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(c.pad, 0u);
}

TEST(EigTopd, CycleVersusTwoTriangles) {
  auto a = spectral_cache(cycle_graph(6), Normalization::Sym, 2);
  auto b = spectral_cache(generate(UnionSpec{{{3}, {3}}}, 0), Normalization::Sym, 2);
  EXPECT_NEAR(a.eigenvalues[0], 0.5, 1e-12);
  EXPECT_NEAR(b.eigenvalues[0], 1.5, 1e-12);
}

TEST(EigTopd, FullSpectrumMatchesOracle) {
  Graph g = er_connected(10, 3.0, 4);
  auto [ref, vecs] = oracle::jacobi_eigen(oracle::sym_laplacian(g));
  const std::size_t n = g.num_nodes();
  for (auto solver : {SolverKind::Dense, SolverKind::Lanczos}) {
    auto c = spectral_cache(g, Normalization::Sym, n, {.skip_zero = false, .solver = solver});
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(c.eigenvalues[i], ref[i], 1e-8) << to_string(solver);
    EXPECT_LE(c.residual, 1e-8);
  }
}

TEST(EigTopd, OrthonormalColumnsAndResiduals) {
  Graph g = er_avg_degree(300, 5.0, 2);  // has isolated nodes and small components
  auto l = laplacian(g, Normalization::Sym);
  auto c = eig_topd(l, 12, {.solver = SolverKind::Lanczos});
  EXPECT_EQ(c.solver, SolverKind::Lanczos);
  const std::size_t n = g.num_nodes();
  Eigen::MatrixXd p(n, 12);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t j = 0; j < 12; ++j) p(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) = c.P(u, j);
  EXPECT_LE((p.transpose() * p - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-8);
  Eigen::MatrixXd dense = l.to_dense();
  for (Eigen::Index j = 0; j < 12; ++j) {
    EXPECT_LE((dense * p.col(j) - c.eigenvalues[static_cast<std::size_t>(j)] * p.col(j)).norm(), 1e-8);
    if (j) {
      EXPECT_LE(c.eigenvalues[static_cast<std::size_t>(j) - 1], c.eigenvalues[static_cast<std::size_t>(j)]);
    }
    EXPECT_GE(std::abs(c.eigenvalues[static_cast<std::size_t>(j)]), 1e-9);
  }
}

TEST(EigTopd, LanczosMatchesDenseOnSmallGraphs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = er_connected(60 + 20 * seed, 5.0, seed);
    auto l = laplacian(g, Normalization::Sym);
    const std::size_t d = 8;
    for (auto which : {Which::Smallest, Which::Largest}) {
      auto dense = eig_topd(l, d, {.which = which, .solver = SolverKind::Dense});
      auto lz = eig_topd(l, d, {.which = which, .solver = SolverKind::Lanczos});
      for (std::size_t j = 0; j < d; ++j) {
        EXPECT_NEAR(lz.eigenvalues[j], dense.eigenvalues[j], 1e-8) << "seed " << seed << " j " << j;
        // Vectors agree up to sign when the eigenvalue is well separated.
        double gap = 1.0;
        for (std::size_t i = 0; i < d; ++i)
          if (i != j) gap = std::min(gap, std::abs(dense.eigenvalues[i] - dense.eigenvalues[j]));
        if (gap < 1e-4) continue;
        double dot = 0;
        for (std::size_t u = 0; u < g.num_nodes(); ++u) dot += lz.P(u, j) * dense.P(u, j);
        EXPECT_NEAR(std::abs(dot), 1.0, 1e-7);
      }
    }
  }
}

TEST(EigTopd, RepeatedEigenvaluesAreAllFound) {
  // Disjoint copies of the same cycle give every eigenvalue multiplicity 4.
  Graph g = generate(UnionSpec{{{50}, {50}, {50}, {50}}}, 0);
  auto l = laplacian(g, Normalization::Sym);
  auto dense = eig_topd(l, 10, {.solver = SolverKind::Dense});
  auto lz = eig_topd(l, 10, {.solver = SolverKind::Lanczos});
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(lz.eigenvalues[j], dense.eigenvalues[j], 1e-8);
  // A single connected component with a degenerate spectrum.
  Graph c = cycle_graph(300);
  auto lc = laplacian(c, Normalization::Sym);
  auto dc = eig_topd(lc, 9, {.solver = SolverKind::Dense});
  auto zc = eig_topd(lc, 9, {.solver = SolverKind::Lanczos});
  for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(zc.eigenvalues[j], dc.eigenvalues[j], 1e-8);
}

TEST(EigTopd, PermutationInvariantEigenvalues) {
  Graph g = er_avg_degree(500, 5.0, 3);
  Rng rng(5);
  std::vector<std::size_t> perm(g.num_nodes());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span(perm));
  auto a = spectral_cache(g, Normalization::Sym, 10);
  auto b = spectral_cache(permute(g, perm), Normalization::Sym, 10);
  EXPECT_EQ(a.solver, SolverKind::Lanczos);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(a.eigenvalues[j], b.eigenvalues[j], 1e-8);
}

TEST(EigTopd, PadsWhenTooFewNonzero) {
  Graph g = build_graph(4, {{0, 1}}, num::Tensor<double>({4, 1}));
  auto c = spectral_cache(g, Normalization::Sym, 3);
  EXPECT_EQ(c.pad, 2u);
  EXPECT_EQ(c.eigenvalues[0], 0.0);
  EXPECT_EQ(c.eigenvalues[1], 0.0);
  EXPECT_NEAR(c.eigenvalues[2], 2.0, 1e-12);
  for (std::size_t u = 0; u < 4; ++u) EXPECT_EQ(c.P(u, 0), 0.0);
}

TEST(EigTopd, DimensionErrors) {
  auto l = laplacian(path_graph(4), Normalization::Sym);
  EXPECT_EQ(kind_of([&] { eig_topd(l, 0); }), ErrorKind::DimensionError);
  EXPECT_EQ(kind_of([&] { eig_topd(l, 5); }), ErrorKind::DimensionError);
}

TEST(EigTopd, ConvergenceFailureIsReported) {
  Graph g = er_connected(600, 5.0, 1);
  EigOptions opts{.solver = SolverKind::Lanczos};
  opts.lanczos.basis_size = 12;
  opts.lanczos.max_restarts = 1;
  EXPECT_EQ(kind_of([&] { spectral_cache(g, Normalization::Sym, 8, opts); }), ErrorKind::ConvergenceFailure);
}

TEST(EigTopd, MultiplyCountScalesWithEdges) {
  // Work is multiplies * nnz; at fixed d the multiply count must stay flat.
  std::vector<double> per_edge;
  for (std::size_t n : {2000u, 4000u, 8000u}) {
    Graph g = er_avg_degree(n, 5.0, 7);
    auto c = spectral_cache(g, Normalization::Sym, 8, {.solver = SolverKind::Lanczos});
    per_edge.push_back(static_cast<double>(c.multiplies));
  }
  EXPECT_LE(per_edge[2] / per_edge[0], 2.0);
  RecordProperty("multiplies_n8000", static_cast<int>(per_edge[2]));
}

TEST(Canonicalize, Examples) {
  SpectralCache c;
  c.eigenvalues = {1.0};
  c.P = num::Tensor<double>({2, 1}, {-0.9, 0.1});
  c = canonicalize_signs(c);
  EXPECT_EQ(c.P(0, 0), 0.9);
  EXPECT_EQ(c.P(1, 0), -0.1);
  EXPECT_EQ(canonicalize_signs(c), c);
  c.P = num::Tensor<double>({2, 1}, {-0.5, 0.5});
  c = canonicalize_signs(c);
  EXPECT_EQ(c.P(0, 0), 0.5);
  EXPECT_EQ(c.P(1, 0), -0.5);
}

TEST(Canonicalize, IdempotentOnRealCaches) {
  auto c = spectral_cache(cycle_graph(12), Normalization::Sym, 6);
  EXPECT_EQ(canonicalize_signs(c), c);
}

TEST(PermuteCache, Examples) {
  auto c = spectral_cache(path_graph(5), Normalization::Sym, 3);
  std::vector<std::size_t> id{0, 1, 2, 3, 4};
  EXPECT_EQ(permute_cache(c, id), c);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  auto p = permute_cache(c, perm);
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(p.P(perm[u], j), c.P(u, j));
  EXPECT_EQ(p.eigenvalues, c.eigenvalues);
  auto inv = inverse_permutation(perm);
  EXPECT_EQ(permute_cache(p, inv), c);
  EXPECT_EQ(kind_of([&] { permute_cache(c, std::vector<std::size_t>{0, 1}); }), ErrorKind::InvalidPermutation);

  SpectralCache two;
  two.eigenvalues = {1.0};
  two.P = num::Tensor<double>({2, 1}, {0.8, 0.6});
  auto swapped = permute_cache(two, std::vector<std::size_t>{1, 0});
  EXPECT_EQ(swapped.P(0, 0), 0.6);
  EXPECT_EQ(swapped.P(1, 0), 0.8);
}

TEST(SpectralIo, RoundTripAndVersion) {
  auto c = spectral_cache(er_connected(40, 4.0, 9), Normalization::NormAdjacency, 7, {.skip_zero = false});
  std::stringstream ss;
  write_spectral(ss, c);
  auto back = read_spectral(ss);
  EXPECT_EQ(back, c);
  std::string text = ss.str();
  text.replace(text.find("v1"), 2, "v2");
  std::istringstream bad(text);
  EXPECT_EQ(kind_of([&] { read_spectral(bad); }), ErrorKind::VersionMismatch);
  std::istringstream truncated(ss.str().substr(0, ss.str().size() / 2));
  EXPECT_EQ(kind_of([&] { read_spectral(truncated); }), ErrorKind::ParseError);
}

TEST(Weyl, PerturbationBound) {
  Graph g = er_connected(30, 4.0, 12);
  Eigen::MatrixXd l = laplacian(g, Normalization::Sym).to_dense();
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd e(l.rows(), l.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
      for (Eigen::Index j = 0; j <= i; ++j) e(i, j) = e(j, i) = 0.01 * rng.normal();
    oracle::Matrix lm(30, std::vector<double>(30)), pm(30, std::vector<double>(30)), em(30, std::vector<double>(30));
    for (int i = 0; i < l.rows(); ++i)
      for (int j = 0; j < l.cols(); ++j) lm[i][j] = l(i, j), pm[i][j] = l(i, j) + e(i, j), em[i][j] = e(i, j);
    auto [a, _a] = oracle::jacobi_eigen(lm);
    auto [b, _b] = oracle::jacobi_eigen(pm);
    auto [ev, _e] = oracle::jacobi_eigen(em);
    const double norm2 = std::max(std::abs(ev.front()), std::abs(ev.back()));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - b[i]), norm2 + 1e-8);
  }
}

}  // namespace
}  // namespace gmn
