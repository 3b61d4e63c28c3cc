// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/graph.hpp"
#include "gmn/lanczos.hpp"
#include "gmn/sparse.hpp"
#include "gmn/text_io.hpp"

namespace gmn {

enum class Normalization { Sym, Unnormalized, NormAdjacency };

constexpr std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::Sym: return "sym_laplacian";
    case Normalization::Unnormalized: return "unnormalized";
    case Normalization::NormAdjacency: return "norm_adjacency";
  }
  return "sym_laplacian";
}

inline Normalization parse_normalization(std::string_view text) {
  if (text == "sym" || text == "sym_laplacian") return Normalization::Sym;
  if (text == "unnormalized") return Normalization::Unnormalized;
  if (text == "norm_adjacency") return Normalization::NormAdjacency;
  fail(ErrorKind::InvalidValue, "unknown normalization '" + std::string(text) + "'");
}

enum class SolverKind { Auto, Lanczos, Dense };

constexpr std::string_view to_string(SolverKind s) {
  switch (s) {
    case SolverKind::Auto: return "auto";
    case SolverKind::Lanczos: return "lanczos";
    case SolverKind::Dense: return "dense";
  }
  return "auto";
}

inline SolverKind parse_solver(std::string_view text) {
  for (auto s : {SolverKind::Auto, SolverKind::Lanczos, SolverKind::Dense}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorKind::InvalidValue, "unknown solver '" + std::string(text) + "'");
}

/// sym: I - D^-1/2 A D^-1/2, unnormalized: D - A, norm_adjacency: D^-1/2 A D^-1/2.
/// Degrees are row sums of A (a self-loop contributes 1). Isolated nodes get
/// zero rows in both normalized variants.
inline SparseMatrix laplacian(const Graph& g, Normalization norm) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const auto deg = static_cast<double>(g.degree(u));
    inv_sqrt[u] = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  SparseMatrix m;
  m.n = n;
  m.offsets.assign(1, 0);
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t u = 0; u < n; ++u) {
    row.clear();
    const auto deg = static_cast<double>(g.degree(u));
    double self = 0.0;
    for (auto v : g.neighbors(u)) {
      if (v == u) {
        self = 1.0;
        continue;
      }
      const double a = norm == Normalization::Unnormalized ? 1.0 : inv_sqrt[u] * inv_sqrt[v];
      row.emplace_back(v, norm == Normalization::NormAdjacency ? a : -a);
    }
    double diag = 0.0;
    switch (norm) {
      case Normalization::Sym: diag = deg > 0 ? 1.0 - self / deg : 0.0; break;
      case Normalization::Unnormalized: diag = deg - self; break;
      case Normalization::NormAdjacency: diag = deg > 0 ? self / deg : 0.0; break;
    }
    if (diag != 0.0) row.emplace_back(static_cast<std::uint32_t>(u), diag);
    std::sort(row.begin(), row.end());
    for (auto [c, value] : row) {
      m.cols.push_back(c);
      m.values.push_back(value);
    }
    m.offsets.push_back(m.cols.size());
  }
  return m;
}

struct SpectralCache {
  std::vector<double> eigenvalues;  // ascending, length d
  num::Tensor<double> P{num::Shape{0, 0}};  // n x d, row u is p_u
  Normalization norm = Normalization::Sym;
  bool skip_zero = true;
  SolverKind solver = SolverKind::Dense;
  std::size_t pad = 0;
  double residual = 0.0;
  std::uint64_t multiplies = 0;  // sparse products spent by Lanczos, not serialized

  std::size_t num_nodes() const { return P.dim(0); }
  std::size_t dim() const { return P.dim(1); }

  num::Tensor<double> lambda() const {
    return num::Tensor<double>({eigenvalues.size()}, std::span<const double>(eigenvalues));
  }

  friend bool operator==(const SpectralCache& a, const SpectralCache& b) {
    return a.eigenvalues == b.eigenvalues && a.P == b.P && a.norm == b.norm && a.skip_zero == b.skip_zero &&
           a.solver == b.solver && a.pad == b.pad && a.residual == b.residual;
  }
};

/// Makes the largest-magnitude entry of every column positive. Entries within
/// a relative 1e-12 of the maximum count as tied and the lowest row wins.
inline SpectralCache canonicalize_signs(SpectralCache cache) {
  const std::size_t n = cache.P.rank() == 2 ? cache.P.dim(0) : 0;
  const std::size_t d = n ? cache.P.dim(1) : 0;
  for (std::size_t j = 0; j < d; ++j) {
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(cache.P(i, j)));
    if (peak == 0.0) continue;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(cache.P(i, j)) >= peak * (1.0 - 1e-12)) {
        pick = i;
        break;
      }
    }
    if (cache.P(pick, j) < 0) {
      for (std::size_t i = 0; i < n; ++i) cache.P(i, j) = -cache.P(i, j);
    }
  }
  return cache;
}

/// Row u of P moves to row perm[u]; eigenvalues are untouched.
inline SpectralCache permute_cache(SpectralCache cache, std::span<const std::size_t> perm) {
  require(is_permutation(perm, cache.num_nodes()), ErrorKind::InvalidPermutation, "permutation does not match cache");
  cache.P = permute_rows(cache.P, perm);
  return cache;
}

struct EigOptions {
  Which which = Which::Smallest;
  bool skip_zero = true;
  SolverKind solver = SolverKind::Auto;
  std::size_t dense_threshold = 256;
  double zero_tol = 1e-9;
  double residual_tol = 1e-8;
  LanczosOptions lanczos;
};

namespace detail {

struct ComponentPairs {
  std::vector<std::size_t> nodes;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // |nodes| x k
};

inline ComponentPairs dense_pairs(const SparseMatrix& sub, std::vector<std::size_t> nodes) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub.to_dense());
  require(es.info() == Eigen::Success, ErrorKind::ConvergenceFailure, "dense eigensolver failed");
  return {std::move(nodes), es.eigenvalues(), es.eigenvectors()};
}

}  // namespace detail

/// d extreme eigenpairs of a symmetric matrix, optionally skipping |lambda| < 1e-9,
/// zero-padded when fewer qualify. Works component by component on the sparsity
/// pattern; small problems (or solver=dense) use a dense eigensolver, larger
/// components use Lanczos.
inline SpectralCache eig_topd(const SparseMatrix& m, std::size_t d, const EigOptions& opts = {},
                              Normalization tag = Normalization::Sym) {
  const std::size_t n = m.n;
  require(d >= 1 && d <= n, ErrorKind::DimensionError,
          "d=" + std::to_string(d) + " outside [1, " + std::to_string(n) + "]");
  std::vector<detail::ComponentPairs> parts;
  bool used_lanczos = false;
  std::uint64_t multiplies = 0;
  const bool whole_dense = opts.solver == SolverKind::Dense || (opts.solver == SolverKind::Auto && n <= opts.dense_threshold);
  if (whole_dense) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    parts.push_back(detail::dense_pairs(m, std::move(all)));
  } else {
    for (auto& nodes : pattern_components(m)) {
      const std::size_t c = nodes.size();
      if (c == 1) {
        detail::ComponentPairs p;
        p.values = Eigen::VectorXd::Constant(1, m.at(nodes[0], nodes[0]));
        p.vectors = Eigen::MatrixXd::Ones(1, 1);
        p.nodes = std::move(nodes);
        parts.push_back(std::move(p));
        continue;
      }
      SparseMatrix sub = m.submatrix(nodes);
      if (opts.solver == SolverKind::Auto && c <= opts.dense_threshold) {
        parts.push_back(detail::dense_pairs(sub, std::move(nodes)));
        continue;
      }
      used_lanczos = true;
      std::size_t want = std::min(c, d + (opts.skip_zero ? 1 : 0));
      while (true) {
        LanczosResult r = lanczos(sub, want, opts.which, opts.lanczos);
        multiplies += r.multiplies;
        std::size_t qualifying = 0;
        for (Eigen::Index i = 0; i < r.values.size(); ++i) {
          if (!opts.skip_zero || std::abs(r.values(i)) >= opts.zero_tol) ++qualifying;
        }
        if (qualifying >= d || want == c) {
          parts.push_back({std::move(nodes), std::move(r.values), std::move(r.vectors)});
          break;
        }
        want = std::min(c, 2 * want);
      }
    }
  }

  struct Candidate {
    double value;
    std::size_t part;
    Eigen::Index column;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (Eigen::Index i = 0; i < parts[p].values.size(); ++i) {
      const double v = parts[p].values(i);
      if (opts.skip_zero && std::abs(v) < opts.zero_tol) continue;
      candidates.push_back({v, p, i});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    return opts.which == Which::Smallest ? a.value < b.value : a.value > b.value;
  });
  if (candidates.size() > d) candidates.resize(d);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value < b.value; });

  SpectralCache cache;
  cache.norm = tag;
  cache.skip_zero = opts.skip_zero;
  cache.solver = used_lanczos ? SolverKind::Lanczos : SolverKind::Dense;
  cache.multiplies = multiplies;
  cache.pad = d - candidates.size();
  cache.P = num::Tensor<double>({n, d});
  cache.eigenvalues.assign(d, 0.0);
  // Zero padding sits where 0 falls in the ascending order.
  const auto pad_pos = static_cast<std::size_t>(std::count_if(
      candidates.begin(), candidates.end(), [](const Candidate& c) { return c.value < 0.0; }));
  std::vector<double> x(n);
  std::vector<double> y(n);
  double worst = 0.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const auto& cand = candidates[j];
    const auto& part = parts[cand.part];
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < part.nodes.size(); ++i) {
      x[part.nodes[i]] = part.vectors(static_cast<Eigen::Index>(i), cand.column);
    }
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    const std::size_t col = j < pad_pos ? j : j + cache.pad;
    for (std::size_t u = 0; u < n; ++u) cache.P(u, col) = x[u] / norm;
    cache.eigenvalues[col] = cand.value;
    for (std::size_t u = 0; u < n; ++u) x[u] /= norm;
    m.multiply(x, y);
    double r = 0.0;
    for (std::size_t u = 0; u < n; ++u) r += (y[u] - cand.value * x[u]) * (y[u] - cand.value * x[u]);
    worst = std::max(worst, std::sqrt(r));
  }
  cache.residual = worst;
  if (worst > opts.residual_tol) {
    fail(ErrorKind::ConvergenceFailure, "eigenpair residual " + text::format_double(worst) + " exceeds " +
                                            text::format_double(opts.residual_tol) + " after " +
                                            std::to_string(multiplies) + " multiplies");
  }
  return canonicalize_signs(std::move(cache));
}

/// Laplacian, top-d eigenpairs and sign canonicalization in one call.
inline SpectralCache spectral_cache(const Graph& g, Normalization norm, std::size_t d, EigOptions opts = {}) {
  return eig_topd(laplacian(g, norm), d, opts, norm);
}

// Text format:
//   GMNSPEC v1 n=<n> d=<d> norm=<tag> skipzero=<0|1> solver=<tag> pad=<k> residual=<r>
//   <lambda_1> ... <lambda_d>
//   n rows of P
inline void write_spectral(std::ostream& out, const SpectralCache& c) {
  out << "GMNSPEC v1 n=" << c.num_nodes() << " d=" << c.dim() << " norm=" << to_string(c.norm)
      << " skipzero=" << (c.skip_zero ? 1 : 0) << " solver=" << to_string(c.solver) << " pad=" << c.pad
      << " residual=" << text::format_double(c.residual) << '\n';
  for (std::size_t j = 0; j < c.eigenvalues.size(); ++j) out << (j ? " " : "") << text::format_double(c.eigenvalues[j]);
  out << '\n';
  for (std::size_t u = 0; u < c.num_nodes(); ++u) {
    for (std::size_t j = 0; j < c.dim(); ++j) out << (j ? " " : "") << text::format_double(c.P(u, j));
    out << '\n';
  }
}

inline SpectralCache read_spectral(std::istream& in, const std::string& source = "<spectral>") {
  text::LineReader reader(in, source);
  const std::string header = reader.expect_line("GMNSPEC header");
  const auto tokens = text::split_ws(header);
  text::check_magic(reader, tokens, "GMNSPEC", "v1");
  std::optional<std::uint64_t> n, d;
  SpectralCache c;
  bool have_norm = false;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    auto kv = text::key_value(tokens[i]);
    if (!kv) reader.error("malformed header token '" + std::string(tokens[i]) + "'");
    auto [key, value] = *kv;
    try {
      if (key == "n") n = reader.parse_uint(value, "n");
      else if (key == "d") d = reader.parse_uint(value, "d");
      else if (key == "norm") c.norm = parse_normalization(value), have_norm = true;
      else if (key == "skipzero") c.skip_zero = reader.parse_uint(value, "skipzero") != 0;
      else if (key == "solver") c.solver = parse_solver(value);
      else if (key == "pad") c.pad = reader.parse_uint(value, "pad");
      else if (key == "residual") c.residual = reader.parse_double(value, "residual");
      else reader.error("unknown header field '" + std::string(key) + "'");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw;
      reader.error("field '" + std::string(key) + "': " + e.what());
    }
  }
  if (!n || !d || !have_norm) reader.error("header must define n, d and norm");
  const std::string lam_line = reader.expect_line("eigenvalue line");
  const auto lam = text::split_ws(lam_line);
  if (lam.size() != *d) reader.error("expected " + std::to_string(*d) + " eigenvalues");
  for (auto t : lam) c.eigenvalues.push_back(reader.parse_double(t, "lambda"));
  c.P = num::Tensor<double>({*n, *d});
  for (std::size_t u = 0; u < *n; ++u) {
    const std::string line = reader.expect_line("eigenvector row");
    const auto row = text::split_ws(line);
    if (row.size() != *d) reader.error("eigenvector row has " + std::to_string(row.size()) + " values");
    for (std::size_t j = 0; j < *d; ++j) c.P(u, j) = reader.parse_double(row[j], "P");
  }
  return c;
}

inline void save_spectral(const std::string& path, const SpectralCache& c) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path);
  write_spectral(out, c);
}

inline SpectralCache load_spectral(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
  return read_spectral(in, path);
}

}  // namespace gmn
