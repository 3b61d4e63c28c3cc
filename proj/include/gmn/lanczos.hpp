// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/rng.hpp"
#include "gmn/sparse.hpp"

namespace gmn {

enum class Which { Smallest, Largest };

struct LanczosOptions {
  std::size_t basis_size = 0;  // 0: chosen from the number of wanted pairs
  std::size_t max_restarts = 500;
  double tol = 1e-11;  // residual estimate for locking, relative to the operator scale
  std::uint64_t seed = 0x1a2c05;
};

struct LanczosResult {
  Eigen::VectorXd values;   // ordered from the wanted end
  Eigen::MatrixXd vectors;  // columns match `values`
  std::uint64_t multiplies = 0;
  std::size_t restarts = 0;
};

namespace detail {

// Symmetric Lanczos with full reorthogonalization, thick restart and locking.
// The projected matrix is accumulated from the orthogonalization coefficients,
// which is exactly the tridiagonal (plus restart arrow) in exact arithmetic.
class LanczosSolver {
 public:
  LanczosSolver(const SparseMatrix& m, Which which, const LanczosOptions& opts)
      : m_(m), which_(which), opts_(opts), rng_(opts.seed) {}

  // Converges `want` extreme eigenpairs of M restricted to the orthogonal
  // complement of `locked_` and appends them to the locked set.
  void converge(std::size_t want) {
    const auto n = static_cast<Eigen::Index>(m_.n);
    std::size_t target = std::min<std::size_t>(locked_count() + want, m_.n);
    if (locked_count() >= target) return;
    std::size_t basis = opts_.basis_size ? opts_.basis_size : std::max<std::size_t>(2 * want + 24, 40);
    Eigen::MatrixXd v(n, static_cast<Eigen::Index>(basis + 1));
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis), static_cast<Eigen::Index>(basis));
    Eigen::VectorXd w(n);
    std::vector<double> tmp(m_.n);

    std::size_t kept = 0;
    v.col(0) = random_orthogonal(v, 0);
    for (std::size_t restart = 0;; ++restart) {
      restarts_ = std::max(restarts_, restart);
      if (restart > opts_.max_restarts) {
        fail(ErrorKind::ConvergenceFailure, "Lanczos did not converge after " + std::to_string(restart) +
                                                " restarts (" + std::to_string(multiplies_) + " multiplies)");
      }
      const std::size_t room = m_.n - locked_count();
      const std::size_t steps = std::min(basis, room);
      double beta_last = 0.0;
      std::size_t j = kept;
      for (; j < steps; ++j) {
        apply(v.col(static_cast<Eigen::Index>(j)), w, tmp);
        deflate(w);
        const auto cols = static_cast<Eigen::Index>(j + 1);
        Eigen::VectorXd c = v.leftCols(cols).transpose() * w;
        w.noalias() -= v.leftCols(cols) * c;
        Eigen::VectorXd c2 = v.leftCols(cols).transpose() * w;
        w.noalias() -= v.leftCols(cols) * c2;
        c += c2;
        deflate(w);
        for (Eigen::Index i = 0; i < cols; ++i) {
          h(i, cols - 1) = c(i);
          h(cols - 1, i) = c(i);
        }
        scale_ = std::max(scale_, std::abs(c(cols - 1)));
        const double beta = w.norm();
        beta_last = beta;
        if (j + 1 == steps) break;
        if (beta <= 1e-12 * std::max(scale_, 1.0)) {
          // Invariant subspace: continue from a fresh direction with zero coupling.
          beta_last = 0.0;
          v.col(cols) = random_orthogonal(v, j + 1);
          h(cols, cols - 1) = h(cols - 1, cols) = 0.0;
        } else {
          v.col(cols) = w / beta;
          h(cols, cols - 1) = h(cols - 1, cols) = beta;
        }
      }
      const auto k = static_cast<Eigen::Index>(std::min(j + 1, steps));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.topLeftCorner(k, k));
      const Eigen::VectorXd theta = es.eigenvalues();
      const Eigen::MatrixXd s = es.eigenvectors();
      std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
      std::iota(order.begin(), order.end(), 0);
      if (which_ == Which::Largest) std::reverse(order.begin(), order.end());
      for (Eigen::Index i = 0; i < k; ++i) scale_ = std::max(scale_, std::abs(theta(i)));

      const double tol = opts_.tol * std::max(scale_, 1.0);
      const bool exhausted = static_cast<std::size_t>(k) == room;
      std::size_t pos = 0;
      std::vector<Eigen::Index> lock_now;
      while (pos < order.size() && locked_count() + lock_now.size() < target) {
        const double est = std::abs(beta_last * s(k - 1, order[pos]));
        if (!exhausted && est > tol) break;
        lock_now.push_back(order[pos]);
        ++pos;
      }
      for (auto idx : lock_now) {
        Eigen::VectorXd y = v.leftCols(k) * s.col(idx);
        y.normalize();
        add_locked(theta(idx), y);
      }
      if (locked_count() >= target || exhausted) {
        if (locked_count() < target) target = locked_count();
        return;
      }

      // Thick restart: keep the next wanted Ritz vectors plus the residual direction.
      const std::size_t remaining = target - locked_count();
      const std::size_t unlocked = static_cast<std::size_t>(k) - pos;
      kept = std::min<std::size_t>({remaining + std::max<std::size_t>(remaining, 8), unlocked ? unlocked - 1 : 0,
                                    basis / 2 + 1});
      kept = std::min(kept, m_.n - locked_count() - 1);
      Eigen::MatrixXd ritz(n, static_cast<Eigen::Index>(kept));
      for (std::size_t i = 0; i < kept; ++i) ritz.col(static_cast<Eigen::Index>(i)) = v.leftCols(k) * s.col(order[pos + i]);
      const bool have_residual = beta_last > 0.0;
      Eigen::VectorXd resid = have_residual ? Eigen::VectorXd(w / beta_last) : Eigen::VectorXd();
      h.setZero();
      for (std::size_t i = 0; i < kept; ++i) {
        v.col(static_cast<Eigen::Index>(i)) = ritz.col(static_cast<Eigen::Index>(i));
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = theta(order[pos + i]);
      }
      reorthonormalize(v, kept);
      if (have_residual) {
        v.col(static_cast<Eigen::Index>(kept)) = resid;
        orthonormalize_column(v, kept);
      } else {
        v.col(static_cast<Eigen::Index>(kept)) = random_orthogonal(v, kept);
      }
    }
  }

  std::size_t locked_count() const noexcept { return locked_values_.size(); }
  const std::vector<double>& locked_values() const noexcept { return locked_values_; }
  const Eigen::MatrixXd& locked_vectors() const noexcept { return locked_; }
  std::uint64_t multiplies() const noexcept { return multiplies_; }
  std::size_t restarts() const noexcept { return restarts_; }

 private:
  void apply(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& y, std::vector<double>& tmp) {
    m_.multiply(std::span<const double>(x.data(), m_.n), std::span<double>(tmp));
    y = Eigen::Map<const Eigen::VectorXd>(tmp.data(), static_cast<Eigen::Index>(m_.n));
    ++multiplies_;
  }

  void deflate(Eigen::VectorXd& w) const {
    if (locked_values_.empty()) return;
    const auto cols = static_cast<Eigen::Index>(locked_values_.size());
    w.noalias() -= locked_.leftCols(cols) * (locked_.leftCols(cols).transpose() * w);
  }

  void add_locked(double value, const Eigen::VectorXd& y) {
    const auto cols = static_cast<Eigen::Index>(locked_values_.size());
    if (locked_.cols() <= cols) {
      Eigen::MatrixXd grown(static_cast<Eigen::Index>(m_.n), std::max<Eigen::Index>(8, 2 * cols));
      if (cols > 0) grown.leftCols(cols) = locked_.leftCols(cols);
      locked_.swap(grown);
    }
    Eigen::VectorXd z = y;
    deflate(z);
    deflate(z);
    const double norm = z.norm();
    locked_.col(cols) = norm > 0 ? Eigen::VectorXd(z / norm) : y;
    locked_values_.push_back(value);
  }

  // Unit vector orthogonal to the locked set and to columns [0, cols) of v.
  Eigen::VectorXd random_orthogonal(const Eigen::MatrixXd& v, std::size_t cols) {
    const auto n = static_cast<Eigen::Index>(m_.n);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = rng_.uniform(-1.0, 1.0);
      for (int pass = 0; pass < 2; ++pass) {
        deflate(x);
        if (cols) x.noalias() -= v.leftCols(static_cast<Eigen::Index>(cols)) *
                                 (v.leftCols(static_cast<Eigen::Index>(cols)).transpose() * x);
      }
      const double norm = x.norm();
      if (norm > 1e-8) return x / norm;
    }
    fail(ErrorKind::ConvergenceFailure, "could not extend the Krylov basis");
  }

  void orthonormalize_column(Eigen::MatrixXd& v, std::size_t j) {
    auto col = v.col(static_cast<Eigen::Index>(j));
    Eigen::VectorXd x = col;
    for (int pass = 0; pass < 2; ++pass) {
      deflate(x);
      if (j) x.noalias() -= v.leftCols(static_cast<Eigen::Index>(j)) * (v.leftCols(static_cast<Eigen::Index>(j)).transpose() * x);
    }
    const double norm = x.norm();
    col = norm > 1e-10 ? Eigen::VectorXd(x / norm) : random_orthogonal(v, j);
  }

  void reorthonormalize(Eigen::MatrixXd& v, std::size_t cols) {
    for (std::size_t j = 0; j < cols; ++j) orthonormalize_column(v, j);
  }

  const SparseMatrix& m_;
  Which which_;
  LanczosOptions opts_;
  Rng rng_;
  Eigen::MatrixXd locked_;
  std::vector<double> locked_values_;
  std::uint64_t multiplies_ = 0;
  std::size_t restarts_ = 0;
  double scale_ = 0.0;
};

}  // namespace detail

/// k extreme eigenpairs of a symmetric sparse matrix. After the wanted pairs
/// lock, a fresh deflated run checks that no more extreme eigenvalue (for
/// example a missed copy of a repeated one) was skipped.
inline LanczosResult lanczos(const SparseMatrix& m, std::size_t k, Which which, const LanczosOptions& opts = {}) {
  require(k >= 1 && k <= m.n, ErrorKind::DimensionError,
          "Lanczos wants " + std::to_string(k) + " pairs of a " + std::to_string(m.n) + "-dim matrix");
  detail::LanczosSolver solver(m, which, opts);
  solver.converge(k);
  const auto better = [which](double a, double b) { return which == Which::Smallest ? a < b : a > b; };
  for (int verify = 0; verify < 64 && solver.locked_count() < m.n; ++verify) {
    std::vector<double> vals = solver.locked_values();
    std::sort(vals.begin(), vals.end(), better);
    const double kth = vals[std::min(k, vals.size()) - 1];
    const std::size_t before = solver.locked_count();
    solver.converge(1);
    if (solver.locked_count() == before) break;
    const double found = solver.locked_values().back();
    const double slack = 1e-9 * std::max(1.0, std::abs(kth));
    if (!better(found, kth) || std::abs(found - kth) <= slack) break;
  }
  std::vector<std::size_t> order(solver.locked_count());
  std::iota(order.begin(), order.end(), 0);
  const auto& vals = solver.locked_values();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return better(vals[a], vals[b]); });
  LanczosResult out;
  const auto kk = static_cast<Eigen::Index>(k);
  out.values.resize(kk);
  out.vectors.resize(static_cast<Eigen::Index>(m.n), kk);
  for (Eigen::Index i = 0; i < kk; ++i) {
    out.values(i) = vals[order[static_cast<std::size_t>(i)]];
    out.vectors.col(i) = solver.locked_vectors().col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]));
  }
  out.multiplies = solver.multiplies();
  out.restarts = solver.restarts();
  return out;
}

}  // namespace gmn
