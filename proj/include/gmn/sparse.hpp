// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gmn/error.hpp"

namespace gmn {

/// Square matrix in compressed row form. Column indices are sorted per row.
struct SparseMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }

  double at(std::size_t r, std::size_t c) const {
    for (std::size_t k = offsets.at(r); k < offsets[r + 1]; ++k) {
      if (cols[k] == c) return values[k];
    }
    return 0.0;
  }

  /// y = M x
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) acc += values[k] * x[cols[k]];
      y[r] = acc;
    }
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[k])) = values[k];
      }
    }
    return m;
  }

  /// Principal submatrix on `nodes` (given in increasing order).
  SparseMatrix submatrix(std::span<const std::size_t> nodes) const {
    std::vector<std::int64_t> local(n, -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<std::int64_t>(i);
    SparseMatrix out;
    out.n = nodes.size();
    out.offsets.assign(1, 0);
    for (auto r : nodes) {
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        if (local[cols[k]] >= 0) {
          out.cols.push_back(static_cast<std::uint32_t>(local[cols[k]]));
          out.values.push_back(values[k]);
        }
      }
      out.offsets.push_back(out.cols.size());
    }
    return out;
  }

  bool is_symmetric(double tol = 0.0) const {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
        if (std::abs(at(cols[k], r) - values[k]) > tol) return false;
      }
    }
    return true;
  }
};

/// Builds a CSR matrix from (row, col, value) triplets; duplicates are summed.
struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

inline SparseMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  SparseMatrix m;
  m.n = n;
  m.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    require(t.row < n && t.col < n, ErrorKind::IndexOutOfRange, "triplet outside matrix");
    if (!m.cols.empty() && i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      m.values.back() += t.value;
      continue;
    }
    m.cols.push_back(static_cast<std::uint32_t>(t.col));
    m.values.push_back(t.value);
    ++m.offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < n; ++r) m.offsets[r + 1] += m.offsets[r];
  return m;
}

/// Connected components of the sparsity pattern; nodes ascending within each
/// component, components ordered by their smallest node.
inline std::vector<std::vector<std::size_t>> pattern_components(const SparseMatrix& m) {
  std::vector<std::int64_t> comp(m.n, -1);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.n; ++s) {
    if (comp[s] >= 0) continue;
    const auto id = static_cast<std::int64_t>(out.size());
    out.emplace_back();
    comp[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto r = stack.back();
      stack.pop_back();
      out.back().push_back(r);
      for (std::size_t k = m.offsets[r]; k < m.offsets[r + 1]; ++k) {
        if (m.values[k] == 0.0) continue;
        const auto c = m.cols[k];
        if (comp[c] < 0) {
          comp[c] = id;
          stack.push_back(c);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

}  // namespace gmn
