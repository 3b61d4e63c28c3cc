// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "gmn/error.hpp"
#include "gmn/rng.hpp"
#include "gmn/tensor.hpp"

namespace gmn {

enum class MinGruMode { Recurrence, ClosedForm };

/// z_t = sigmoid(Wz x_t + bz), h~_t = Wh x_t + bh, with d_h = alpha * d_x.
struct MinGruParams {
  num::Tensor<double> Wz, bz, Wh, bh;

  std::size_t input_dim() const { return Wz.dim(1); }
  std::size_t state_dim() const { return Wz.dim(0); }
};

inline MinGruParams init_mingru(std::size_t dx, std::size_t alpha, std::uint64_t seed) {
  require(dx >= 1 && alpha >= 1, ErrorKind::InvalidParams, "minGRU needs d_x >= 1 and alpha >= 1");
  const std::size_t dh = alpha * dx;
  Rng rng(hash_key({seed, 0x6d67ULL}));
  const double sd = std::sqrt(2.0 / static_cast<double>(dx + dh));
  MinGruParams p{num::Tensor<double>({dh, dx}), num::Tensor<double>({dh}), num::Tensor<double>({dh, dx}),
                 num::Tensor<double>({dh})};
  for (auto* t : {&p.Wz, &p.Wh}) {
    for (auto& v : t->data()) v = sd * rng.normal();
  }
  for (auto* t : {&p.bz, &p.bh}) {
    for (auto& v : t->data()) v = 0.1 * rng.normal();
  }
  return p;
}

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(sigmoid(x)) = -softplus(-x)
inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace detail

/// Scan over given gates, inputs T x d_h with h_0 = 0. `log_z` and
/// `log_one_minus_z` must hold log z_t and log(1 - z_t).
///
/// Recurrence: h_t = (1 - z_t) h_{t-1} + z_t h~_t.
/// Closed form: h_t = c_t sum_{i<=t} z_i h~_i / c_i with c_t = prod_{j<=t}(1 - z_j).
/// The sum runs in log space on the positive and negative parts separately,
/// with log c_t a cumulative sum, so 1 / c_i is never formed. A gate equal to
/// 1 zeroes c and restarts the accumulation there.
inline num::Tensor<double> mingru_scan(const num::Tensor<double>& log_z, const num::Tensor<double>& log_one_minus_z,
                                       const num::Tensor<double>& htilde, MinGruMode mode) {
  require(log_z.rank() == 2 && log_z.shape() == htilde.shape() && log_z.shape() == log_one_minus_z.shape(),
          ErrorKind::ShapeMismatch, "minGRU scan operands must share a T x d_h shape");
  const std::size_t T = log_z.dim(0), dh = log_z.dim(1);
  num::Tensor<double> h({T, dh});
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < dh; ++k) {
    if (mode == MinGruMode::Recurrence) {
      double state = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        state = std::exp(log_one_minus_z(t, k)) * state + std::exp(log_z(t, k)) * htilde(t, k);
        h(t, k) = state;
      }
      continue;
    }
    double log_c = 0.0;  // log c_t relative to the last restart
    double pos = kNegInf, neg = kNegInf;
    for (std::size_t t = 0; t < T; ++t) {
      if (log_one_minus_z(t, k) == kNegInf) {
        log_c = 0.0;
        pos = neg = kNegInf;
      } else {
        log_c += log_one_minus_z(t, k);
      }
      const double w = htilde(t, k);
      if (w != 0.0) {
        const double term = log_z(t, k) + std::log(std::abs(w)) - log_c;
        if (w > 0) pos = detail::log_add_exp(pos, term);
        else neg = detail::log_add_exp(neg, term);
      }
      h(t, k) = std::exp(pos + log_c) - std::exp(neg + log_c);
    }
  }
  return h;
}

/// Sequence-mode minGRU over x (T x d_x), returning T x d_h.
inline num::Tensor<double> mingru_seq(const num::Tensor<double>& x, const MinGruParams& p, MinGruMode mode) {
  require(x.rank() == 2 && x.dim(1) == p.input_dim(), ErrorKind::ShapeMismatch, "minGRU input width");
  const std::size_t T = x.dim(0), dx = x.dim(1), dh = p.state_dim();
  num::Tensor<double> log_z({T, dh}), log_1mz({T, dh}), ht({T, dh});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < dh; ++k) {
      double pz = p.bz[k], ph = p.bh[k];
      for (std::size_t j = 0; j < dx; ++j) {
        pz += p.Wz(k, j) * x(t, j);
        ph += p.Wh(k, j) * x(t, j);
      }
      log_z(t, k) = detail::log_sigmoid(pz);
      log_1mz(t, k) = detail::log_sigmoid(-pz);
      ht(t, k) = ph;
    }
  }
  return mingru_scan(log_z, log_1mz, ht, mode);
}

/// Convenience for gate values given directly in [0, 1].
inline num::Tensor<double> mingru_scan_gates(const num::Tensor<double>& z, const num::Tensor<double>& htilde,
                                             MinGruMode mode) {
  num::Tensor<double> lz(z.shape()), l1(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    require(z[i] >= 0.0 && z[i] <= 1.0, ErrorKind::InvalidParams, "gate values must lie in [0, 1]");
    lz[i] = std::log(z[i]);
    l1[i] = std::log1p(-z[i]);
  }
  return mingru_scan(lz, l1, htilde, mode);
}

}  // namespace gmn
