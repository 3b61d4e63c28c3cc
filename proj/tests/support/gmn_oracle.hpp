// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loop-level reference for one GMN layer: every quantity is built entry by
// entry and the node interaction is the explicit sum over all pairs (u, v).
#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gmn/config.hpp"
#include "gmn/params.hpp"
#include "gmn/spectral.hpp"

namespace gmn::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;
using Cube = std::vector<Mat>;  // [node][row][col]

inline double act(Activation a, double x) {
  switch (a) {
    case Activation::Relu: return x > 0 ? x : 0.0;
    case Activation::Gelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    case Activation::Silu: return x / (1.0 + std::exp(-x));
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerOracle {
  const ParamSet& ps;
  std::string prefix;  // e.g. "layer0.gmn"

  const num::Tensor<double>& t(const std::string& name) const { return ps.at(prefix + "." + name); }

  // y = W x + b for a row vector x
  Vec affine(const std::string& name, const Vec& x, bool bias = true) const {
    const auto& w = t(name + (bias ? ".W" : ""));
    Vec y(w.dim(0), 0.0);
    for (std::size_t i = 0; i < w.dim(0); ++i) {
      for (std::size_t j = 0; j < w.dim(1); ++j) y[i] += w(i, j) * x[j];
      if (bias) y[i] += t(name + ".b")[i];
    }
    return y;
  }

  Mat phi(const LayerConfig& c, const SpectralCache& cache, const std::vector<double>& mask,
          const std::string& which) const {
    const std::size_t d = cache.dim(), m = c.m;
    Mat out(d, Vec(m, 0.0));
    if (c.phi.mode == PhiMode::Power) {
      const auto s = c.power_exponents();
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < m; ++i) out[j][i] = mask[j] * std::pow(cache.eigenvalues[j], double(s[i]));
      return out;
    }
    auto mlp = [&](const std::string& p, double lam) {
      const auto &w1 = t(which + "." + p + ".w1"), &b1 = t(which + "." + p + ".b1");
      const auto &w2 = t(which + "." + p + ".w2"), &b2 = t(which + "." + p + ".b2");
      Vec y(m, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        y[i] = b2[i];
        for (std::size_t k = 0; k < w1.size(); ++k) y[i] += act(c.phi.act, lam * w1[k] + b1[k]) * w2(k, i);
      }
      return y;
    };
    Vec pooled(m, 0.0);
    double count = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (mask[j] == 0.0) continue;
      count += 1;
      const auto y = mlp("pool", cache.eigenvalues[j]);
      for (std::size_t i = 0; i < m; ++i) pooled[i] += y[i];
    }
    if (c.phi.pool == Pooling::Mean && count > 0)
      for (auto& v : pooled) v /= count;
    for (std::size_t j = 0; j < d; ++j) {
      const auto y = mlp("rho", cache.eigenvalues[j]);
      for (std::size_t i = 0; i < m; ++i) out[j][i] = mask[j] * (y[i] + pooled[i]);
    }
    return out;
  }

  // B (or B2 act(B .)) applied to a d x m slice
  Mat apply_b(const LayerConfig& c, const Mat& x) const {
    const auto& b = t("B");
    const std::size_t l = b.dim(0), d = b.dim(1), m = x[0].size();
    Mat y(l, Vec(m, 0.0));
    for (std::size_t k = 0; k < l; ++k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) y[k][i] += b(k, j) * x[j][i];
    if (c.wb == WBMode::Linear) return y;
    const auto& b2 = t("B2");
    Mat z(l, Vec(m, 0.0));
    for (std::size_t k = 0; k < l; ++k)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < l; ++j) z[k][i] += b2(k, j) * act(c.wb_act, y[j][i]);
    return z;
  }

  /// H (n x l) of one layer by the pairwise summation
  /// h_u = sum_v <a_u, a_v>_type * z_u * h~_u (plus the self-term).
  Mat forward(const LayerConfig& c, const SpectralCache& cache, const Mat& x) const {
    const std::size_t n = x.size(), l = c.l, d = c.d, m = c.m;
    std::vector<double> mask(d, 1.0);
    {
      std::size_t padded = 0;
      for (std::size_t j = 0; j < d && padded < cache.pad; ++j) {
        bool zero = cache.eigenvalues[j] == 0.0;
        for (std::size_t u = 0; u < n && zero; ++u) zero = cache.P(u, j) == 0.0;
        if (zero) {
          mask[j] = 0.0;
          ++padded;
        }
      }
    }
    const Mat phi_a = phi(c, cache, mask, "phi");
    Mat phi_c = phi_a;
    if (c.phi_c == PhiSharing::Separate) phi_c = phi(c, cache, mask, "phic");
    if (c.phi_c == PhiSharing::Zero) phi_c = Mat(d, Vec(m, 0.0));

    Cube A(n, Mat(d, Vec(m))), C(n, Mat(d, Vec(m))), a(n), BA(n);
    for (std::size_t u = 0; u < n; ++u) {
      Vec wx = affine("W", x[u], false);
      if (c.wb == WBMode::Nonlinear) {
        Vec h(d);
        for (std::size_t j = 0; j < d; ++j) h[j] = act(c.wb_act, wx[j]);
        wx = affine("W2", h, false);
      }
      Mat mix(d, Vec(m));
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < m; ++i) {
          A[u][j][i] = phi_a[j][i] * wx[j];
          C[u][j][i] = phi_c[j][i] * cache.P(u, j);
          mix[j][i] = c.agg == Agg::Mul ? A[u][j][i] * C[u][j][i] : A[u][j][i] + C[u][j][i];
        }
      a[u] = apply_b(c, mix);
      BA[u] = apply_b(c, A[u]);
    }

    Mat out(n, Vec(l, 0.0));
    for (std::size_t u = 0; u < n; ++u) {
      Vec s(l, 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        switch (c.inner) {
          case InnerType::T1:
            for (std::size_t k = 0; k < l; ++k)
              for (std::size_t i = 0; i < m; ++i) s[k] += a[u][k][i] * a[v][k][i];
            break;
          case InnerType::T2:
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t k = 0; k < l; ++k) s[i] += a[u][k][i] * a[v][k][i];
            break;
          case InnerType::T3: {
            double dot = 0;
            for (std::size_t k = 0; k < l; ++k)
              for (std::size_t i = 0; i < m; ++i) dot += a[u][k][i] * a[v][k][i];
            for (std::size_t k = 0; k < l; ++k) s[k] += dot;
            break;
          }
          case InnerType::T4: {
            Vec second(l, 0.0);
            if (c.t4_second == InnerType::T2) {
              for (std::size_t k = 0; k < l; ++k)
                for (std::size_t j = 0; j < d; ++j) second[k] += C[u][j][k] * C[v][j][k];
            } else {
              double dot = 0;
              for (std::size_t j = 0; j < d; ++j)
                for (std::size_t i = 0; i < m; ++i) dot += C[u][j][i] * C[v][j][i];
              for (auto& e : second) e = dot;
            }
            for (std::size_t k = 0; k < l; ++k) {
              double first = 0;
              for (std::size_t i = 0; i < m; ++i) first += BA[u][k][i] * BA[v][k][i];
              s[k] += first * second[k];
            }
            break;
          }
        }
      }
      Vec zp = affine("z", x[u]), hp = affine("h", x[u]);
      if (c.gate == GateMode::NLP) {
        for (auto& e : zp) e = act(c.gate_act, e);
        for (auto& e : hp) e = act(c.gate_act, e);
        zp = affine("z2", zp);
        hp = affine("h2", hp);
      }
      double beta = 1.0, self = 0.0;
      if (c.self_term) {
        beta = 2.0 * sig(t("beta_raw").item());
        const auto &w1 = t("Ws1"), &w2 = t("Ws2");
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t r = 0; r < d; ++r) {
            double p = 0, q = 0;
            for (std::size_t j = 0; j < d; ++j) {
              p += w1(r, j) * C[u][j][i];
              q += w2(r, j) * C[u][j][i];
            }
            self += p * q;
          }
      }
      for (std::size_t k = 0; k < l; ++k) {
        const double inner = c.self_term ? beta * s[k] + (2.0 - beta) * self : s[k];
        out[u][k] = sig(zp[k]) * hp[k] * inner;
      }
    }
    return out;
  }
};

inline Mat to_mat(const num::Tensor<double>& t) {
  Mat m(t.dim(0), Vec(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t(i, j);
  return m;
}

inline double max_abs_diff(const Mat& a, const num::Tensor<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b(i, j)));
  return worst;
}

}  // namespace gmn::oracle
