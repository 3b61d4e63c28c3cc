// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "gmn/config.hpp"
#include "gmn/contract.hpp"
#include "gmn/ops.hpp"
#include "gmn/params.hpp"
#include "gmn/spectral.hpp"

namespace gmn {

using num::Tape;
using num::Tensor;
using num::Var;

/// 1 for real eigenpairs, 0 for padded ones (zero eigenvalue with an all-zero
/// eigenvector column), capped at the cache's pad count.
inline std::vector<double> spectral_mask(const SpectralCache& cache) {
  const std::size_t n = cache.num_nodes(), d = cache.dim();
  std::vector<double> mask(d, 1.0);
  std::size_t padded = 0;
  for (std::size_t j = 0; j < d && padded < cache.pad; ++j) {
    if (cache.eigenvalues[j] != 0.0) continue;
    bool zero = true;
    for (std::size_t u = 0; u < n && zero; ++u) zero = cache.P(u, j) == 0.0;
    if (zero) {
      mask[j] = 0.0;
      ++padded;
    }
  }
  return mask;
}

template <std::floating_point Real>
Tensor<Real> mask_column(const std::vector<double>& mask) {
  Tensor<Real> t({mask.size(), 1});
  for (std::size_t j = 0; j < mask.size(); ++j) t[j] = static_cast<Real>(mask[j]);
  return t;
}

/// Plain linear map x W^T + b over rows of x.
template <std::floating_point Real>
Var<Real> linear(Var<Real> x, Var<Real> w, Var<Real> b) {
  return num::add(num::contract("ij,kj->ik", x, w), b);
}

template <std::floating_point Real>
Var<Real> linear(Var<Real> x, Var<Real> w) {
  return num::contract("ij,kj->ik", x, w);
}

/// Phi matrix (d x m); column i is phi_i applied to the eigenvalue vector.
/// Power mode: lambda_j^{s_i} (0^0 = 1). Setagg mode: a per-eigenvalue MLP plus
/// a pooled MLP over the real eigenvalues. Padded rows are zeroed.
template <std::floating_point Real>
Var<Real> phi_eval(Tape<Real>& tape, const LayerConfig& c, const std::vector<double>& lambda,
                   const std::vector<double>& mask, const ParamView<Real>& view) {
  const std::size_t d = lambda.size(), m = c.m;
  require(mask.size() == d, ErrorKind::ShapeMismatch, "phi_eval mask length");
  if (c.phi.mode == PhiMode::Power) {
    const auto s = c.power_exponents();
    Tensor<Real> phi({d, m});
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        phi(j, i) = static_cast<Real>(mask[j] * std::pow(lambda[j], static_cast<double>(s[i])));
      }
    }
    return tape.constant(std::move(phi));
  }
  Tensor<Real> lam({d, 1});
  for (std::size_t j = 0; j < d; ++j) lam[j] = static_cast<Real>(lambda[j]);
  const auto lam_col = tape.constant(std::move(lam));
  const auto mcol = tape.constant(mask_column<Real>(mask));
  const auto act = unary_of(c.phi.act);
  auto mlp = [&](const ParamView<Real>& p) {
    const auto hidden = num::unary(act, num::add(num::mul(lam_col, p("w1")), p("b1")));
    return num::add(num::contract("ij,jk->ik", hidden, p("w2")), p("b2"));
  };
  const auto rho = mlp(view.sub("rho"));
  auto pooled = num::reduce(num::Reduce::Sum, num::mul(mlp(view.sub("pool")), mcol), 0);
  if (c.phi.pool == Pooling::Mean) {
    double real = 0;
    for (double v : mask) real += v;
    pooled = num::scale(pooled, static_cast<Real>(real > 0 ? 1.0 / real : 0.0));
  }
  return num::mul(num::add(rho, pooled), mcol);
}

/// A[u,:,i] = Phi[:,i] * (W x_u), shape n x d x m.
template <std::floating_point Real>
Var<Real> encode_A(Var<Real> wx, Var<Real> phi) {
  require(wx.rank() == 2 && phi.rank() == 2 && wx.dim(1) == phi.dim(0), ErrorKind::ShapeMismatch,
          "encode_A: W x has shape " + num::shape_string(wx.shape()) + ", phi " + num::shape_string(phi.shape()));
  return num::contract("ud,dm->udm", wx, phi);
}

/// C[u,:,i] = Phi[:,i] * p_u.
template <std::floating_point Real>
Var<Real> encode_C(Var<Real> p, Var<Real> phi) {
  require(p.rank() == 2 && phi.rank() == 2 && p.dim(1) == phi.dim(0), ErrorKind::ShapeMismatch,
          "encode_C: P has shape " + num::shape_string(p.shape()) + ", phi " + num::shape_string(phi.shape()));
  return num::contract("ud,dm->udm", p, phi);
}

/// Row map of B (plain or two-layer) applied to every d x m node slice.
template <std::floating_point Real>
Var<Real> apply_B(const LayerConfig& c, const ParamView<Real>& g, Var<Real> x) {
  auto y = num::contract("ld,udm->ulm", g("B"), x);
  if (c.wb == WBMode::Nonlinear) y = num::contract("ld,udm->ulm", g("B2"), num::unary(unary_of(c.wb_act), y));
  return y;
}

/// a[u] = B (A[u] (+) C[u]), shape n x l x m.
template <std::floating_point Real>
Var<Real> embed_a(const LayerConfig& c, const ParamView<Real>& g, Var<Real> A, Var<Real> C) {
  require(A.shape() == C.shape(), ErrorKind::ShapeMismatch,
          "embed_a: A " + num::shape_string(A.shape()) + " vs C " + num::shape_string(C.shape()));
  return apply_B(c, g, c.agg == Agg::Mul ? num::mul(A, C) : num::add(A, C));
}

/// Per-node combination S (n x l). T1-T3 use a and abar = sum_v a_v; T4 uses
/// BA = B A and C through moment tensors so the cost stays linear in n.
template <std::floating_point Real>
Var<Real> inner_combine(const LayerConfig& c, Var<Real> a, Var<Real> BA, Var<Real> C) {
  auto& tape = *(a.tape ? a.tape : BA.tape);
  switch (c.inner) {
    case InnerType::T1: {
      const auto abar = num::reduce(num::Reduce::Sum, a, 0);
      return num::contract("ulm,lm->ul", a, abar);
    }
    case InnerType::T2: {
      require(a.dim(1) == a.dim(2), ErrorKind::TypeConstraintViolation, "T2 needs m = l");
      const auto abar = num::reduce(num::Reduce::Sum, a, 0);
      return num::contract("ulm,lm->um", a, abar);
    }
    case InnerType::T3: {
      const auto abar = num::reduce(num::Reduce::Sum, a, 0);
      const auto s = num::contract("ulm,lm->u", a, abar);
      return num::contract("u,l->ul", s, tape.constant(Tensor<Real>({a.dim(1)}, Real{1})));
    }
    case InnerType::T4: {
      if (c.t4_second == InnerType::T2) {
        require(BA.dim(1) == C.dim(2), ErrorKind::TypeConstraintViolation, "T4 with a T2 second product needs m = l");
        const auto mom = num::contract("vki,vjk->kij", BA, C);
        const auto r = num::contract("uki,kij->ukj", BA, mom);
        return num::contract("ukj,ujk->uk", r, C);
      }
      const auto mom = num::contract("vki,vjq->kijq", BA, C);
      const auto r = num::contract("ujq,kijq->uki", C, mom);
      return num::contract("ulm,ulm->ul", BA, r);
    }
  }
  fail(ErrorKind::TypeConstraintViolation, "unknown inner type");
}

/// Gate z = sigmoid(Linear(x)) and candidate h~ = Linear(x); NLP inserts an
/// activation and a second affine map.
template <std::floating_point Real>
std::pair<Var<Real>, Var<Real>> gate(const LayerConfig& c, const ParamView<Real>& g, Var<Real> x) {
  auto proj = [&](const char* name) {
    const auto p = g.sub(name);
    auto y = linear(x, p("W"), p("b"));
    if (c.gate == GateMode::NLP) {
      const auto p2 = g.sub(std::string(name) + "2");
      y = linear(num::unary(unary_of(c.gate_act), y), p2("W"), p2("b"));
    }
    return y;
  };
  return {num::sigmoid(proj("z")), proj("h")};
}

/// Intermediate values of one layer, kept for tests and probes.
template <std::floating_point Real>
struct GmnTrace {
  Var<Real> phi, A, C, a, BA, S, z, htilde, H;
};

/// One GMN layer. Base form H[u] = S[u] * z_u * h~_u; with the self-term,
/// H[u] = z_u * h~_u * (beta S[u] + (2 - beta) <W_s1 C_u, W_s2 C_u> 1_l) and
/// beta = 2 sigmoid(beta_raw).
template <std::floating_point Real>
GmnTrace<Real> gmn_trace(const SpectralCache& cache, Var<Real> x, const ParamView<Real>& g, const LayerConfig& c) {
  auto& tape = *x.tape;
  require(x.rank() == 2 && x.dim(0) == cache.num_nodes() && x.dim(1) == c.l, ErrorKind::ShapeMismatch,
          "gmn input " + num::shape_string(x.shape()) + " for a cache of " + std::to_string(cache.num_nodes()) +
              " nodes and l=" + std::to_string(c.l));
  require(cache.dim() == c.d, ErrorKind::ShapeMismatch,
          "cache has d=" + std::to_string(cache.dim()) + ", config d=" + std::to_string(c.d));
  const auto mask = spectral_mask(cache);
  GmnTrace<Real> t;
  t.phi = phi_eval(tape, c, cache.eigenvalues, mask, g.sub("phi"));
  Var<Real> phi_c = t.phi;
  if (c.phi_c == PhiSharing::Separate) phi_c = phi_eval(tape, c, cache.eigenvalues, mask, g.sub("phic"));
  if (c.phi_c == PhiSharing::Zero) phi_c = tape.constant(Tensor<Real>({c.d, c.m}));

  auto wx = linear(x, g("W"));
  if (c.wb == WBMode::Nonlinear) wx = linear(num::unary(unary_of(c.wb_act), wx), g("W2"));
  const auto p = tape.constant(cache.P.template cast<Real>());
  t.A = encode_A(wx, t.phi);
  t.C = encode_C(p, phi_c);
  if (c.inner == InnerType::T4) {
    t.BA = apply_B(c, g, t.A);
  } else {
    t.a = embed_a(c, g, t.A, t.C);
  }
  t.S = inner_combine(c, t.a, t.BA, t.C);
  std::tie(t.z, t.htilde) = gate(c, g, x);
  const auto zh = num::mul(t.z, t.htilde);
  if (!c.self_term) {
    t.H = num::mul(t.S, zh);
    return t;
  }
  const auto beta = num::scale(num::sigmoid(g("beta_raw")), Real{2});
  const auto c1 = num::contract("ld,udm->ulm", g("Ws1"), t.C);
  const auto c2 = num::contract("ld,udm->ulm", g("Ws2"), t.C);
  const auto q = num::reshape(num::contract("ulm,ulm->u", c1, c2), num::Shape{x.dim(0), 1});
  const auto two_minus_beta = num::sub(tape.constant(Tensor<Real>::scalar(Real{2})), beta);
  const auto inner = num::add(num::mul(beta, t.S), num::mul(two_minus_beta, q));
  t.H = num::mul(inner, zh);
  return t;
}

template <std::floating_point Real>
Var<Real> gmn_forward(const SpectralCache& cache, Var<Real> x, const ParamView<Real>& g, const LayerConfig& c) {
  return gmn_trace(cache, x, g, c).H;
}

}  // namespace gmn
