// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/tape.hpp"
#include "gmn/tensor.hpp"

namespace gmn::num {

/// Labeled-axis contraction "ab,bc->ac". Every label names one axis; labels
/// shared by both operands and absent from the output are summed.
struct ContractSpec {
  std::string a;
  std::string b;
  std::string out;

  std::string str() const { return a + "," + b + "->" + out; }
};

inline ContractSpec parse_contract(std::string_view spec) {
  const auto comma = spec.find(',');
  const auto arrow = spec.find("->");
  require(comma != std::string_view::npos && arrow != std::string_view::npos && comma < arrow,
          ErrorKind::UnsupportedSpec, "malformed contraction '" + std::string(spec) + "'");
  ContractSpec s{std::string(spec.substr(0, comma)), std::string(spec.substr(comma + 1, arrow - comma - 1)),
                 std::string(spec.substr(arrow + 2))};
  for (const auto* part : {&s.a, &s.b, &s.out}) {
    std::set<char> seen;
    for (char c : *part) {
      require(c >= 'a' && c <= 'z', ErrorKind::UnsupportedSpec, "labels must be lowercase letters: " + std::string(spec));
      require(seen.insert(c).second, ErrorKind::UnsupportedSpec, "repeated label within an operand: " + std::string(spec));
    }
  }
  return s;
}

/// Relabels letters in order of first appearance, so "ud,dm->udm" and
/// "ab,bc->abc" share a normal form.
inline std::string normalize_contract(const ContractSpec& s) {
  std::array<char, 26> map{};
  char next = 'a';
  auto relabel = [&](const std::string& part) {
    std::string out;
    for (char c : part) {
      auto& m = map[static_cast<std::size_t>(c - 'a')];
      if (!m) m = next++;
      out.push_back(m);
    }
    return out;
  };
  const auto a = relabel(s.a);
  const auto b = relabel(s.b);
  const auto o = relabel(s.out);
  return a + "," + b + "->" + o;
}

/// Normal forms of the supported contractions: matrix products, matrix-vector,
/// node-batched encodings, row/column/full inner products and the moment
/// tensor products.
inline const std::set<std::string>& contract_whitelist() {
  static const std::set<std::string> whitelist = [] {
    std::set<std::string> w;
    for (const char* spec : {
             "ij,jk->ik",        // matrix product
             "ij,kj->ik",        // X W^T
             "ji,jk->ik",        // X^T Y
             "ij,j->i",          // matrix-vector
             "j,jk->k",          // vector-matrix
             "i,j->ij",          // outer product
             "ij,ij->",          // full inner product
             "i,i->",            // vector dot
             "ij,ij->i",         // row-wise inner product
             "ud,dm->udm",       // per-node encoding against the phi matrix
             "ld,udm->ulm",      // left multiply of node tensors
             "ulm,lm->ul",       // contract the m axis against a shared matrix
             "ulm,lm->um",       // contract the l axis against a shared matrix
             "ulm,lm->u",        // full per-node inner product
             "ulm,ulm->ul",      // row-wise inner product per node
             "ulm,ulm->um",      // column-wise inner product per node
             "ulm,ulm->u",       // full inner product per node
             "u,l->ul",          // broadcast a node scalar over channels
             "ul,l->u",          // node-wise dot with a shared vector
             "ud,de->ue",        // node features times a matrix
             "vki,vjq->kijq",    // moment tensor (sum over nodes of outer products)
             "ujq,kijq->uki",    // apply the moment tensor
             "vki,vjk->kij",     // moment for a square second product
             "uki,kij->ukj",     // apply it
             "ukj,ujk->uk",      // finish the square second product
             "ulm,um->ul",       // per-node matrix-vector
             "uij,ujk->uik",     // per-node matrix product
         }) {
      w.insert(normalize_contract(parse_contract(spec)));
    }
    return w;
  }();
  return whitelist;
}

namespace detail {

/// Copies `t` with axes reordered so that output axis i is input axis perm[i].
/// Axes that stay adjacent are fused; a swap of two fused groups (with an
/// optional leading batch and trailing contiguous block) is copied in tiles.
template <std::floating_point Real>
Tensor<Real> transpose_axes(const Tensor<Real>& t, const std::vector<std::size_t>& perm) {
  const std::size_t r = t.rank();
  bool identity = true;
  for (std::size_t i = 0; i < r; ++i) identity = identity && perm[i] == i;
  if (identity) return t;
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = t.dim(perm[i]);
  Tensor<Real> out(out_shape);
  const auto src = t.data();
  auto dst = out.data();
  if (dst.empty()) return out;

  // runs of input axes that remain consecutive in the output, in output order
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < r; ++i) {
    if (!runs.empty() && runs.back().second == perm[i]) ++runs.back().second;
    else runs.emplace_back(perm[i], perm[i] + 1);
  }
  auto run_size = [&](const std::pair<std::size_t, std::size_t>& run) {
    std::size_t z = 1;
    for (std::size_t ax = run.first; ax < run.second; ++ax) z *= t.dim(ax);
    return z;
  };
  const std::size_t fr = runs.size();
  const bool pre = runs.front().first == 0;
  const bool suf = fr > 1 && runs.back().second == r;
  if (fr == static_cast<std::size_t>(pre) + static_cast<std::size_t>(suf) + 2) {
    const auto& ob = runs[pre ? 1 : 0];   // first swapped group in the output
    const auto& oa = runs[pre ? 2 : 1];   // second swapped group in the output
    if (oa.second == ob.first) {
      const std::size_t P = pre ? run_size(runs.front()) : 1;
      const std::size_t C = suf ? run_size(runs.back()) : 1;
      const std::size_t A = run_size(oa), B = run_size(ob);
      constexpr std::size_t T = 16;
      for (std::size_t p = 0; p < P; ++p) {
        const Real* sp = src.data() + p * A * B * C;
        Real* dp = dst.data() + p * A * B * C;
        for (std::size_t a0 = 0; a0 < A; a0 += T) {
          for (std::size_t b0 = 0; b0 < B; b0 += T) {
            const std::size_t a1 = std::min(A, a0 + T), b1 = std::min(B, b0 + T);
            for (std::size_t b = b0; b < b1; ++b) {
              for (std::size_t a = a0; a < a1; ++a) {
                std::copy_n(sp + (a * B + b) * C, C, dp + (b * A + a) * C);
              }
            }
          }
        }
      }
      return out;
    }
  }

  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * t.dim(i);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) stride[i] = in_stride[perm[i]];
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k] = src[off];
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < out_shape[ax]) {
        off += stride[ax];
        break;
      }
      off -= stride[ax] * (idx[ax] - 1);
      idx[ax] = 0;
    }
  }
  return out;
}

struct Plan {
  std::string batch, m, n, k;  // label groups
  std::size_t nb = 1, nm = 1, nn = 1, nk = 1;
  Shape out_shape;
};

template <std::floating_point Real>
Plan plan_contract(const ContractSpec& s, const Tensor<Real>& a, const Tensor<Real>& b) {
  require(a.rank() == s.a.size() && b.rank() == s.b.size(), ErrorKind::ShapeMismatch,
          "operand ranks do not match '" + s.str() + "'");
  constexpr std::size_t unbound = ~std::size_t{0};
  std::array<std::size_t, 26> dims;
  dims.fill(unbound);
  auto bind = [&](const std::string& labels, const Tensor<Real>& t) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& d = dims[static_cast<std::size_t>(labels[i] - 'a')];
      require(d == unbound || d == t.dim(i), ErrorKind::ShapeMismatch,
              std::string("label '") + labels[i] + "' bound to different sizes in '" + s.str() + "': " +
                  shape_string(a.shape()) + " vs " + shape_string(b.shape()));
      d = t.dim(i);
    }
  };
  bind(s.a, a);
  bind(s.b, b);
  Plan p;
  auto in = [](const std::string& str, char c) { return str.find(c) != std::string::npos; };
  for (char c : s.out) {
    require(in(s.a, c) || in(s.b, c), ErrorKind::UnsupportedSpec, "output label missing from operands: " + s.str());
  }
  for (char c : s.a) {
    const bool ib = in(s.b, c), io = in(s.out, c);
    require(ib || io, ErrorKind::UnsupportedSpec, "label summed within one operand: " + s.str());
    if (ib && io) p.batch.push_back(c);
    else if (io) p.m.push_back(c);
    else p.k.push_back(c);
  }
  for (char c : s.b) {
    const bool ia = in(s.a, c), io = in(s.out, c);
    require(ia || io, ErrorKind::UnsupportedSpec, "label summed within one operand: " + s.str());
    if (!ia) p.n.push_back(c);
  }
  auto size_of = [&](const std::string& labels) {
    std::size_t z = 1;
    for (char c : labels) z *= dims[static_cast<std::size_t>(c - 'a')];
    return z;
  };
  p.nb = size_of(p.batch);
  p.nm = size_of(p.m);
  p.nn = size_of(p.n);
  p.nk = size_of(p.k);
  for (char c : s.out) p.out_shape.push_back(dims[static_cast<std::size_t>(c - 'a')]);
  return p;
}

inline std::vector<std::size_t> axis_order(const std::string& from, const std::string& to) {
  std::vector<std::size_t> perm;
  for (char c : to) perm.push_back(from.find(c));
  return perm;
}

/// A shared left matrix applied to every slice of `b` along leading labels
/// that only `b` and the output carry (e.g. ld,udm->ulm): one small product
/// per slice, with no transposes.
template <std::floating_point Real>
std::optional<Tensor<Real>> shared_left_product(const ContractSpec& s, const Plan& p, const Tensor<Real>& a,
                                                const Tensor<Real>& b) {
  if (!p.batch.empty() || p.m.empty() || p.k.empty()) return std::nullopt;
  const bool a_direct = s.a == p.m + p.k;
  if (!a_direct && s.a != p.k + p.m) return std::nullopt;
  for (std::size_t q = 1; q < p.n.size(); ++q) {
    const std::string lead = p.n.substr(0, q), rest = p.n.substr(q);
    if (s.b != lead + p.k + rest || s.out != lead + p.m + rest) continue;
    std::size_t slices = 1;
    for (std::size_t i = 0; i < q; ++i) slices *= b.dim(i);
    const std::size_t R = p.nn / slices;
    Tensor<Real> c(p.out_shape);
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto M = static_cast<Eigen::Index>(p.nm);
    const auto K = static_cast<Eigen::Index>(p.nk);
    const auto N = static_cast<Eigen::Index>(R);
    const Mat left = a_direct ? Mat(Eigen::Map<const Mat>(a.data().data(), M, K))
                              : Mat(Eigen::Map<const Mat>(a.data().data(), K, M).transpose());
    for (std::size_t i = 0; i < slices; ++i) {
      Eigen::Map<Mat>(c.data().data() + i * p.nm * R, M, N).noalias() =
          left.lazyProduct(Eigen::Map<const Mat>(b.data().data() + i * p.nk * R, K, N));
    }
    add_flops(2ULL * p.nm * p.nn * p.nk);
    return c;
  }
  return std::nullopt;
}

/// Evaluates any valid spec (no whitelist check) as batched GEMM. Operands
/// already laid out as a block or its transpose are used in place; others
/// are transposed into GEMM layout first.
template <std::floating_point Real>
Tensor<Real> contract_eval(const ContractSpec& s, const Tensor<Real>& a, const Tensor<Real>& b) {
  const Plan p = plan_contract(s, a, b);
  if (auto c = shared_left_product(s, p, a, b)) return std::move(*c);
  const bool a_trans = s.a != p.batch + p.m + p.k && s.a == p.batch + p.k + p.m;
  const bool b_trans = s.b != p.batch + p.k + p.n && s.b == p.batch + p.n + p.k;
  Tensor<Real> a_copy, b_copy;
  const Tensor<Real>* at = &a;
  const Tensor<Real>* bt = &b;
  if (!a_trans && s.a != p.batch + p.m + p.k) {
    a_copy = transpose_axes(a, axis_order(s.a, p.batch + p.m + p.k));
    at = &a_copy;
  }
  if (!b_trans && s.b != p.batch + p.k + p.n) {
    b_copy = transpose_axes(b, axis_order(s.b, p.batch + p.k + p.n));
    bt = &b_copy;
  }
  const std::string natural = p.batch + p.m + p.n;
  const bool c_direct = s.out == natural;
  const bool c_trans = !c_direct && s.out == p.batch + p.n + p.m;
  Shape c_shape;
  if (c_direct || c_trans) {
    c_shape = p.out_shape;
  } else {
    for (char ch : natural) c_shape.push_back(p.out_shape[s.out.find(ch)]);
  }
  Tensor<Real> c(c_shape);
  using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto M = static_cast<Eigen::Index>(p.nm);
  const auto N = static_cast<Eigen::Index>(p.nn);
  const auto K = static_cast<Eigen::Index>(p.nk);
  for (std::size_t bi = 0; bi < p.nb; ++bi) {
    const Real* ap = at->data().data() + bi * p.nm * p.nk;
    const Real* bp = bt->data().data() + bi * p.nk * p.nn;
    Real* cp = c.data().data() + bi * p.nm * p.nn;
    if (p.nm == 1 && p.nn == 1) {
      Real acc = 0;
      for (std::size_t i = 0; i < p.nk; ++i) acc += ap[i] * bp[i];
      cp[0] = acc;
    } else if (p.nk == 0) {
      std::fill(cp, cp + p.nm * p.nn, Real{0});
    } else {
      auto gemm = [&](const auto& am, const auto& bm) {
        if (c_trans) Eigen::Map<Mat>(cp, N, M).noalias() = bm.transpose() * am.transpose();
        else Eigen::Map<Mat>(cp, M, N).noalias() = am * bm;
      };
      const Eigen::Map<const Mat> a_kxm(ap, K, M), a_mxk(ap, M, K);
      const Eigen::Map<const Mat> b_nxk(bp, N, K), b_kxn(bp, K, N);
      if (a_trans && b_trans) gemm(a_kxm.transpose(), b_nxk.transpose());
      else if (a_trans) gemm(a_kxm.transpose(), b_kxn);
      else if (b_trans) gemm(a_mxk, b_nxk.transpose());
      else gemm(a_mxk, b_kxn);
    }
  }
  add_flops(2ULL * p.nb * p.nm * p.nn * p.nk);
  if (c_direct || c_trans) return c;
  return transpose_axes(c, axis_order(natural, s.out));
}

}  // namespace detail

/// Whitelisted contraction on plain tensors.
template <std::floating_point Real>
Tensor<Real> contract(std::string_view spec, const Tensor<Real>& a, const Tensor<Real>& b) {
  const ContractSpec s = parse_contract(spec);
  require(contract_whitelist().count(normalize_contract(s)) > 0, ErrorKind::UnsupportedSpec,
          "contraction '" + std::string(spec) + "' is not supported");
  return detail::contract_eval(s, a, b);
}

/// Recorded contraction. The gradient of each operand is itself a
/// contraction of the output gradient with the other operand.
template <std::floating_point Real>
Var<Real> contract(std::string_view spec, Var<Real> a, Var<Real> b) {
  const ContractSpec s = parse_contract(spec);
  require(contract_whitelist().count(normalize_contract(s)) > 0, ErrorKind::UnsupportedSpec,
          "contraction '" + std::string(spec) + "' is not supported");
  require(a.tape == b.tape, ErrorKind::DetachedOutput, "operands live on different tapes");
  Tensor<Real> value = detail::contract_eval(s, a.value(), b.value());
  Tape<Real>* tape = a.tape;
  const std::size_t ia = a.id, ib = b.id;
  return tape->record("contract:" + s.str(), std::move(value), {ia, ib},
                      [tape, ia, ib, s](const Tensor<Real>& g) {
                        std::vector<Tensor<Real>> out;
                        const bool need_a = tape->node(ia).needs_grad;
                        const bool need_b = tape->node(ib).needs_grad;
                        out.push_back(need_a ? detail::contract_eval(ContractSpec{s.out, s.b, s.a}, g, tape->value(ib))
                                             : Tensor<Real>());
                        out.push_back(need_b ? detail::contract_eval(ContractSpec{s.a, s.out, s.b}, tape->value(ia), g)
                                             : Tensor<Real>());
                        return out;
                      });
}

}  // namespace gmn::num
