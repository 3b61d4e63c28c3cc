// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gmn/contract.hpp"
#include "gmn/error.hpp"
#include "gmn/rng.hpp"
#include "gmn/sparse.hpp"
#include "gmn/tape.hpp"
#include "gmn/tensor.hpp"

namespace gmn::num {

// ---------------------------------------------------------------------------
// Broadcasting. Shapes align on the right; an axis broadcasts when it is
// missing or has size 1 (numpy rules).

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    require(da == db || da == 1 || db == 1, ErrorKind::ShapeMismatch,
            "cannot broadcast " + shape_string(a) + " with " + shape_string(b));
    out[i] = da == 1 ? db : da;
  }
  return out;
}

/// Element strides of `in` viewed with shape `out` (0 on broadcast axes).
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + (r - in.size());
    strides[oi] = in[i] == 1 && out[oi] != 1 ? 0 : s;
    s *= in[i];
  }
  return strides;
}

/// Calls f(k, ia, ib) for every output element k with the matching operand offsets.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t total = shape_size(out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k < total; ++k) {
    f(k, ia, ib);
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < out[ax]) {
        ia += sa[ax];
        ib += sb[ax];
        break;
      }
      ia -= sa[ax] * (idx[ax] - 1);
      ib -= sb[ax] * (idx[ax] - 1);
      idx[ax] = 0;
    }
  }
}

/// Sums `g` (shape `out`) down to `target`, undoing a broadcast.
template <std::floating_point Real>
Tensor<Real> unbroadcast(const Tensor<Real>& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor<Real> out(target);
  const auto st = broadcast_strides(target, g.shape());
  const std::vector<std::size_t> zero(g.rank(), 0);
  auto dst = out.data();
  const auto src = g.data();
  for_each_broadcast(g.shape(), st, zero, [&](std::size_t k, std::size_t it, std::size_t) { dst[it] += src[k]; });
  return out;
}

enum class BinOp { Add, Sub, Mul };

template <std::floating_point Real>
Tensor<Real> binary(BinOp op, const Tensor<Real>& a, const Tensor<Real>& b) {
  auto apply = [op](Real x, Real y) { return op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y; };
  if (a.shape() == b.shape()) {
    Tensor<Real> out(a.shape());
    auto o = out.data();
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = apply(x[i], y[i]);
    add_flops(o.size());
    return out;
  }
  const Shape shape = broadcast_shape(a.shape(), b.shape());
  Tensor<Real> out(shape);
  auto o = out.data();
  const auto x = a.data(), y = b.data();
  for_each_broadcast(shape, broadcast_strides(a.shape(), shape), broadcast_strides(b.shape(), shape),
                     [&](std::size_t k, std::size_t ia, std::size_t ib) { o[k] = apply(x[ia], y[ib]); });
  add_flops(o.size());
  return out;
}

}  // namespace detail

template <std::floating_point Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  require(a.tape == b.tape, ErrorKind::DetachedOutput, "operands live on different tapes");
  auto* t = a.tape;
  const Shape sa = a.shape(), sb = b.shape();
  return t->record("add", detail::binary(detail::BinOp::Add, a.value(), b.value()), {a.id, b.id},
                   [sa, sb](const Tensor<Real>& g) {
                     return std::vector<Tensor<Real>>{detail::unbroadcast(g, sa), detail::unbroadcast(g, sb)};
                   });
}

template <std::floating_point Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  require(a.tape == b.tape, ErrorKind::DetachedOutput, "operands live on different tapes");
  auto* t = a.tape;
  const Shape sa = a.shape(), sb = b.shape();
  return t->record("sub", detail::binary(detail::BinOp::Sub, a.value(), b.value()), {a.id, b.id},
                   [sa, sb](const Tensor<Real>& g) {
                     Tensor<Real> gb = detail::unbroadcast(g, sb);
                     for (auto& v : gb.data()) v = -v;
                     return std::vector<Tensor<Real>>{detail::unbroadcast(g, sa), std::move(gb)};
                   });
}

template <std::floating_point Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  require(a.tape == b.tape, ErrorKind::DetachedOutput, "operands live on different tapes");
  auto* t = a.tape;
  const std::size_t ia = a.id, ib = b.id;
  return t->record("mul", detail::binary(detail::BinOp::Mul, a.value(), b.value()), {ia, ib},
                   [t, ia, ib](const Tensor<Real>& g) {
                     const auto& va = t->value(ia);
                     const auto& vb = t->value(ib);
                     std::vector<Tensor<Real>> out(2);
                     if (t->node(ia).needs_grad)
                       out[0] = detail::unbroadcast(detail::binary(detail::BinOp::Mul, g, vb), va.shape());
                     if (t->node(ib).needs_grad)
                       out[1] = detail::unbroadcast(detail::binary(detail::BinOp::Mul, g, va), vb.shape());
                     return out;
                   });
}

// ---------------------------------------------------------------------------
// Unary elementwise ops.

enum class Unary { Reciprocal, Sigmoid, Relu, Gelu, Silu, Tanh, Abs, Exp, Square };

namespace detail {

template <std::floating_point Real>
Real sigmoid(Real x) {
  // Split by sign so neither branch overflows.
  if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real{1} + e);
}

template <std::floating_point Real>
Real unary_value(Unary op, Real x) {
  switch (op) {
    case Unary::Reciprocal: return Real{1} / x;
    case Unary::Sigmoid: return sigmoid(x);
    case Unary::Relu: return x > 0 ? x : Real{0};
    case Unary::Gelu: return Real{0.5} * x * (Real{1} + std::erf(x / std::numbers::sqrt2_v<Real>));
    case Unary::Silu: return x * sigmoid(x);
    case Unary::Tanh: return std::tanh(x);
    case Unary::Abs: return std::abs(x);
    case Unary::Exp: return std::exp(x);
    case Unary::Square: return x * x;
  }
  return x;
}

template <std::floating_point Real>
Real unary_derivative(Unary op, Real x, Real y) {
  switch (op) {
    case Unary::Reciprocal: return -y * y;
    case Unary::Sigmoid: return y * (Real{1} - y);
    case Unary::Relu: return x > 0 ? Real{1} : Real{0};
    case Unary::Gelu: {
      const Real cdf = Real{0.5} * (Real{1} + std::erf(x / std::numbers::sqrt2_v<Real>));
      const Real pdf = std::exp(Real{-0.5} * x * x) / std::sqrt(Real{2} * std::numbers::pi_v<Real>);
      return cdf + x * pdf;
    }
    case Unary::Silu: {
      const Real s = sigmoid(x);
      return s * (Real{1} + x * (Real{1} - s));
    }
    case Unary::Tanh: return Real{1} - y * y;
    case Unary::Abs: return x > 0 ? Real{1} : x < 0 ? Real{-1} : Real{0};
    case Unary::Exp: return y;
    case Unary::Square: return Real{2} * x;
  }
  return Real{1};
}

inline const char* unary_name(Unary op) {
  switch (op) {
    case Unary::Reciprocal: return "reciprocal";
    case Unary::Sigmoid: return "sigmoid";
    case Unary::Relu: return "relu";
    case Unary::Gelu: return "gelu";
    case Unary::Silu: return "silu";
    case Unary::Tanh: return "tanh";
    case Unary::Abs: return "abs";
    case Unary::Exp: return "exp";
    case Unary::Square: return "square";
  }
  return "unary";
}

}  // namespace detail

template <std::floating_point Real>
Tensor<Real> apply_unary(Unary op, const Tensor<Real>& x) {
  if (op == Unary::Reciprocal && debug_checks()) {
    for (Real v : x.data()) require(v != 0, ErrorKind::DivByZero, "reciprocal of zero");
  }
  Tensor<Real> y(x.shape());
  auto o = y.data();
  const auto in = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = detail::unary_value(op, in[i]);
  add_flops(o.size());
  return y;
}

template <std::floating_point Real>
Var<Real> unary(Unary op, Var<Real> x) {
  auto* t = x.tape;
  const std::size_t ix = x.id;
  Tensor<Real> y = apply_unary(op, x.value());
  const std::size_t iy = t->size();
  return t->record(detail::unary_name(op), std::move(y), {ix}, [t, ix, iy, op](const Tensor<Real>& g) {
    const auto& xv = t->value(ix);
    const auto& yv = t->value(iy);
    Tensor<Real> gx(xv.shape());
    auto o = gx.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = g[i] * detail::unary_derivative(op, xv[i], yv[i]);
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

template <std::floating_point Real> Var<Real> sigmoid(Var<Real> x) { return unary(Unary::Sigmoid, x); }
template <std::floating_point Real> Var<Real> relu(Var<Real> x) { return unary(Unary::Relu, x); }
template <std::floating_point Real> Var<Real> gelu(Var<Real> x) { return unary(Unary::Gelu, x); }
template <std::floating_point Real> Var<Real> silu(Var<Real> x) { return unary(Unary::Silu, x); }
template <std::floating_point Real> Var<Real> reciprocal(Var<Real> x) { return unary(Unary::Reciprocal, x); }

/// c * x
template <std::floating_point Real>
Var<Real> scale(Var<Real> x, Real c) {
  Tensor<Real> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x.value()[i];
  add_flops(y.size());
  return x.tape->record("scale", std::move(y), {x.id}, [c](const Tensor<Real>& g) {
    Tensor<Real> gx(g.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = c * g[i];
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

/// x + c
template <std::floating_point Real>
Var<Real> shift(Var<Real> x, Real c) {
  Tensor<Real> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.value()[i] + c;
  add_flops(y.size());
  return x.tape->record("shift", std::move(y), {x.id},
                        [](const Tensor<Real>& g) { return std::vector<Tensor<Real>>{g}; });
}

/// Gradient passes where lo < x < hi and is zero on the clipped set.
template <std::floating_point Real>
Var<Real> clamp(Var<Real> x, Real lo, Real hi) {
  require(lo <= hi, ErrorKind::InvalidParams, "clamp needs lo <= hi");
  auto* t = x.tape;
  const std::size_t ix = x.id;
  Tensor<Real> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(x.value()[i], lo, hi);
  add_flops(y.size());
  return t->record("clamp", std::move(y), {ix}, [t, ix, lo, hi](const Tensor<Real>& g) {
    const auto& xv = t->value(ix);
    Tensor<Real> gx(g.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = xv[i] > lo && xv[i] < hi ? g[i] : Real{0};
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

// ---------------------------------------------------------------------------
// Shape ops and reductions.

template <std::floating_point Real>
Var<Real> reshape(Var<Real> x, Shape shape) {
  const Shape original = x.shape();
  return x.tape->record("reshape", x.value().reshaped(std::move(shape)), {x.id}, [original](const Tensor<Real>& g) {
    return std::vector<Tensor<Real>>{g.reshaped(original)};
  });
}

enum class Reduce { Sum, Mean, Max };

namespace detail {

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace detail

/// Reduces one axis away. Max routes gradient to the first maximal entry.
template <std::floating_point Real>
Var<Real> reduce(Reduce op, Var<Real> x, std::size_t axis) {
  require(axis < x.rank(), ErrorKind::AxisError,
          "axis " + std::to_string(axis) + " for tensor of rank " + std::to_string(x.rank()));
  const Shape in_shape = x.shape();
  Shape out_shape = in_shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto sp = detail::split_axis(in_shape, axis);
  require(op != Reduce::Max || sp.len > 0, ErrorKind::AxisError, "max over an empty axis");
  Tensor<Real> y(out_shape);
  std::vector<std::size_t> argmax;
  if (op == Reduce::Max) argmax.assign(y.size(), 0);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t yi = o * sp.inner + i;
      Real acc = op == Reduce::Max ? xv[o * sp.len * sp.inner + i] : Real{0};
      std::size_t best = 0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        const Real v = xv[(o * sp.len + k) * sp.inner + i];
        if (op == Reduce::Max) {
          if (v > acc) acc = v, best = k;
        } else {
          acc += v;
        }
      }
      if (op == Reduce::Mean) acc /= static_cast<Real>(sp.len);
      y[yi] = acc;
      if (op == Reduce::Max) argmax[yi] = best;
    }
  }
  add_flops(xv.size());
  const char* name = op == Reduce::Sum ? "reduce_sum" : op == Reduce::Mean ? "reduce_mean" : "reduce_max";
  return x.tape->record(name, std::move(y), {x.id}, [in_shape, sp, op, argmax](const Tensor<Real>& g) {
    Tensor<Real> gx(in_shape);
    const Real w = op == Reduce::Mean ? Real{1} / static_cast<Real>(sp.len) : Real{1};
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t yi = o * sp.inner + i;
        if (op == Reduce::Max) {
          gx[(o * sp.len + argmax[yi]) * sp.inner + i] = g[yi];
        } else {
          for (std::size_t k = 0; k < sp.len; ++k) gx[(o * sp.len + k) * sp.inner + i] = g[yi] * w;
        }
      }
    }
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

template <std::floating_point Real>
Var<Real> sum_all(Var<Real> x) {
  return reduce(Reduce::Sum, reshape(x, Shape{x.value().size()}), 0);
}

template <std::floating_point Real>
Var<Real> mean_all(Var<Real> x) {
  return reduce(Reduce::Mean, reshape(x, Shape{x.value().size()}), 0);
}

// ---------------------------------------------------------------------------
// Graph ops.

/// out[i] = x[idx[i]] along axis 0.
template <std::floating_point Real>
Var<Real> gather_rows(Var<Real> x, std::vector<std::uint32_t> idx) {
  const Shape in_shape = x.shape();
  require(x.rank() >= 1, ErrorKind::ShapeMismatch, "gather_rows needs rank >= 1");
  const std::size_t stride = shape_size(Shape(in_shape.begin() + 1, in_shape.end()));
  Shape out_shape = in_shape;
  out_shape[0] = idx.size();
  Tensor<Real> y(out_shape);
  const auto src = x.value().data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < in_shape[0], ErrorKind::IndexOutOfRange, "gather index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * stride), stride,
                y.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return x.tape->record("gather_rows", std::move(y), {x.id}, [in_shape, stride, idx](const Tensor<Real>& g) {
    Tensor<Real> gx(in_shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < stride; ++j) gx[idx[i] * stride + j] += g[i * stride + j];
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

/// out[idx[i]] += x[i]; the result has `rows` rows.
template <std::floating_point Real>
Var<Real> scatter_add_rows(Var<Real> x, std::vector<std::uint32_t> idx, std::size_t rows) {
  require(x.rank() >= 1 && x.dim(0) == idx.size(), ErrorKind::ShapeMismatch, "scatter index count mismatch");
  Shape out_shape = x.shape();
  out_shape[0] = rows;
  const std::size_t stride = shape_size(Shape(out_shape.begin() + 1, out_shape.end()));
  Tensor<Real> y(out_shape);
  const auto& xv = x.value();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < rows, ErrorKind::IndexOutOfRange, "scatter index out of range");
    for (std::size_t j = 0; j < stride; ++j) y[idx[i] * stride + j] += xv[i * stride + j];
  }
  add_flops(xv.size());
  const Shape in_shape = x.shape();
  return x.tape->record("scatter_add_rows", std::move(y), {x.id}, [in_shape, stride, idx](const Tensor<Real>& g) {
    Tensor<Real> gx(in_shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < stride; ++j) gx[i * stride + j] = g[idx[i] * stride + j];
    return std::vector<Tensor<Real>>{std::move(gx)};
  });
}

/// S x for a constant sparse matrix S (n x n) and x of shape n x k.
template <std::floating_point Real>
Tensor<Real> spmm(const SparseMatrix& s, const Tensor<Real>& x) {
  require(x.rank() == 2 && x.dim(0) == s.n, ErrorKind::ShapeMismatch, "spmm operand rows do not match");
  const std::size_t k = x.dim(1);
  Tensor<Real> y({s.n, k});
  for (std::size_t r = 0; r < s.n; ++r) {
    Real* out = y.data().data() + r * k;
    for (std::size_t e = s.offsets[r]; e < s.offsets[r + 1]; ++e) {
      const Real w = static_cast<Real>(s.values[e]);
      const Real* in = x.data().data() + static_cast<std::size_t>(s.cols[e]) * k;
      for (std::size_t j = 0; j < k; ++j) out[j] += w * in[j];
    }
  }
  add_flops(2ULL * s.nnz() * k);
  return y;
}

template <std::floating_point Real>
Tensor<Real> spmm_transposed(const SparseMatrix& s, const Tensor<Real>& g) {
  const std::size_t k = g.dim(1);
  Tensor<Real> y({s.n, k});
  for (std::size_t r = 0; r < s.n; ++r) {
    const Real* in = g.data().data() + r * k;
    for (std::size_t e = s.offsets[r]; e < s.offsets[r + 1]; ++e) {
      const Real w = static_cast<Real>(s.values[e]);
      Real* out = y.data().data() + static_cast<std::size_t>(s.cols[e]) * k;
      for (std::size_t j = 0; j < k; ++j) out[j] += w * in[j];
    }
  }
  add_flops(2ULL * s.nnz() * k);
  return y;
}

/// The matrix is captured by pointer and must outlive the tape.
template <std::floating_point Real>
Var<Real> spmm(const SparseMatrix& s, Var<Real> x) {
  const SparseMatrix* sp = &s;
  return x.tape->record("spmm", spmm(s, x.value()), {x.id}, [sp](const Tensor<Real>& g) {
    return std::vector<Tensor<Real>>{spmm_transposed(*sp, g)};
  });
}

/// Row-wise layer normalization of x (rows x l) with gain and bias of length l.
template <std::floating_point Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gain, Var<Real> bias, Real eps = Real{1e-5}) {
  require(x.rank() == 2 && gain.shape() == Shape{x.dim(1)} && bias.shape() == Shape{x.dim(1)},
          ErrorKind::ShapeMismatch, "layer_norm shapes");
  const std::size_t rows = x.dim(0), l = x.dim(1);
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  Tensor<Real> xhat({rows, l});
  std::vector<Real> inv_std(rows);
  Tensor<Real> y({rows, l});
  for (std::size_t r = 0; r < rows; ++r) {
    Real mean = 0;
    for (std::size_t j = 0; j < l; ++j) mean += xv[r * l + j];
    mean /= static_cast<Real>(l);
    Real var = 0;
    for (std::size_t j = 0; j < l; ++j) var += (xv[r * l + j] - mean) * (xv[r * l + j] - mean);
    var /= static_cast<Real>(l);
    inv_std[r] = Real{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < l; ++j) {
      xhat[r * l + j] = (xv[r * l + j] - mean) * inv_std[r];
      y[r * l + j] = xhat[r * l + j] * gv[j] + bv[j];
    }
  }
  add_flops(8ULL * rows * l);
  auto* t = x.tape;
  const std::size_t ig = gain.id;
  return t->record("layer_norm", std::move(y), {x.id, gain.id, bias.id},
                   [t, ig, xhat, inv_std, rows, l](const Tensor<Real>& g) {
                     const auto& gv2 = t->value(ig);
                     Tensor<Real> gx({rows, l}), gg({l}), gb({l});
                     for (std::size_t r = 0; r < rows; ++r) {
                       Real s1 = 0, s2 = 0;
                       for (std::size_t j = 0; j < l; ++j) {
                         const Real dxh = g[r * l + j] * gv2[j];
                         s1 += dxh;
                         s2 += dxh * xhat[r * l + j];
                         gg[j] += g[r * l + j] * xhat[r * l + j];
                         gb[j] += g[r * l + j];
                       }
                       const Real inv_l = Real{1} / static_cast<Real>(l);
                       for (std::size_t j = 0; j < l; ++j) {
                         const Real dxh = g[r * l + j] * gv2[j];
                         gx[r * l + j] = inv_std[r] * (dxh - inv_l * s1 - xhat[r * l + j] * inv_l * s2);
                       }
                     }
                     return std::vector<Tensor<Real>>{std::move(gx), std::move(gg), std::move(gb)};
                   });
}

/// Inverted dropout: entries survive with probability 1 - rate and are scaled
/// by 1 / (1 - rate); rate 1 drops everything. The mask is a pure function of `key`, recorded as a
/// constant so backward reuses it.
template <std::floating_point Real>
Var<Real> dropout(Var<Real> x, double rate, std::uint64_t key, bool training) {
  require(rate >= 0.0 && rate <= 1.0, ErrorKind::InvalidParams, "dropout rate must lie in [0, 1]");
  if (!training || rate == 0.0) return x;
  Tensor<Real> mask(x.shape());
  const Real keep_scale = rate < 1.0 ? static_cast<Real>(1.0 / (1.0 - rate)) : Real{0};
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = counter_uniform(key, i) >= rate ? keep_scale : Real{0};
  return mul(x, x.tape->constant(std::move(mask)));
}

// ---------------------------------------------------------------------------
// Losses.

/// Mean softmax cross-entropy over rows of logits (rows x classes) against
/// integer targets, via log-sum-exp.
template <std::floating_point Real>
Var<Real> cross_entropy(Var<Real> logits, std::vector<std::uint32_t> targets) {
  require(logits.rank() == 2 && logits.dim(0) == targets.size(), ErrorKind::ShapeMismatch,
          "cross_entropy needs one target per row");
  const std::size_t rows = logits.dim(0), c = logits.dim(1);
  const auto& lv = logits.value();
  Tensor<Real> probs({rows, c});
  Real total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    require(targets[r] < c, ErrorKind::IndexOutOfRange, "target class out of range");
    Real mx = lv[r * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv[r * c + j]);
    Real z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(lv[r * c + j] - mx);
    const Real lse = mx + std::log(z);
    total += lse - lv[r * c + targets[r]];
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(lv[r * c + j] - lse);
  }
  const Real n = static_cast<Real>(std::max<std::size_t>(rows, 1));
  add_flops(4ULL * rows * c);
  return logits.tape->record("cross_entropy", Tensor<Real>::scalar(total / n), {logits.id},
                             [probs, targets, rows, c, n](const Tensor<Real>& g) {
                               Tensor<Real> gl = probs;
                               for (std::size_t r = 0; r < rows; ++r) gl[r * c + targets[r]] -= Real{1};
                               for (auto& v : gl.data()) v *= g.item() / n;
                               return std::vector<Tensor<Real>>{std::move(gl)};
                             });
}

/// Mean binary cross-entropy on logits, computed in the overflow-free form.
template <std::floating_point Real>
Var<Real> bce_with_logits(Var<Real> logits, std::vector<Real> targets) {
  require(logits.value().size() == targets.size(), ErrorKind::ShapeMismatch, "bce needs one target per logit");
  const auto& lv = logits.value();
  Real total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Real x = lv[i];
    total += std::max(x, Real{0}) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const Real n = static_cast<Real>(std::max<std::size_t>(targets.size(), 1));
  const Shape shape = logits.shape();
  auto* t = logits.tape;
  const std::size_t il = logits.id;
  return t->record("bce_with_logits", Tensor<Real>::scalar(total / n), {il},
                   [t, il, targets, n](const Tensor<Real>& g) {
                     const auto& x = t->value(il);
                     Tensor<Real> gl(x.shape());
                     for (std::size_t i = 0; i < gl.size(); ++i)
                       gl[i] = (detail::sigmoid(x[i]) - targets[i]) * g.item() / n;
                     return std::vector<Tensor<Real>>{std::move(gl)};
                   });
}

/// Mean absolute error, the usual regression loss for molecular targets.
template <std::floating_point Real>
Var<Real> l1_loss(Var<Real> pred, Var<Real> target) {
  return mean_all(unary(Unary::Abs, sub(pred, target)));
}

template <std::floating_point Real>
Var<Real> mse_loss(Var<Real> pred, Var<Real> target) {
  return mean_all(unary(Unary::Square, sub(pred, target)));
}

}  // namespace gmn::num
