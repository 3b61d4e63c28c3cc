// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "gmn/fd_check.hpp"
#include "gmn/ops.hpp"

namespace gmn::num {
namespace {

using T = Tensor<double>;
using V = Var<double>;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected gmn::Error";
  return ErrorKind::IoError;
}

T random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  T t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

TEST(Ew, Examples) {
  Tape<double> tape;
  auto x = tape.leaf(T::scalar(0.0));
  EXPECT_DOUBLE_EQ(sigmoid(x).value().item(), 0.5);
  auto a = tape.leaf(T({2}, {1, 2}));
  auto b = tape.leaf(T({2}, {3, 4}));
  EXPECT_EQ(mul(a, b).value(), T({2}, {3, 8}));
}

TEST(Ew, ReciprocalOfZero) {
  {
    Tape<double> tape;
    auto r = reciprocal(tape.leaf(T({1}, {0.0})));
    EXPECT_TRUE(std::isinf(r.value()[0]));
  }
  DebugScope debug;
  Tape<double> tape;
  auto z = tape.leaf(T({1}, {0.0}));
  EXPECT_EQ(kind_of([&] { reciprocal(z); }), ErrorKind::DivByZero);
}

TEST(Ew, DebugTrapsNonFinite) {
  DebugScope debug;
  Tape<double> tape;
  auto x = tape.leaf(T({1}, {800.0}));
  EXPECT_EQ(kind_of([&] { unary(Unary::Exp, x); }), ErrorKind::NonFinite);
}

TEST(Ew, BroadcastShapes) {
  Tape<double> tape;
  auto m = tape.leaf(T({2, 3}, {1, 2, 3, 4, 5, 6}));
  auto row = tape.leaf(T({3}, {10, 20, 30}));
  auto col = tape.leaf(T({2, 1}, {100, 200}));
  auto s = tape.leaf(T::scalar(2.0));
  EXPECT_EQ(add(m, row).value(), T({2, 3}, {11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(add(m, col).value(), T({2, 3}, {101, 102, 103, 204, 205, 206}));
  EXPECT_EQ(mul(s, m).value(), T({2, 3}, {2, 4, 6, 8, 10, 12}));
  auto bad = tape.leaf(T({2}, {1, 2}));
  EXPECT_EQ(kind_of([&] { add(m, bad); }), ErrorKind::ShapeMismatch);
}

TEST(Contract, Examples) {
  T eye({2, 2}, {1, 0, 0, 1});
  T m({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(contract("ij,jk->ik", eye, m), m);
  Rng rng(1);
  T a = random_tensor(rng, {3, 2, 4});
  T b = random_tensor(rng, {3, 2, 4});
  T r = contract("ulm,ulm->ul", a, b);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t l = 0; l < 2; ++l) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a(u, l, k) * b(u, l, k);
      EXPECT_NEAR(r(u, l), s, 1e-15);
    }
  EXPECT_EQ(kind_of([&] { contract("ij,jk->ki", eye, m); }), ErrorKind::UnsupportedSpec);
  EXPECT_EQ(kind_of([&] { contract("ij,jk->ik", eye, T({3, 2})); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([&] { contract("ii,ik->ik", eye, m); }), ErrorKind::UnsupportedSpec);
}

TEST(Contract, RandomMatrixProductMatchesLoops) {
  Rng rng(2);
  T a = random_tensor(rng, {3, 4});
  T b = random_tensor(rng, {4, 2});
  T c = contract("ij,jk->ik", a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      double s = 0;
      for (std::size_t j = 0; j < 4; ++j) s += a(i, j) * b(j, k);
      EXPECT_NEAR(c(i, k), s, 1e-12);
    }
}

// Naive evaluation of an arbitrary labeled contraction by enumerating every
// label assignment.
T loop_oracle(const std::string& spec, const T& a, const T& b) {
  const auto comma = spec.find(',');
  const auto arrow = spec.find("->");
  const std::string la = spec.substr(0, comma), lb = spec.substr(comma + 1, arrow - comma - 1),
                    lo = spec.substr(arrow + 2);
  std::map<char, std::size_t> dims;
  for (std::size_t i = 0; i < la.size(); ++i) dims[la[i]] = a.dim(i);
  for (std::size_t i = 0; i < lb.size(); ++i) dims[lb[i]] = b.dim(i);
  Shape out_shape;
  for (char c : lo) out_shape.push_back(dims[c]);
  T out(out_shape);
  std::vector<char> labels;
  for (auto& [c, _] : dims) labels.push_back(c);
  std::map<char, std::size_t> at;
  for (char c : labels) at[c] = 0;
  auto offset = [&](const std::string& ls, const T& t) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < ls.size(); ++i) off = off * t.dim(i) + at[ls[i]];
    return off;
  };
  while (true) {
    out[offset(lo, out)] += a[offset(la, a)] * b[offset(lb, b)];
    std::size_t k = labels.size();
    while (k-- > 0) {
      if (++at[labels[k]] < dims[labels[k]]) break;
      at[labels[k]] = 0;
    }
    if (k == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

struct SpecCase {
  const char* spec;
  Shape a;
  Shape b;
};

const std::vector<SpecCase>& spec_cases() {
  static const std::vector<SpecCase> cases{
      {"ij,jk->ik", {3, 4}, {4, 5}},          {"ij,kj->ik", {3, 4}, {5, 4}},
      {"ji,jk->ik", {4, 3}, {4, 5}},          {"ij,j->i", {3, 4}, {4}},
      {"i,j->ij", {3}, {4}},                  {"ij,ij->", {3, 4}, {3, 4}},
      {"ij,ij->i", {3, 4}, {3, 4}},           {"ud,dm->udm", {5, 3}, {3, 2}},
      {"ld,udm->ulm", {2, 3}, {5, 3, 4}},     {"ulm,lm->ul", {5, 2, 3}, {2, 3}},
      {"ulm,lm->um", {5, 2, 3}, {2, 3}},      {"ulm,lm->u", {5, 2, 3}, {2, 3}},
      {"ulm,ulm->ul", {5, 2, 3}, {5, 2, 3}},  {"ulm,ulm->um", {5, 2, 3}, {5, 2, 3}},
      {"ulm,ulm->u", {5, 2, 3}, {5, 2, 3}},   {"u,l->ul", {5}, {3}},
      {"vki,vjq->kijq", {4, 2, 3}, {4, 2, 3}}, {"ujq,kijq->uki", {4, 2, 3}, {2, 3, 2, 3}},
      {"vki,vjk->kij", {4, 2, 3}, {4, 3, 2}}, {"uki,kij->ukj", {4, 2, 3}, {2, 3, 3}},
      {"ukj,ujk->uk", {4, 2, 3}, {4, 3, 2}},  {"ulm,um->ul", {4, 2, 3}, {4, 3}},
  };
  return cases;
}

TEST(Contract, WhitelistMatchesLoopOracle) {
  Rng rng(3);
  for (const auto& c : spec_cases()) {
    T a = random_tensor(rng, c.a);
    T b = random_tensor(rng, c.b);
    EXPECT_LE(max_abs_diff(contract(c.spec, a, b), loop_oracle(c.spec, a, b)), 1e-12) << c.spec;
  }
}

TEST(Contract, TransposeAxesMatchesIndexOracle) {
  Rng rng(31);
  const Shape full{19, 3, 17, 2};
  for (std::size_t r = 1; r <= full.size(); ++r) {
    const Shape shape(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(r));
    const T t = random_tensor(rng, shape);
    std::vector<std::size_t> perm(r);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      const T out = detail::transpose_axes(t, perm);
      std::vector<std::size_t> idx(r, 0);
      for (std::size_t k = 0; k < t.size(); ++k) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < r; ++i) off = off * out.dim(i) + idx[perm[i]];
        ASSERT_EQ(out[off], t[k]);
        for (std::size_t ax = r; ax-- > 0;) {
          if (++idx[ax] < shape[ax]) break;
          idx[ax] = 0;
        }
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Contract, EveryOperandLayoutMatchesLoopOracle) {
  Rng rng(32);
  const std::vector<SpecCase> cases{
      {"ik,kj->ij", {18, 5}, {5, 17}},        {"ki,kj->ij", {5, 18}, {5, 17}},
      {"ik,jk->ij", {18, 5}, {17, 5}},        {"ki,jk->ji", {5, 18}, {17, 5}},
      {"bik,bkj->bji", {3, 18, 5}, {3, 5, 17}}, {"bki,bjk->bij", {3, 5, 18}, {3, 17, 5}},
      {"ibk,kbj->bij", {18, 3, 5}, {5, 3, 17}}, {"vki,vjq->qkji", {20, 2, 3}, {20, 4, 5}},
      {"ld,udm->ulm", {7, 3}, {20, 3, 4}},      {"dl,udm->ulm", {3, 7}, {20, 3, 4}},
      {"ld,uvdm->uvlm", {7, 3}, {5, 4, 3, 2}},  {"ld,udm->uml", {7, 3}, {20, 3, 4}},
  };
  for (const auto& c : cases) {
    const T a = random_tensor(rng, c.a);
    const T b = random_tensor(rng, c.b);
    EXPECT_LE(max_abs_diff(detail::contract_eval(parse_contract(c.spec), a, b), loop_oracle(c.spec, a, b)), 1e-12)
        << c.spec;
  }
}

TEST(Contract, RenamedLabelsShareTheWhitelist) {
  Rng rng(4);
  T a = random_tensor(rng, {3, 4});
  T b = random_tensor(rng, {4, 2});
  EXPECT_EQ(contract("ab,bc->ac", a, b), contract("ij,jk->ik", a, b));
}

TEST(Contract, FlopCount) {
  Rng rng(5);
  T a = random_tensor(rng, {3, 4});
  T b = random_tensor(rng, {4, 5});
  const auto before = flop_counter();
  contract("ij,jk->ik", a, b);
  EXPECT_EQ(flop_counter() - before, 2u * 3 * 4 * 5);
}

TEST(Reduce, Examples) {
  Tape<double> tape;
  auto x = tape.leaf(T({2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(reduce(Reduce::Sum, x, 0).value(), T({2}, {4, 6}));
  auto one = tape.leaf(T({1}, {7.5}));
  EXPECT_EQ(reduce(Reduce::Mean, one, 0).value().item(), 7.5);
  EXPECT_EQ(kind_of([&] { reduce(Reduce::Sum, x, 2); }), ErrorKind::AxisError);
}

TEST(Reduce, MaxRoutesToFirstArgmax) {
  Tape<double> tape;
  auto x = tape.leaf(T({4}, {1, 5, 5, 2}));
  auto y = reduce(Reduce::Max, x, 0);
  EXPECT_EQ(y.value().item(), 5.0);
  auto g = backward(tape, y);
  EXPECT_EQ(g[x], T({4}, {0, 1, 0, 0}));
}

TEST(Backward, Examples) {
  {
    Tape<double> tape;
    auto x = tape.leaf(T({2}, {1, 2}));
    auto y = sum_all(mul(x, x));
    EXPECT_EQ(backward(tape, y)[x], T({2}, {2, 4}));
  }
  {
    Tape<double> tape;
    auto x = tape.leaf(T::scalar(0.0));
    auto y = sigmoid(x);
    EXPECT_DOUBLE_EQ(backward(tape, y)[x].item(), 0.25);
  }
}

TEST(Backward, UnusedInputsGetZeros) {
  Tape<double> tape;
  auto x = tape.leaf(T({2}, {1, 2}));
  auto unused = tape.leaf(T({3}, {1, 2, 3}));
  auto y = sum_all(x);
  auto g = backward(tape, y);
  EXPECT_EQ(g[unused], T({3}));
}

TEST(Backward, Errors) {
  Tape<double> a;
  Tape<double> b;
  auto x = a.leaf(T({2}, {1, 2}));
  auto y = sum_all(x);
  EXPECT_EQ(kind_of([&] { backward(b, y); }), ErrorKind::DetachedOutput);
  auto v = a.leaf(T({2}, {1, 2}));
  EXPECT_EQ(kind_of([&] { backward(a, v, T({3})); }), ErrorKind::ShapeMismatch);
}

TEST(FdCheck, QuadraticForm) {
  Rng rng(6);
  T q = random_tensor(rng, {4, 4});
  auto f = [&](Tape<double>& tape, const std::vector<V>& in) {
    auto qc = tape.constant(q);
    return contract("i,i->", in[0], contract("ij,j->i", qc, in[0]));
  };
  auto rep = fd_check(f, {random_tensor(rng, {4})});
  EXPECT_LE(rep.max_rel_error, 1e-9);
}

TEST(FdCheck, ConstantFunction) {
  auto f = [](Tape<double>& tape, const std::vector<V>&) { return tape.constant(T::scalar(3.0)); };
  auto rep = fd_check(f, {T({3}, {1, 2, 3})});
  EXPECT_EQ(rep.max_rel_error, 0.0);
  EXPECT_EQ(rep.max_abs_error, 0.0);
}

// Every differentiable op against central differences on 20 random shapes.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const int trial = GetParam();
  Rng rng(100 + static_cast<std::uint64_t>(trial));
  const std::size_t n = 1 + rng.below(4), l = 1 + rng.below(4), m = 1 + rng.below(3);
  // Weights break symmetry so that every output coordinate matters.
  auto weighted = [&](Tape<double>& tape, V y) {
    Rng wr(7);
    return sum_all(mul(y, tape.constant(random_tensor(wr, y.shape()))));
  };
  std::vector<std::pair<std::string, std::function<V(Tape<double>&, const std::vector<V>&)>>> ops;
  std::vector<std::vector<T>> inputs;
  auto push = [&](std::string name, auto fn, std::vector<T> in) {
    ops.emplace_back(std::move(name), fn);
    inputs.push_back(std::move(in));
  };
  push("add_broadcast", [&](auto& tp, auto& v) { return weighted(tp, add(v[0], v[1])); },
       {random_tensor(rng, {n, l}), random_tensor(rng, {l})});
  push("sub_broadcast", [&](auto& tp, auto& v) { return weighted(tp, sub(v[0], v[1])); },
       {random_tensor(rng, {n, l}), random_tensor(rng, {n, 1})});
  push("mul_broadcast", [&](auto& tp, auto& v) { return weighted(tp, mul(v[0], v[1])); },
       {random_tensor(rng, {n, l, m}), random_tensor(rng, {l, m})});
  push("mul_scalar", [&](auto& tp, auto& v) { return weighted(tp, mul(v[0], v[1])); },
       {random_tensor(rng, {n, l}), T::scalar(rng.uniform(-2, 2))});
  for (auto op : {Unary::Reciprocal, Unary::Sigmoid, Unary::Gelu, Unary::Silu, Unary::Tanh, Unary::Exp,
                  Unary::Square}) {
    const bool positive = op == Unary::Reciprocal;
    push(detail::unary_name(op), [&, op](auto& tp, auto& v) { return weighted(tp, unary(op, v[0])); },
         {random_tensor(rng, {n, l}, positive ? 0.5 : -2.0, 2.0)});
  }
  // Kinks are avoided by keeping inputs away from zero.
  T away({n, l});
  for (auto& v : away.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  push("relu", [&](auto& tp, auto& v) { return weighted(tp, relu(v[0])); }, {away});
  push("abs", [&](auto& tp, auto& v) { return weighted(tp, unary(Unary::Abs, v[0])); }, {away});
  push("clamp", [&](auto& tp, auto& v) { return weighted(tp, clamp(v[0], -0.05, 0.05)); }, {away});
  push("scale", [&](auto& tp, auto& v) { return weighted(tp, scale(v[0], -1.7)); }, {random_tensor(rng, {n, l})});
  push("reshape", [&](auto& tp, auto& v) { return weighted(tp, reshape(v[0], Shape{n * l})); },
       {random_tensor(rng, {n, l})});
  for (auto op : {Reduce::Sum, Reduce::Mean, Reduce::Max}) {
    for (std::size_t axis = 0; axis < 3; ++axis) {
      push("reduce", [&, op, axis](auto& tp, auto& v) { return weighted(tp, reduce(op, v[0], axis)); },
           {random_tensor(rng, {n, l, m})});
    }
  }
  for (const auto& c : spec_cases()) {
    push(std::string("contract ") + c.spec,
         [&, spec = std::string(c.spec)](auto& tp, auto& v) { return weighted(tp, contract(spec, v[0], v[1])); },
         {random_tensor(rng, c.a), random_tensor(rng, c.b)});
  }
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < 2 * n; ++i) idx.push_back(static_cast<std::uint32_t>(rng.below(n)));
  push("gather_rows", [&](auto& tp, auto& v) { return weighted(tp, gather_rows(v[0], idx)); },
       {random_tensor(rng, {n, l})});
  push("scatter_add_rows", [&](auto& tp, auto& v) { return weighted(tp, scatter_add_rows(v[0], idx, n)); },
       {random_tensor(rng, {2 * n, l})});
  SparseMatrix s = from_triplets(n, {{0, 0, 0.5}, {0, n - 1, -1.0}, {n - 1, 0, 2.0}});
  push("spmm", [&](auto& tp, auto& v) { return weighted(tp, spmm(s, v[0])); }, {random_tensor(rng, {n, l})});
  const std::size_t lw = l + 1;
  push("layer_norm", [&](auto& tp, auto& v) { return weighted(tp, layer_norm(v[0], v[1], v[2])); },
       {random_tensor(rng, {n, lw}), random_tensor(rng, {lw}), random_tensor(rng, {lw})});
  push("dropout", [&](auto& tp, auto& v) { return weighted(tp, dropout(v[0], 0.4, 42, true)); },
       {random_tensor(rng, {n, l})});
  std::vector<std::uint32_t> targets;
  for (std::size_t i = 0; i < n; ++i) targets.push_back(static_cast<std::uint32_t>(rng.below(l + 1)));
  push("cross_entropy", [&](auto&, auto& v) { return cross_entropy(v[0], targets); },
       {random_tensor(rng, {n, l + 1}, -3, 3)});
  std::vector<double> bt;
  for (std::size_t i = 0; i < n; ++i) bt.push_back(static_cast<double>(rng.below(2)));
  push("bce_with_logits", [&](auto&, auto& v) { return bce_with_logits(v[0], bt); },
       {random_tensor(rng, {n, 1}, -3, 3)});
  push("mse", [&](auto&, auto& v) { return mse_loss(v[0], v[1]); },
       {random_tensor(rng, {n, 1}), random_tensor(rng, {n, 1})});

  for (std::size_t k = 0; k < ops.size(); ++k) {
    auto rep = fd_check(ops[k].second, inputs[k]);
    EXPECT_LE(rep.max_rel_error, 1e-5) << ops[k].first << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradient, ::testing::Range(0, 20));

TEST(Tape, ReplayIsBitIdentical) {
  auto run = [] {
    Rng rng(9);
    Tape<double> tape;
    auto x = tape.leaf(random_tensor(rng, {5, 3}));
    auto w = tape.leaf(random_tensor(rng, {4, 3}));
    auto h = gelu(contract("ij,kj->ik", x, w));
    auto y = sum_all(dropout(h, 0.3, hash_key({1, 2, 3}), true));
    auto g = backward(tape, y);
    return std::pair{y.value(), g[w]};
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Dropout, MaskIsKeyedAndInverted) {
  Tape<double> tape;
  auto x = tape.leaf(T({1000}, 1.0));
  auto y1 = dropout(x, 0.25, 5, true);
  auto y2 = dropout(x, 0.25, 5, true);
  auto y3 = dropout(x, 0.25, 6, true);
  EXPECT_EQ(y1.value(), y2.value());
  EXPECT_NE(y1.value(), y3.value());
  std::size_t zeros = 0;
  for (double v : y1.value().data()) {
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1000.0, 0.25, 0.05);
  EXPECT_EQ(dropout(x, 0.25, 5, false).id, x.id);
}

TEST(Tensor, MemoryAccounting) {
  const auto before = memory_stats().live_bytes;
  reset_peak_memory();
  {
    T big({1000}, 1.0);
    EXPECT_GE(memory_stats().peak_bytes, before + 8000);
  }
  EXPECT_EQ(memory_stats().live_bytes, before);
}

}  // namespace
}  // namespace gmn::num
