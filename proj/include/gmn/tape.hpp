// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/tensor.hpp"

namespace gmn::num {

/// When set, every recorded op checks its output for NaN/Inf and
/// reciprocal rejects exact zeros.
inline bool& debug_checks() {
  thread_local bool enabled = false;
  return enabled;
}

class DebugScope {
 public:
  explicit DebugScope(bool on = true) : previous_(debug_checks()) { debug_checks() = on; }
  ~DebugScope() { debug_checks() = previous_; }
  DebugScope(const DebugScope&) = delete;
  DebugScope& operator=(const DebugScope&) = delete;

 private:
  bool previous_;
};

template <std::floating_point Real>
class Tape;

/// Handle to a value recorded on a tape.
template <std::floating_point Real>
struct Var {
  Tape<Real>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Real>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  std::size_t rank() const { return value().rank(); }
};

/// Input gradients of one node given the gradient of its output.
template <std::floating_point Real>
using BackwardFn = std::function<std::vector<Tensor<Real>>(const Tensor<Real>& grad_out)>;

template <std::floating_point Real>
struct Node {
  std::string op;
  Tensor<Real> value;
  std::vector<std::size_t> inputs;
  BackwardFn<Real> backward;  // empty for leaves, constants and grad-free nodes
  bool needs_grad = false;
};

/// Append-only record of a computation. Nodes are created in topological
/// order, so reverse iteration is a valid backward schedule.
template <std::floating_point Real>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or feature matrix).
  Var<Real> leaf(Tensor<Real> value, std::string name = "leaf") {
    check_finite(value, name);
    nodes_.push_back({std::move(name), std::move(value), {}, {}, true});
    return {this, nodes_.size() - 1};
  }

  /// Value excluded from differentiation.
  Var<Real> constant(Tensor<Real> value) {
    nodes_.push_back({"constant", std::move(value), {}, {}, false});
    return {this, nodes_.size() - 1};
  }

  Var<Real> record(std::string op, Tensor<Real> value, std::vector<std::size_t> inputs, BackwardFn<Real> backward) {
    check_finite(value, op);
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_.at(i).needs_grad;
    if (!needs) backward = nullptr;
    nodes_.push_back({std::move(op), std::move(value), std::move(inputs), std::move(backward), needs});
    return {this, nodes_.size() - 1};
  }

  const Tensor<Real>& value(std::size_t id) const { return nodes_.at(id).value; }
  const Node<Real>& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool owns(const Var<Real>& v) const noexcept { return v.tape == this && v.id < nodes_.size(); }

 private:
  static void check_finite(const Tensor<Real>& value, const std::string& op) {
    if (!debug_checks()) return;
    for (Real v : value.data()) {
      if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "non-finite value produced by '" + op + "'");
    }
  }

  std::vector<Node<Real>> nodes_;
};

/// Gradients indexed by node id. Leaves off every path to the output hold
/// zeros; interior nodes are not retained.
template <std::floating_point Real>
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor<Real>> grads) : grads_(std::move(grads)) {}

  const Tensor<Real>& operator[](const Var<Real>& v) const { return grads_.at(v.id); }
  const Tensor<Real>& at(std::size_t id) const { return grads_.at(id); }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::vector<Tensor<Real>> grads_;
};

template <std::floating_point Real>
void accumulate(Tensor<Real>& into, const Tensor<Real>& g) {
  require(into.shape() == g.shape(), ErrorKind::ShapeMismatch,
          "gradient shape " + shape_string(g.shape()) + " for value " + shape_string(into.shape()));
  auto dst = into.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

/// Reverse sweep from `out` seeded with `seed` (shape of `out`).
template <std::floating_point Real>
Gradients<Real> backward(Tape<Real>& tape, const Var<Real>& out, const Tensor<Real>& seed) {
  require(tape.owns(out), ErrorKind::DetachedOutput, "output does not belong to this tape");
  require(seed.shape() == out.shape(), ErrorKind::ShapeMismatch,
          "seed " + shape_string(seed.shape()) + " for output " + shape_string(out.shape()));
  std::vector<Tensor<Real>> grads;
  grads.reserve(tape.size());
  std::vector<char> touched(tape.size(), 0);
  for (std::size_t i = 0; i < tape.size(); ++i) grads.emplace_back();
  grads[out.id] = seed;
  touched[out.id] = 1;
  for (std::size_t k = out.id + 1; k-- > 0;) {
    const auto& node = tape.node(k);
    if (!touched[k] || !node.backward) continue;
    auto in_grads = node.backward(grads[k]);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const auto id = node.inputs[j];
      if (!tape.node(id).needs_grad) continue;
      if (!touched[id]) {
        grads[id] = std::move(in_grads[j]);
        touched[id] = 1;
      } else {
        accumulate(grads[id], in_grads[j]);
      }
    }
    if (k != out.id) grads[k] = Tensor<Real>();  // interior gradients are no longer needed
  }
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const bool keep = touched[i] && (tape.node(i).inputs.empty() || i == out.id);
    if (!keep) grads[i] = tape.node(i).inputs.empty() ? Tensor<Real>(tape.value(i).shape()) : Tensor<Real>();
  }
  return Gradients<Real>(std::move(grads));
}

/// Scalar outputs default to a unit seed.
template <std::floating_point Real>
Gradients<Real> backward(Tape<Real>& tape, const Var<Real>& out) {
  require(tape.owns(out), ErrorKind::DetachedOutput, "output does not belong to this tape");
  require(out.value().size() == 1, ErrorKind::ShapeMismatch, "non-scalar output needs an explicit seed");
  return backward(tape, out, Tensor<Real>(out.shape(), Real{1}));
}

}  // namespace gmn::num
