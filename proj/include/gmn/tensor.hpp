// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gmn/error.hpp"

namespace gmn::num {

// Allocation and arithmetic accounting. Both are per-thread so that
// concurrent evaluations do not interfere with each other's measurements.
struct MemoryStats {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;
};

inline MemoryStats& memory_stats() {
  thread_local MemoryStats stats;
  return stats;
}

inline void reset_peak_memory() {
  auto& s = memory_stats();
  s.peak_bytes = s.live_bytes;
}

inline std::uint64_t& flop_counter() {
  thread_local std::uint64_t flops = 0;
  return flops;
}

inline void add_flops(std::uint64_t n) { flop_counter() += n; }

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    auto& s = memory_stats();
    s.live_bytes += n * sizeof(T);
    s.peak_bytes = std::max(s.peak_bytes, s.live_bytes);
    return std::allocator<T>{}.allocate(n);
  }

  void deallocate(T* p, std::size_t n) noexcept {
    memory_stats().live_bytes -= n * sizeof(T);
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor of rank 0..4. A rank-0 tensor holds one value.
template <std::floating_point Real>
class Tensor {
 public:
  using value_type = Real;
  using Storage = std::vector<Real, TrackingAllocator<Real>>;

  Tensor() : data_(1, Real{0}) {}

  explicit Tensor(Shape shape, Real fill = Real{0}) : shape_(std::move(shape)) {
    check_rank();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::span<const Real> values) : shape_(std::move(shape)) {
    check_rank();
    require(values.size() == shape_size(shape_), ErrorKind::ShapeMismatch,
            "value count does not match shape " + shape_string(shape_));
    data_.assign(values.begin(), values.end());
  }

  Tensor(Shape shape, std::initializer_list<Real> values)
      : Tensor(std::move(shape), std::span<const Real>(values.begin(), values.size())) {}

  static Tensor scalar(Real value) {
    Tensor t;
    t.data_[0] = value;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<Real> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const Real> data() const noexcept { return {data_.data(), data_.size()}; }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  const Real& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <std::integral... Idx>
  Real& operator()(Idx... idx) noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }
  template <std::integral... Idx>
  const Real& operator()(Idx... idx) const noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  Real item() const {
    require(size() == 1, ErrorKind::ShapeMismatch, "item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    require(shape_size(shape) == size(), ErrorKind::ShapeMismatch,
            "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor out(*this);
    out.shape_ = std::move(shape);
    out.check_rank();
    return out;
  }

  template <std::floating_point Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data().begin(),
                   [](Real v) { return static_cast<Other>(v); });
    return out;
  }

  void fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && std::equal(a.data_.begin(), a.data_.end(), b.data_.begin());
  }

 private:
  void check_rank() const {
    require(shape_.size() <= kMaxRank, ErrorKind::ShapeMismatch,
            "rank above " + std::to_string(kMaxRank) + " is not supported");
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const noexcept {
    std::size_t off = 0;
    std::size_t axis = 0;
    ((off = off * shape_[axis++] + idx), ...);
    return off;
  }

  Shape shape_;
  Storage data_;
};

template <std::floating_point Real>
Real max_abs_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          "max_abs_diff on " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Real worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template <std::floating_point Real>
Real max_abs(const Tensor<Real>& a) {
  Real worst = 0;
  for (Real v : a.data()) worst = std::max(worst, std::abs(v));
  return worst;
}

template <std::floating_point Real>
Real frobenius_norm(const Tensor<Real>& a) {
  Real s = 0;
  for (Real v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace gmn::num
