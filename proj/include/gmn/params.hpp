// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmn/config.hpp"
#include "gmn/rng.hpp"
#include "gmn/tape.hpp"

namespace gmn {

/// Learnable tensors keyed by dotted name ("layer0.gmn.W"). Ordered so that
/// iteration, serialization and the optimizer are deterministic.
using ParamSet = std::map<std::string, num::Tensor<double>>;

enum class InitKind { Xavier, Zeros, Ones };

struct ParamShape {
  std::string name;
  num::Shape shape;
  InitKind init = InitKind::Xavier;
};

namespace detail {

inline void linear_shapes(std::vector<ParamShape>& out, const std::string& prefix, std::size_t in, std::size_t outd,
                          bool bias) {
  out.push_back({prefix + ".W", {outd, in}, InitKind::Xavier});
  if (bias) out.push_back({prefix + ".b", {outd}, InitKind::Zeros});
}

inline void phi_shapes(std::vector<ParamShape>& out, const std::string& prefix, const LayerConfig& c) {
  if (c.phi.mode != PhiMode::SetAgg) return;
  const std::size_t h = c.phi.hidden;
  for (const char* mlp : {"rho", "pool"}) {
    const std::string p = prefix + "." + mlp;
    out.push_back({p + ".w1", {h}, InitKind::Xavier});
    out.push_back({p + ".b1", {h}, InitKind::Zeros});
    out.push_back({p + ".w2", {h, c.m}, InitKind::Xavier});
    out.push_back({p + ".b2", {c.m}, InitKind::Zeros});
  }
}

}  // namespace detail

/// Every tensor a config instantiates, in construction order.
inline std::vector<ParamShape> param_shapes(const LayerConfig& c) {
  validate(c);
  std::vector<ParamShape> out;
  const std::size_t l = c.l, d = c.d;
  if (c.in_dim > 0) detail::linear_shapes(out, "encoder", c.in_dim, l, true);
  for (std::size_t i = 0; i < c.num_layers; ++i) {
    const std::string layer = "layer" + std::to_string(i);
    const std::string g = layer + ".gmn";
    out.push_back({g + ".W", {d, l}, InitKind::Xavier});
    if (c.wb == WBMode::Nonlinear) out.push_back({g + ".W2", {d, d}, InitKind::Xavier});
    out.push_back({g + ".B", {l, d}, InitKind::Xavier});
    if (c.wb == WBMode::Nonlinear) out.push_back({g + ".B2", {l, l}, InitKind::Xavier});
    for (const char* gate : {"z", "h"}) {
      detail::linear_shapes(out, g + "." + gate, l, l, true);
      if (c.gate == GateMode::NLP) detail::linear_shapes(out, g + "." + gate + "2", l, l, true);
    }
    detail::phi_shapes(out, g + ".phi", c);
    if (c.phi_c == PhiSharing::Separate) detail::phi_shapes(out, g + ".phic", c);
    if (c.self_term) {
      out.push_back({g + ".beta_raw", {}, InitKind::Zeros});
      out.push_back({g + ".Ws1", {d, d}, InitKind::Xavier});
      out.push_back({g + ".Ws2", {d, d}, InitKind::Xavier});
    }
    if (c.local != LocalKind::None) {
      const std::string lo = layer + ".local";
      out.push_back({lo + ".W1", {l, l}, InitKind::Xavier});
      out.push_back({lo + ".W2", {l, l}, InitKind::Xavier});
      if (c.local == LocalKind::GatedGcnLite) {
        out.push_back({lo + ".W3", {l, l}, InitKind::Xavier});
        out.push_back({lo + ".W4", {l, l}, InitKind::Xavier});
      }
    }
    if (c.layer_norm) {
      for (const char* ln : {"ln1", "ln2"}) {
        out.push_back({layer + "." + ln + ".g", {l}, InitKind::Ones});
        out.push_back({layer + "." + ln + ".b", {l}, InitKind::Zeros});
      }
    }
    if (c.ffn) {
      detail::linear_shapes(out, layer + ".ffn1", l, c.ffn_factor * l, true);
      detail::linear_shapes(out, layer + ".ffn2", c.ffn_factor * l, l, true);
    }
  }
  if (c.out_dim > 0) detail::linear_shapes(out, "head", l, c.out_dim, true);
  return out;
}

inline std::size_t param_count(const LayerConfig& c) {
  std::size_t total = 0;
  for (const auto& p : param_shapes(c)) total += num::shape_size(p.shape);
  return total;
}

/// Per-group totals: "encoder", "head", and per layer component (gmn, local,
/// ln, ffn) summed over layers.
inline std::map<std::string, std::size_t> param_breakdown(const LayerConfig& c) {
  std::map<std::string, std::size_t> groups;
  for (const auto& p : param_shapes(c)) {
    std::string key = p.name.substr(0, p.name.find('.'));
    if (key.rfind("layer", 0) == 0) {
      const auto rest = p.name.substr(p.name.find('.') + 1);
      key = rest.substr(0, rest.find('.'));
      if (key == "ln1" || key == "ln2") key = "ln";
      if (key == "ffn1" || key == "ffn2") key = "ffn";
    }
    groups[key] += num::shape_size(p.shape);
  }
  return groups;
}

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool is_phi_param(std::string_view name) {
  return name.find(".phi.") != std::string_view::npos || name.find(".phic.") != std::string_view::npos;
}

/// Enforces the setagg Lipschitz bound: every phi weight in [-clip, clip].
inline void clip_phi(ParamSet& ps, const LayerConfig& c) {
  if (c.phi.mode != PhiMode::SetAgg) return;
  for (auto& [name, t] : ps) {
    if (!is_phi_param(name)) continue;
    for (auto& v : t.data()) v = std::clamp(v, -c.phi.clip, c.phi.clip);
  }
}

inline bool phi_within_clip(const ParamSet& ps, const LayerConfig& c) {
  if (c.phi.mode != PhiMode::SetAgg) return true;
  for (const auto& [name, t] : ps) {
    if (!is_phi_param(name)) continue;
    for (double v : t.data()) {
      if (std::abs(v) > c.phi.clip) return false;
    }
  }
  return true;
}

/// Normal draws with variance 2 / (fan_in + fan_out). Each tensor has its own
/// stream keyed by (seed, name), so adding a tensor leaves the others intact.
inline ParamSet init_params(const LayerConfig& c, std::uint64_t seed) {
  ParamSet ps;
  for (const auto& p : param_shapes(c)) {
    num::Tensor<double> t(p.shape);
    if (p.init == InitKind::Ones) {
      for (auto& v : t.data()) v = 1.0;
    } else if (p.init == InitKind::Xavier) {
      std::size_t fan_in = 1, fan_out = 1;
      if (p.shape.size() == 2) {
        fan_out = p.shape[0];
        fan_in = p.shape[1];
      } else if (p.shape.size() == 1) {
        fan_in = 1;
        fan_out = p.shape[0];
      }
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
      Rng rng(hash_key({seed, name_hash(p.name)}));
      for (auto& v : t.data()) v = sd * rng.normal();
    }
    ps.emplace(p.name, std::move(t));
  }
  clip_phi(ps, c);
  return ps;
}

/// Checks that `ps` holds exactly the tensors of `c` with matching shapes.
inline void check_params(const ParamSet& ps, const LayerConfig& c) {
  const auto shapes = param_shapes(c);
  require(shapes.size() == ps.size(), ErrorKind::ConfigMismatch,
          "parameter set has " + std::to_string(ps.size()) + " tensors, config needs " + std::to_string(shapes.size()));
  for (const auto& p : shapes) {
    auto it = ps.find(p.name);
    require(it != ps.end(), ErrorKind::ConfigMismatch, "missing parameter " + p.name);
    require(it->second.shape() == p.shape, ErrorKind::ConfigMismatch,
            p.name + " has shape " + num::shape_string(it->second.shape()) + ", config needs " +
                num::shape_string(p.shape));
  }
}

/// Parameters registered as leaves of one tape.
template <std::floating_point Real>
class Bound {
 public:
  Bound(num::Tape<Real>& tape, const ParamSet& ps) {
    for (const auto& [name, t] : ps) {
      if constexpr (std::is_same_v<Real, double>) vars_.emplace(name, tape.leaf(t, name));
      else vars_.emplace(name, tape.leaf(t.template cast<Real>(), name));
    }
  }

  /// Wraps leaves that already live on a tape.
  explicit Bound(std::map<std::string, num::Var<Real>> vars) : vars_(std::move(vars)) {}

  num::Var<Real> operator[](const std::string& name) const {
    auto it = vars_.find(name);
    require(it != vars_.end(), ErrorKind::ConfigMismatch, "unknown parameter " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return vars_.count(name) > 0; }
  const std::map<std::string, num::Var<Real>>& vars() const { return vars_; }

 private:
  std::map<std::string, num::Var<Real>> vars_;
};

/// Prefix-scoped view: view("W") looks up prefix + ".W".
template <std::floating_point Real>
struct ParamView {
  const Bound<Real>* bound;
  std::string prefix;

  num::Var<Real> operator()(std::string_view name) const { return (*bound)[prefix + "." + std::string(name)]; }
  bool has(std::string_view name) const { return bound->has(prefix + "." + std::string(name)); }
  ParamView sub(std::string_view name) const { return {bound, prefix + "." + std::string(name)}; }
};

/// Gradients of every bound parameter, cast back to double.
template <std::floating_point Real>
ParamSet gradients_of(const Bound<Real>& bound, const num::Gradients<Real>& grads) {
  ParamSet out;
  for (const auto& [name, v] : bound.vars()) {
    if constexpr (std::is_same_v<Real, double>) out.emplace(name, grads[v]);
    else out.emplace(name, grads[v].template cast<double>());
  }
  return out;
}

}  // namespace gmn
