// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gmn/error.hpp"
#include "gmn/ops.hpp"
#include "gmn/text_io.hpp"

namespace gmn {

enum class InnerType { T1, T2, T3, T4 };
enum class Agg { Mul, Add };
enum class GateMode { LP, NLP };
enum class WBMode { Linear, Nonlinear };
enum class LocalKind { None, GcnLite, GatedGcnLite };
enum class Readout { Mean, Sum };
enum class Level { Node, Graph };
enum class PhiMode { Power, SetAgg };
enum class PhiSharing { Shared, Separate, Zero };  // how C gets its phi
enum class Pooling { Mean, Sum };
enum class Activation { Relu, Gelu, Silu, Tanh };
enum class Precision { F64, F32 };
enum class LossKind { Xent, Mae, Bce };

namespace detail {

template <class E, std::size_t N>
struct EnumNames {
  std::array<std::pair<E, std::string_view>, N> names;

  std::string_view name(E e) const {
    for (const auto& [v, s] : names) {
      if (v == e) return s;
    }
    return "?";
  }
  E parse(std::string_view text, std::string_view key) const {
    for (const auto& [v, s] : names) {
      if (s == text) return v;
    }
    std::string allowed;
    for (const auto& [v, s] : names) allowed += (allowed.empty() ? "" : "|") + std::string(s);
    fail(ErrorKind::InvalidValue, std::string(key) + ": '" + std::string(text) + "' is not one of " + allowed);
  }
};

inline constexpr EnumNames<InnerType, 4> kInner{{{{InnerType::T1, "T1"},
                                                  {InnerType::T2, "T2"},
                                                  {InnerType::T3, "T3"},
                                                  {InnerType::T4, "T4"}}}};
inline constexpr EnumNames<Agg, 2> kAgg{{{{Agg::Mul, "mul"}, {Agg::Add, "add"}}}};
inline constexpr EnumNames<GateMode, 2> kGate{{{{GateMode::LP, "LP"}, {GateMode::NLP, "NLP"}}}};
inline constexpr EnumNames<WBMode, 2> kWB{{{{WBMode::Linear, "linear"}, {WBMode::Nonlinear, "nonlinear"}}}};
inline constexpr EnumNames<LocalKind, 3> kLocal{{{{LocalKind::None, "none"},
                                                  {LocalKind::GcnLite, "gcn_lite"},
                                                  {LocalKind::GatedGcnLite, "gatedgcn_lite"}}}};
inline constexpr EnumNames<Readout, 2> kReadout{{{{Readout::Mean, "mean"}, {Readout::Sum, "sum"}}}};
inline constexpr EnumNames<Level, 2> kLevel{{{{Level::Node, "node"}, {Level::Graph, "graph"}}}};
inline constexpr EnumNames<PhiMode, 2> kPhiMode{{{{PhiMode::Power, "power"}, {PhiMode::SetAgg, "setagg"}}}};
inline constexpr EnumNames<PhiSharing, 3> kPhiSharing{{{{PhiSharing::Shared, "shared"},
                                                        {PhiSharing::Separate, "separate"},
                                                        {PhiSharing::Zero, "zero"}}}};
inline constexpr EnumNames<Pooling, 2> kPooling{{{{Pooling::Mean, "mean"}, {Pooling::Sum, "sum"}}}};
inline constexpr EnumNames<Activation, 4> kAct{{{{Activation::Relu, "relu"},
                                                 {Activation::Gelu, "gelu"},
                                                 {Activation::Silu, "silu"},
                                                 {Activation::Tanh, "tanh"}}}};
inline constexpr EnumNames<Precision, 2> kPrecision{{{{Precision::F64, "f64"}, {Precision::F32, "f32"}}}};
inline constexpr EnumNames<LossKind, 3> kLoss{{{{LossKind::Xent, "xent"}, {LossKind::Mae, "mae"}, {LossKind::Bce, "bce"}}}};

}  // namespace detail

inline std::string_view to_string(InnerType v) { return detail::kInner.name(v); }
inline std::string_view to_string(Agg v) { return detail::kAgg.name(v); }
inline std::string_view to_string(LocalKind v) { return detail::kLocal.name(v); }
inline std::string_view to_string(Activation v) { return detail::kAct.name(v); }
inline std::string_view to_string(LossKind v) { return detail::kLoss.name(v); }

inline num::Unary unary_of(Activation a) {
  switch (a) {
    case Activation::Relu: return num::Unary::Relu;
    case Activation::Gelu: return num::Unary::Gelu;
    case Activation::Silu: return num::Unary::Silu;
    case Activation::Tanh: return num::Unary::Tanh;
  }
  return num::Unary::Relu;
}

struct PhiConfig {
  PhiMode mode = PhiMode::SetAgg;
  std::vector<unsigned> exponents;  // power mode; empty means 1..m
  std::size_t hidden = 16;          // setagg MLP width
  Pooling pool = Pooling::Mean;
  double clip = 1.0;                // setagg weights stay in [-clip, clip]
  Activation act = Activation::Tanh;
};

/// Dropout rates per site, in the order ffn, local, residual, gmn.
struct DropoutRates {
  double ffn = 0.0;
  double local = 0.0;
  double residual = 0.0;
  double gmn = 0.0;

  friend bool operator==(const DropoutRates&, const DropoutRates&) = default;
};

struct LayerConfig {
  std::size_t in_dim = 0;   // input feature width; 0 means no input encoder
  std::size_t out_dim = 0;  // prediction width; 0 means no head
  std::size_t l = 32;
  std::size_t d = 8;
  std::size_t m = 4;
  std::size_t num_layers = 3;
  InnerType inner = InnerType::T4;
  InnerType t4_second = InnerType::T3;
  Agg agg = Agg::Mul;
  bool self_term = false;
  GateMode gate = GateMode::LP;
  Activation gate_act = Activation::Gelu;
  WBMode wb = WBMode::Linear;
  Activation wb_act = Activation::Gelu;
  LocalKind local = LocalKind::GcnLite;
  Readout readout = Readout::Mean;
  Level level = Level::Graph;
  PhiConfig phi;
  PhiSharing phi_c = PhiSharing::Shared;
  bool layer_norm = true;
  bool ffn = true;
  std::size_t ffn_factor = 2;
  Activation ffn_act = Activation::Gelu;
  DropoutRates dropout;
  Precision precision = Precision::F64;

  /// Exponents actually used in power mode.
  std::vector<unsigned> power_exponents() const {
    if (!phi.exponents.empty()) return phi.exponents;
    std::vector<unsigned> s(m);
    for (std::size_t i = 0; i < m; ++i) s[i] = static_cast<unsigned>(i + 1);
    return s;
  }
};

inline void validate(const LayerConfig& c) {
  require(c.l >= 1 && c.d >= 1 && c.m >= 1, ErrorKind::InvalidValue, "l, d and m must be positive");
  require(c.num_layers >= 1, ErrorKind::InvalidValue, "layers must be positive");
  require(c.inner != InnerType::T2 || c.m == c.l, ErrorKind::TypeConstraintViolation,
          "inner type T2 needs m = l (m=" + std::to_string(c.m) + ", l=" + std::to_string(c.l) + ")");
  if (c.inner == InnerType::T4) {
    require(c.t4_second == InnerType::T3 || (c.t4_second == InnerType::T2 && c.m == c.l),
            ErrorKind::TypeConstraintViolation, "T4 second product must be T3, or T2 with m = l");
  }
  if (c.phi.mode == PhiMode::Power) {
    require(c.power_exponents().size() == c.m, ErrorKind::InvalidValue, "phi_exponents needs exactly m entries");
  } else {
    require(c.phi.hidden >= 1 && c.phi.clip > 0.0, ErrorKind::InvalidValue, "phi_hidden and phi_clip must be positive");
  }
  for (double r : {c.dropout.ffn, c.dropout.local, c.dropout.residual, c.dropout.gmn}) {
    require(r >= 0.0 && r <= 1.0, ErrorKind::InvalidValue, "dropout rates must lie in [0, 1]");
  }
  require(c.ffn_factor >= 1, ErrorKind::InvalidValue, "ffn_factor must be positive");
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch = 16;
  double lr = 0.003;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LossKind loss = LossKind::Xent;
  bool debug = false;
};

inline void validate(const TrainConfig& t) {
  require(t.epochs >= 1 && t.batch >= 1, ErrorKind::InvalidValue, "epochs and batch must be positive");
  require(t.lr >= 0.0 && t.weight_decay >= 0.0, ErrorKind::InvalidValue, "lr and weight_decay must be non-negative");
  require(t.beta1 >= 0.0 && t.beta1 < 1.0 && t.beta2 >= 0.0 && t.beta2 < 1.0 && t.eps > 0.0, ErrorKind::InvalidValue,
          "invalid Adam hyperparameters");
}

// ---------------------------------------------------------------------------
// key=value form, shared by checkpoints and config files.

namespace detail {

inline bool parse_bool(std::string_view v, std::string_view key) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  fail(ErrorKind::InvalidValue, std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

inline std::size_t parse_size(std::string_view v, std::string_view key) {
  auto x = text::to_uint(v);
  require(x.has_value(), ErrorKind::InvalidValue, std::string(key) + ": expected a non-negative integer, got '" +
                                                      std::string(v) + "'");
  return static_cast<std::size_t>(*x);
}

inline double parse_real(std::string_view v, std::string_view key) {
  auto x = text::to_double(v);
  require(x.has_value(), ErrorKind::InvalidValue, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return *x;
}

inline std::string join_uints(const std::vector<unsigned>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace detail

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues to_kv(const LayerConfig& c) {
  using namespace detail;
  auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  auto f = [](double v) { return text::format_double(v); };
  return {
      {"in_dim", std::to_string(c.in_dim)},
      {"out_dim", std::to_string(c.out_dim)},
      {"l", std::to_string(c.l)},
      {"d", std::to_string(c.d)},
      {"m", std::to_string(c.m)},
      {"layers", std::to_string(c.num_layers)},
      {"inner_type", std::string(kInner.name(c.inner))},
      {"t4_second", std::string(kInner.name(c.t4_second))},
      {"agg", std::string(kAgg.name(c.agg))},
      {"self_term", b(c.self_term)},
      {"gate", std::string(kGate.name(c.gate))},
      {"gate_act", std::string(kAct.name(c.gate_act))},
      {"wb", std::string(kWB.name(c.wb))},
      {"wb_act", std::string(kAct.name(c.wb_act))},
      {"local", std::string(kLocal.name(c.local))},
      {"readout", std::string(kReadout.name(c.readout))},
      {"level", std::string(kLevel.name(c.level))},
      {"phi", std::string(kPhiMode.name(c.phi.mode))},
      {"phi_exponents", join_uints(c.phi.exponents)},
      {"phi_hidden", std::to_string(c.phi.hidden)},
      {"phi_pool", std::string(kPooling.name(c.phi.pool))},
      {"phi_clip", f(c.phi.clip)},
      {"phi_act", std::string(kAct.name(c.phi.act))},
      {"phi_c", std::string(kPhiSharing.name(c.phi_c))},
      {"layer_norm", b(c.layer_norm)},
      {"ffn", b(c.ffn)},
      {"ffn_factor", std::to_string(c.ffn_factor)},
      {"ffn_act", std::string(kAct.name(c.ffn_act))},
      {"dropout_ffn", f(c.dropout.ffn)},
      {"dropout_local", f(c.dropout.local)},
      {"dropout_residual", f(c.dropout.residual)},
      {"dropout_gmn", f(c.dropout.gmn)},
      {"precision", std::string(kPrecision.name(c.precision))},
  };
}

/// Returns false when `key` is not a layer key.
inline bool apply_kv(LayerConfig& c, std::string_view key, std::string_view v) {
  using namespace detail;
  if (key == "in_dim") c.in_dim = parse_size(v, key);
  else if (key == "out_dim") c.out_dim = parse_size(v, key);
  else if (key == "l") c.l = parse_size(v, key);
  else if (key == "d") c.d = parse_size(v, key);
  else if (key == "m") c.m = parse_size(v, key);
  else if (key == "layers") c.num_layers = parse_size(v, key);
  else if (key == "inner_type") c.inner = kInner.parse(v, key);
  else if (key == "t4_second") c.t4_second = kInner.parse(v, key);
  else if (key == "agg") c.agg = kAgg.parse(v, key);
  else if (key == "self_term") c.self_term = parse_bool(v, key);
  else if (key == "gate") c.gate = kGate.parse(v, key);
  else if (key == "gate_act") c.gate_act = kAct.parse(v, key);
  else if (key == "wb") c.wb = kWB.parse(v, key);
  else if (key == "wb_act") c.wb_act = kAct.parse(v, key);
  else if (key == "local") c.local = kLocal.parse(v, key);
  else if (key == "readout") c.readout = kReadout.parse(v, key);
  else if (key == "level") c.level = kLevel.parse(v, key);
  else if (key == "phi") c.phi.mode = kPhiMode.parse(v, key);
  else if (key == "phi_exponents") {
    c.phi.exponents.clear();
    if (!text::trim(v).empty()) {
      for (const auto& part : text::split(v, ',')) {
        c.phi.exponents.push_back(static_cast<unsigned>(parse_size(text::trim(part), key)));
      }
    }
  } else if (key == "phi_hidden") c.phi.hidden = parse_size(v, key);
  else if (key == "phi_pool") c.phi.pool = kPooling.parse(v, key);
  else if (key == "phi_clip") c.phi.clip = parse_real(v, key);
  else if (key == "phi_act") c.phi.act = kAct.parse(v, key);
  else if (key == "phi_c") c.phi_c = kPhiSharing.parse(v, key);
  else if (key == "layer_norm") c.layer_norm = parse_bool(v, key);
  else if (key == "ffn") c.ffn = parse_bool(v, key);
  else if (key == "ffn_factor") c.ffn_factor = parse_size(v, key);
  else if (key == "ffn_act") c.ffn_act = kAct.parse(v, key);
  else if (key == "dropout_ffn") c.dropout.ffn = parse_real(v, key);
  else if (key == "dropout_local") c.dropout.local = parse_real(v, key);
  else if (key == "dropout_residual") c.dropout.residual = parse_real(v, key);
  else if (key == "dropout_gmn") c.dropout.gmn = parse_real(v, key);
  else if (key == "precision") c.precision = kPrecision.parse(v, key);
  else return false;
  return true;
}

inline KeyValues to_kv(const TrainConfig& t) {
  auto f = [](double v) { return text::format_double(v); };
  return {
      {"epochs", std::to_string(t.epochs)},
      {"batch", std::to_string(t.batch)},
      {"lr", f(t.lr)},
      {"weight_decay", f(t.weight_decay)},
      {"seed", std::to_string(t.seed)},
      {"beta1", f(t.beta1)},
      {"beta2", f(t.beta2)},
      {"eps", f(t.eps)},
      {"loss", std::string(detail::kLoss.name(t.loss))},
      {"debug", t.debug ? "1" : "0"},
  };
}

inline bool apply_kv(TrainConfig& t, std::string_view key, std::string_view v) {
  using namespace detail;
  if (key == "epochs") t.epochs = parse_size(v, key);
  else if (key == "batch") t.batch = parse_size(v, key);
  else if (key == "lr") t.lr = parse_real(v, key);
  else if (key == "weight_decay" || key == "wd") t.weight_decay = parse_real(v, key);
  else if (key == "seed") t.seed = parse_size(v, key);
  else if (key == "beta1") t.beta1 = parse_real(v, key);
  else if (key == "beta2") t.beta2 = parse_real(v, key);
  else if (key == "eps") t.eps = parse_real(v, key);
  else if (key == "loss") t.loss = kLoss.parse(v, key);
  else if (key == "debug") t.debug = parse_bool(v, key);
  else return false;
  return true;
}

// ---------------------------------------------------------------------------
// Named shape/hyperparameter presets (hidden width, local method, depth,
// eigenvector count, batch, learning rate, weight decay, dropouts
// ffn/local/residual/gmn).

struct Preset {
  std::string_view name;
  std::size_t l;
  LocalKind local;
  std::size_t layers;
  std::size_t lap_dim;
  std::size_t batch;
  double lr;
  double wd;
  DropoutRates dropout;
  Level level;
  LossKind loss;
  std::size_t in_dim;
  std::size_t out_dim;
};

inline const std::vector<Preset>& presets() {
  using L = LocalKind;
  static const std::vector<Preset> table{
      {"zinc-like", 64, L::GcnLite, 10, 16, 32, 0.001, 1e-5, {0.1, 0.0, 0.6, 0.0}, Level::Graph, LossKind::Mae, 28, 1},
      {"molhiv-like", 64, L::GatedGcnLite, 6, 16, 128, 0.002, 0.001, {0.1, 0.3, 0.1, 0.1}, Level::Graph, LossKind::Bce, 9, 1},
      {"mnist-like", 52, L::GatedGcnLite, 3, 32, 16, 0.005, 0.01, {0.1, 0.1, 0.1, 0.4}, Level::Graph, LossKind::Xent, 3, 10},
      {"cifar10-like", 52, L::GatedGcnLite, 3, 32, 16, 0.005, 0.01, {0.1, 0.1, 0.1, 0.0}, Level::Graph, LossKind::Xent, 5, 10},
      {"pattern-like", 36, L::GatedGcnLite, 24, 32, 32, 0.001, 0.1, {0.1, 0.1, 0.5, 0.0}, Level::Node, LossKind::Xent, 3, 2},
      {"cluster-like", 36, L::GatedGcnLite, 24, 32, 16, 0.001, 0.1, {0.1, 0.3, 0.3, 0.0}, Level::Node, LossKind::Xent, 7, 6},
      {"malnet-like", 64, L::GatedGcnLite, 5, 0, 16, 0.0015, 1e-5, {0.1, 0.1, 0.35, 0.05}, Level::Graph, LossKind::Xent, 1, 5},
      {"peptides-like", 100, L::GatedGcnLite, 3, 31, 256, 0.003, 0.1, {0.0, 0.1, 0.1, 0.3}, Level::Graph, LossKind::Bce, 9, 10},
      {"peptides-struct-like", 100, L::GatedGcnLite, 3, 31, 128, 0.003, 0.1, {0.0, 0.1, 0.1, 0.5}, Level::Graph, LossKind::Mae, 9, 11},
      {"pascalvoc-like", 96, L::GatedGcnLite, 4, 63, 16, 0.002, 0.1, {0.0, 0.0, 0.5, 0.0}, Level::Node, LossKind::Xent, 14, 21},
  };
  return table;
}

/// Applies a preset on top of the defaults. The malnet row uses no
/// eigenvectors: phi on C is zero, phi on A is the constant power s = 0 and
/// the combination is additive; d then only sets the width of W.
inline void apply_preset(std::string_view name, LayerConfig& layer, TrainConfig& train) {
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    layer.l = p.l;
    layer.local = p.local;
    layer.num_layers = p.layers;
    layer.d = p.lap_dim;
    layer.dropout = p.dropout;
    layer.level = p.level;
    layer.in_dim = p.in_dim;
    layer.out_dim = p.out_dim;
    train.batch = p.batch;
    train.lr = p.lr;
    train.weight_decay = p.wd;
    train.loss = p.loss;
    if (name == "malnet-like") {
      layer.d = 8;
      layer.phi.mode = PhiMode::Power;
      layer.phi.exponents.assign(layer.m, 0U);
      layer.phi_c = PhiSharing::Zero;
      layer.agg = Agg::Add;
    }
    return;
  }
  std::string names;
  for (const auto& p : presets()) names += (names.empty() ? "" : ", ") + std::string(p.name);
  fail(ErrorKind::InvalidValue, "preset: unknown '" + std::string(name) + "' (known: " + names + ")");
}

}  // namespace gmn
