// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "gmn/generators.hpp"
#include "gmn/hybrid.hpp"
#include "gmn/verify/report.hpp"

namespace gmn::verify {

struct BenchRow {
  std::size_t n = 0;
  std::size_t edges = 0;
  std::uint64_t flops = 0;
  std::size_t peak_bytes = 0;  // allocated above the live inputs during the forward pass
  double wall_s = 0;           // best of `repeats`
  double spectral_s = 0;       // one-off eigensolve, not part of the forward pass
};

/// Default model at node level in single precision.
inline LayerConfig bench_config() {
  LayerConfig c;
  c.level = Level::Node;
  c.precision = Precision::F32;
  return c;
}

struct BenchOptions {
  std::vector<std::size_t> ns{1000, 2000, 5000, 10000, 20000};
  double avg_degree = 5.0;
  LayerConfig config = bench_config();
  std::uint64_t seed = 0;
  std::size_t repeats = 3;
  double min_time_s = 1.0;  // keep repeating small sizes until this much time is spent
};

namespace detail {

template <std::floating_point Real>
BenchRow measure(const Graph& g, const SpectralCache& cache, const LayerConfig& c, const ParamSet& ps,
                 const num::Tensor<double>& x, std::size_t repeats, double min_time_s) {
  const auto local = local_structure(g);
  const GraphInput in{&g, &cache, &local};
  BenchRow row;
  row.n = g.num_nodes();
  row.edges = g.num_edges();
  row.wall_s = std::numeric_limits<double>::infinity();
  double spent = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1) || spent < min_time_s; ++r) {
    const auto live = num::memory_stats().live_bytes;
    num::reset_peak_memory();
    const auto flops0 = num::flop_counter();
    const auto t0 = std::chrono::steady_clock::now();
    {
      num::Tape<Real> tape;
      const Bound<Real> bound(tape, ps);
      model_forward(in, tape.constant(x.template cast<Real>()), bound, c, RunMode{});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.wall_s = std::min(row.wall_s, wall);
    spent += wall;
    row.flops = num::flop_counter() - flops0;
    row.peak_bytes = num::memory_stats().peak_bytes - live;
  }
  return row;
}

}  // namespace detail

/// Forward cost of the configured model on ER graphs of growing size.
inline std::vector<BenchRow> bench_scaling(const BenchOptions& o) {
  auto c = o.config;
  validate(c);
  const auto ps = init_params(c, o.seed);
  std::vector<BenchRow> rows;
  for (auto n : o.ns) {
    const auto g = er_avg_degree(n, o.avg_degree, hash_key({o.seed, n}));
    const auto t0 = std::chrono::steady_clock::now();
    const auto cache = spectral_cache(g, Normalization::Sym, c.d);
    const double spectral_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    num::Tensor<double> x({n, c.in_dim > 0 ? c.in_dim : c.l});
    Rng rng(hash_key({o.seed, n, 0x78ULL}));
    for (auto& v : x.data()) v = rng.uniform(-1, 1);
    auto row = c.precision == Precision::F32 ? detail::measure<float>(g, cache, c, ps, x, o.repeats, o.min_time_s)
                                             : detail::measure<double>(g, cache, c, ps, x, o.repeats, o.min_time_s);
    row.spectral_s = spectral_s;
    rows.push_back(row);
  }
  return rows;
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

/// Ordinary least squares y = a x + b with the coefficient of determination.
inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::InvalidParams, "fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

struct ScalingThresholds {
  double min_r2 = 0.98;
  double flop_ratio_lo = 1.9;
  double flop_ratio_hi = 2.1;
  double max_wall_ratio = 25.0;
};

/// Linear fits of FLOPs and bytes against n, FLOPs(2n)/FLOPs(n) on the first
/// doubling pair, and wall(n_max)/wall(n_min).
inline PropertyReport scaling_report(const std::vector<BenchRow>& rows, const ScalingThresholds& th = {}) {
  require(rows.size() >= 2, ErrorKind::InvalidParams, "scaling report needs two or more sizes");
  std::vector<double> n, flops, bytes;
  for (const auto& r : rows) {
    n.push_back(static_cast<double>(r.n));
    flops.push_back(static_cast<double>(r.flops));
    bytes.push_back(static_cast<double>(r.peak_bytes));
  }
  const auto ff = fit_linear(n, flops), bf = fit_linear(n, bytes);
  double flop_ratio = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < rows.size() && std::isnan(flop_ratio); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].n == 2 * rows[i].n) {
        flop_ratio = flops[j] / flops[i];
        break;
      }
    }
  }
  const double wall_ratio = rows.back().wall_s / rows.front().wall_s;
  PropertyReport r;
  r.name = "linear_scaling";
  r.trials = rows.size();
  r.add("flops_r2", ff.r2);
  r.add("bytes_r2", bf.r2);
  r.add("flops_per_node", ff.slope);
  r.add("bytes_per_node", bf.slope);
  r.add("flop_ratio_2n", flop_ratio);
  r.add("wall_ratio", wall_ratio);
  r.pass = ff.r2 >= th.min_r2 && bf.r2 >= th.min_r2 && flop_ratio >= th.flop_ratio_lo &&
           flop_ratio <= th.flop_ratio_hi && wall_ratio <= th.max_wall_ratio;
  return r;
}

/// FLOPs of one GMN layer when m doubles at fixed n, d, l.
inline double m_doubling_ratio(LayerConfig c, std::size_t n, double avg_degree, std::uint64_t seed) {
  const auto g = er_avg_degree(n, avg_degree, seed);
  const auto cache = spectral_cache(g, Normalization::Sym, c.d);
  num::Tensor<double> x({n, c.l}, 0.5);
  auto flops = [&](const LayerConfig& cc) {
    const auto ps = init_params(cc, seed);
    num::Tape<double> tape;
    const Bound<double> bound(tape, ps);
    const auto f0 = num::flop_counter();
    gmn_forward(cache, tape.constant(x), ParamView<double>{&bound, "layer0.gmn"}, cc);
    return static_cast<double>(num::flop_counter() - f0);
  };
  const double base = flops(c);
  c.m *= 2;
  if (c.phi.mode == PhiMode::Power && !c.phi.exponents.empty()) c.phi.exponents.clear();
  return flops(c) / base;
}

/// With `fit`, every row also carries the R^2 of the FLOP and byte fits.
inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows,
                            const PropertyReport* fit = nullptr) {
  out << "n,edges,flops,peak_bytes,wall_s,spectral_s" << (fit ? ",flops_r2,bytes_r2" : "") << '\n';
  for (const auto& r : rows) {
    out << r.n << ',' << r.edges << ',' << r.flops << ',' << r.peak_bytes << ',' << text::format_double(r.wall_s) << ','
        << text::format_double(r.spectral_s);
    if (fit) out << ',' << text::format_double(fit->get("flops_r2")) << ',' << text::format_double(fit->get("bytes_r2"));
    out << '\n';
  }
}

/// Whitespace-separated columns for plotting tools.
inline void write_bench_dat(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "# n flops peak_bytes wall_s\n";
  for (const auto& r : rows) out << r.n << ' ' << r.flops << ' ' << r.peak_bytes << ' ' << r.wall_s << '\n';
}

}  // namespace gmn::verify
