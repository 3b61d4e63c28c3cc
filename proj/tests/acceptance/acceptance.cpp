// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "gmn/fd_check.hpp"
#include "gmn/verify/robustness.hpp"
#include "gmn/verify/suite.hpp"
#include "../support/gmn_oracle.hpp"

namespace gmn {
namespace {

using T = num::Tensor<double>;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

T random_features(std::size_t n, std::size_t l, std::uint64_t seed) {
  T x({n, l});
  Rng rng(seed);
  for (auto& v : x.data()) v = rng.uniform(-1, 1);
  return x;
}

LayerConfig bare(std::size_t l, std::size_t d, std::size_t m) {
  LayerConfig c;
  c.l = l;
  c.d = d;
  c.m = m;
  c.num_layers = 1;
  c.local = LocalKind::None;
  c.layer_norm = false;
  c.ffn = false;
  return c;
}

// 1 -------------------------------------------------------------------------
Outcome mingru() {
  const auto t0 = Clock::now();
  const auto r = verify::mingru_closed_form(50, 64, 8, 1e-9);
  const double s = seconds_since(t0);
  return {r.pass && s < 1.0, "max|diff|=" + fmt(r.get("max_abs_diff")) + " over 50 seeds, " + fmt(s) + " s"};
}

// 2 -------------------------------------------------------------------------
// Task loss of the whole model (encoder, hybrid layers, head) against central
// differences in the features and every parameter tensor.
double gradient_error(const LayerConfig& c, const Graph& g, std::uint64_t seed) {
  const auto cache = spectral_cache(g, Normalization::Sym, c.d);
  const auto local = local_structure(g);
  const GraphInput in{&g, &cache, &local};
  const auto ps = init_params(c, seed);
  std::vector<std::string> names;
  std::vector<T> inputs{random_features(g.num_nodes(), c.in_dim > 0 ? c.in_dim : c.l, seed)};
  for (const auto& [name, t] : ps) {
    names.push_back(name);
    inputs.push_back(t);
  }
  Rng lr(hash_key({seed, 0x6c62ULL}));
  Labels labels;
  if (c.level == Level::Node) {
    labels.level = LabelLevel::Node;
    for (std::size_t u = 0; u < g.num_nodes(); ++u) labels.values.push_back(std::floor(lr.uniform() * double(c.out_dim)));
  } else {
    labels.level = LabelLevel::Graph;
    labels.values.push_back(lr.uniform(-1, 1));
  }
  const LossKind kind = c.level == Level::Node ? LossKind::Xent : LossKind::Mae;
  auto f = [&](num::Tape<double>&, const std::vector<Var<double>>& v) {
    std::map<std::string, Var<double>> vars;
    for (std::size_t i = 0; i < names.size(); ++i) vars.emplace(names[i], v[i + 1]);
    const Bound<double> bound(std::move(vars));
    const auto out = model_forward(in, v[0], bound, c, RunMode{true, hash_key({seed, 0x6470ULL})});
    // squared error keeps the regression loss smooth for the difference quotient
    if (kind == LossKind::Mae) return num::mse_loss(out, out.tape->constant(T({1, 1}, labels.values[0])));
    return task_loss(out, labels, kind);
  };
  return num::fd_check(f, inputs).max_rel_error;
}

Outcome gradients() {
  const auto t0 = Clock::now();
  std::vector<std::pair<LayerConfig, Graph>> cases;
  {
    auto c = bare(4, 4, 2);
    c.num_layers = 2;
    c.in_dim = 3;
    c.out_dim = 3;
    c.level = Level::Node;
    c.local = LocalKind::GcnLite;
    c.layer_norm = c.ffn = true;
    c.dropout = {0.1, 0.1, 0.1, 0.1};
    cases.emplace_back(c, er_avg_degree(10, 3, 1));
    c.inner = InnerType::T1;
    c.agg = Agg::Add;
    c.self_term = true;
    c.gate = GateMode::NLP;
    c.wb = WBMode::Nonlinear;
    c.local = LocalKind::GatedGcnLite;
    c.phi_c = PhiSharing::Separate;
    cases.emplace_back(c, er_avg_degree(12, 3, 2));
    c.inner = InnerType::T3;
    c.phi.mode = PhiMode::Power;
    c.phi.exponents = {1, 2};
    c.phi_c = PhiSharing::Shared;
    cases.emplace_back(c, cycle_graph(8));
    c.inner = InnerType::T2;
    c.m = c.l;
    c.phi.exponents.clear();
    c.level = Level::Graph;
    c.out_dim = 1;
    c.readout = Readout::Sum;
    cases.emplace_back(c, er_avg_degree(11, 3, 3));
  }
  double worst = 0;
  std::uint64_t seed = 0;
  for (const auto& [c, g] : cases) worst = std::max(worst, gradient_error(c, g, ++seed));
  const double s = seconds_since(t0);
  return {worst <= 1e-5 && s < 120.0,
          "max relative error " + fmt(worst) + " over " + std::to_string(cases.size()) + " models, " + fmt(s) + " s"};
}

// 3 -------------------------------------------------------------------------
Outcome equivariance() {
  const auto r = verify::equivariance_sweep(LayerConfig{}, 20, 100, 0, 1e-6);
  return {r.pass, "max deviation " + fmt(r.get("max_deviation")) + " over 16 variants x 100 permutations"};
}

// 4 -------------------------------------------------------------------------
Outcome factored_vs_pairwise() {
  double worst = 0, worst_t4 = 0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  for (auto inner : {InnerType::T1, InnerType::T2, InnerType::T3, InnerType::T4}) {
    for (auto agg : {Agg::Mul, Agg::Add}) {
      for (bool self : {false, true}) {
        auto c = bare(3, 6, 3);
        c.inner = inner;
        c.agg = agg;
        c.self_term = self;
        for (std::size_t n : {6u, 12u, 20u, 32u}) {
          ++seed;
          const auto g = n == 6 ? cycle_graph(6) : er_avg_degree(n, 3, seed);
          const auto cache = spectral_cache(g, Normalization::Sym, c.d);
          const auto ps = init_params(c, seed);
          const auto x = random_features(n, c.l, seed);
          const oracle::LayerOracle o{ps, "layer0.gmn"};
          num::Tape<double> tape;
          const Bound<double> b(tape, ps);
          const auto got = gmn_forward(cache, tape.constant(x), ParamView<double>{&b, "layer0.gmn"}, c).value();
          const double diff = oracle::max_abs_diff(o.forward(c, cache, oracle::to_mat(x)), got);
          (inner == InnerType::T4 ? worst_t4 : worst) = std::max(inner == InnerType::T4 ? worst_t4 : worst, diff);
          ++runs;
        }
      }
    }
  }
  return {worst <= 1e-10 && worst_t4 <= 1e-10,
          "T1-T3 max|diff|=" + fmt(worst) + ", T4 max|diff|=" + fmt(worst_t4) + " over " + std::to_string(runs) +
              " runs, n<=32"};
}

// 5 -------------------------------------------------------------------------
Outcome lrd() {
  const auto t0 = Clock::now();
  const auto r = verify::grad_profile_lrd();
  const double s = seconds_since(t0);
  return {r.pass && s < 60.0, "min ratio " + fmt(r.get("gmn_min_ratio")) + " (floor 0.25), gcn_lite ratio " +
                                  fmt(r.get("gcn_ratio_at_max_spd")) + " (ceiling 0.1), fd rel error " +
                                  fmt(r.get("fd_max_rel_error")) + ", " + fmt(s) + " s"};
}

// 6 -------------------------------------------------------------------------
Outcome scaling() {
  const auto t0 = Clock::now();
  const auto rows = verify::bench_scaling({});
  const auto r = verify::scaling_report(rows);
  const double s = seconds_since(t0);
  return {r.pass && s < 300.0, "R2 flops " + fmt(r.get("flops_r2")) + ", bytes " + fmt(r.get("bytes_r2")) +
                                   "; FLOPs(2n)/FLOPs(n) " + fmt(r.get("flop_ratio_2n")) + "; wall 20k/1k " +
                                   fmt(r.get("wall_ratio")) + "; " + fmt(s) + " s"};
}

// 7 -------------------------------------------------------------------------
Outcome expressiveness() {
  const auto corpus = verify::wl_corpus();
  bool certified = corpus.size() >= 10;
  for (const auto& p : corpus) certified = certified && verify::wl_equivalent(p.a, p.b) && verify::spectra_differ(p.a, p.b);
  const auto r = verify::expressiveness_suite(corpus, verify::isomorphic_controls(corpus, 0));
  return {certified && r.pass, std::to_string(corpus.size()) + " certified pairs; " + fmt(r.get("good_seeds")) +
                                   "/5 seeds separate >= 90%; min pair distance " + fmt(r.get("min_pair_distance")) +
                                   "; max control distance " + fmt(r.get("max_control_distance"))};
}

// 8 -------------------------------------------------------------------------
Outcome stability() {
  double feat = 0, spec = 0;
  bool pass = true;
  for (auto inner : {InnerType::T1, InnerType::T2, InnerType::T3, InnerType::T4}) {
    auto c = verify::stability_config(LayerConfig{});
    c.inner = inner;
    if (inner == InnerType::T2) c.m = c.l;
    const std::size_t n = 20;
    const auto g = er_avg_degree(n, 4.0, 11);
    const auto cache = spectral_cache(g, Normalization::Sym, c.d);
    const auto r = verify::stability_probe(verify::gmn_layer_fn(c, init_params(c, 0)), cache,
                                           random_features(n, c.l, 12));
    pass = pass && r.pass;
    feat = std::max(feat, r.get("feature_spread"));
    spec = std::max(spec, r.get("spectral_spread"));
  }
  const auto weyl = verify::weyl_check(er_avg_degree(30, 4.0, 13), Normalization::Sym, 100, 0, 1e-2, 1e-8);
  return {pass && weyl.pass, "worst max/min feature " + fmt(feat) + ", spectral " + fmt(spec) +
                                 " (band 3, T1-T4); Weyl excess " + fmt(weyl.get("max_excess_over_bound"))};
}

// 9, 10 ---------------------------------------------------------------------
struct SbmRun {
  Dataset data;
  TrainResult result;
  double seconds = 0;
};

SbmRun train_sbm() {
  SbmRun run;
  const auto c = sbm_layer_config(4);
  run.data = sbm_dataset(SbmTask{}, c.d, 0);
  TrainConfig t;
  t.seed = 0;
  TrainOptions opts;
  opts.on_epoch = [](const EpochRecord& e) {
    if (e.epoch % 10 == 0) std::cerr << "  sbm epoch " << e.epoch << " val_accuracy " << e.val_metric << '\n';
  };
  const auto t0 = Clock::now();
  run.result = train(run.data, c, t, opts);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome sbm_training(const SbmRun& run) {
  const auto& r = run.result.report;
  return {r.test_metric >= 0.95 && r.epochs.size() <= 100 && run.seconds < 600.0 && r.majority_baseline == 0.25,
          "test accuracy " + fmt(r.test_metric) + " (best epoch " + std::to_string(r.best_epoch) + "/" +
              std::to_string(r.epochs.size()) + "), majority baseline " + fmt(r.majority_baseline) + ", " +
              fmt(run.seconds) + " s"};
}

Outcome robustness(const SbmRun& run) {
  const auto& ck = run.result.checkpoint;
  const auto& test = run.data.split.test;
  const auto clean = evaluate(ck, run.data, test);
  const auto rows = verify::robustness_sweep(ck, run.data, test, {0.0, 0.3},
                                             {verify::NoiseKind::White, verify::NoiseKind::SignalDependent}, 0);
  bool identical = true, within = true;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    const auto &zero = rows[i], &noisy = rows[i + 1];
    identical = identical && zero.metric == clean.accuracy() && zero.loss == clean.loss();
    within = within && zero.metric - noisy.metric <= 0.10;
    detail += std::string(verify::to_string(zero.kind)) + " " + fmt(zero.metric) + " -> " + fmt(noisy.metric) + "; ";
  }
  return {identical && within, detail + "eps=0 identical to clean: " + (identical ? "yes" : "no")};
}

// 11 ------------------------------------------------------------------------
Outcome param_count_ballpark() {
  LayerConfig c;
  TrainConfig t;
  apply_preset("zinc-like", c, t);
  const auto total = param_count(c);
  std::size_t sum = 0;
  std::string parts;
  for (const auto& [group, n] : param_breakdown(c)) {
    sum += n;
    parts += " " + group + "=" + std::to_string(n);
  }
  const double ratio = double(total) / 415280.0;
  return {ratio >= 0.5 && ratio <= 2.0 && sum == total,
          "param_count=" + std::to_string(total) + " (" + fmt(ratio) + "x 415.28K);" + parts};
}

}  // namespace
}  // namespace gmn

int main() {
  using namespace gmn;
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << std::endl;
  };
  report(1, "mingru_closed_form", mingru);
  report(2, "gradient_check", gradients);
  report(3, "permutation_equivariance", equivariance);
  report(4, "factored_vs_pairwise", factored_vs_pairwise);
  report(5, "long_range_dependency", lrd);
  report(6, "linear_scaling", scaling);
  report(7, "expressiveness_beyond_1wl", expressiveness);
  report(8, "lipschitz_stability", stability);
  std::optional<SbmRun> sbm;
  std::string sbm_error;
  try {
    sbm = train_sbm();
  } catch (const std::exception& e) {
    sbm_error = e.what();
  }
  auto need_sbm = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!sbm) return {false, "SBM training failed: " + sbm_error};
      return fn(*sbm);
    };
  };
  report(9, "noise_robustness", need_sbm(robustness));
  report(10, "sbm_training", need_sbm(sbm_training));
  report(11, "param_count_ballpark", param_count_ballpark);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures;
}
