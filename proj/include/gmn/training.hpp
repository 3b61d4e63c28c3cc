// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "gmn/checkpoint.hpp"
#include "gmn/generators.hpp"
#include "gmn/hybrid.hpp"

namespace gmn {

/// One graph with everything the forward pass needs precomputed.
struct Sample {
  Graph graph;
  SpectralCache cache;
  LocalStructure local;

  GraphInput input() const { return {&graph, &cache, &local}; }
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetSplit split;
  std::size_t num_classes = 0;  // 0 for regression
};

inline Sample make_sample(Graph g, std::size_t d, Normalization norm = Normalization::Sym, EigOptions opts = {}) {
  Sample s{std::move(g), {}, {}};
  s.cache = spectral_cache(s.graph, norm, d, opts);
  s.local = local_structure(s.graph);
  return s;
}

inline Dataset make_dataset(std::vector<Graph> graphs, DatasetSplit split, std::size_t d,
                            Normalization norm = Normalization::Sym) {
  require(is_valid_split(split, graphs.size()), ErrorKind::InvalidParams, "split does not partition the dataset");
  Dataset ds;
  ds.split = std::move(split);
  for (auto& g : graphs) {
    const auto task = g.task();
    if (task == TaskKind::NodeClass || task == TaskKind::GraphClass) {
      for (double v : g.labels().values) ds.num_classes = std::max(ds.num_classes, static_cast<std::size_t>(v) + 1);
    }
    ds.samples.push_back(make_sample(std::move(g), d, norm));
  }
  return ds;
}

struct SbmTask {
  std::size_t graphs = 300;
  std::size_t train = 200;
  std::size_t val = 50;
  SbmParams params;
};

/// i.i.d. SBM graphs (graph i uses seed hash(seed, i)); the split is by index.
inline Dataset sbm_dataset(const SbmTask& task, std::size_t d, std::uint64_t seed) {
  require(task.train + task.val <= task.graphs, ErrorKind::InvalidParams, "sbm split larger than dataset");
  std::vector<Graph> graphs;
  DatasetSplit split;
  split.task = TaskKind::NodeClass;
  for (std::size_t i = 0; i < task.graphs; ++i) {
    graphs.push_back(sbm(task.params, hash_key({seed, i})));
    auto& part = i < task.train ? split.train : i < task.train + task.val ? split.val : split.test;
    part.push_back(i);
  }
  return make_dataset(std::move(graphs), std::move(split), d);
}

/// Mean-reduced loss of a prediction against a graph's labels.
template <std::floating_point Real>
Var<Real> task_loss(Var<Real> pred, const Labels& labels, LossKind kind) {
  const auto& y = labels.values;
  switch (kind) {
    case LossKind::Xent: {
      std::vector<std::uint32_t> t;
      for (double v : y) t.push_back(static_cast<std::uint32_t>(v));
      return num::cross_entropy(pred, std::move(t));
    }
    case LossKind::Bce: return num::bce_with_logits(pred, std::vector<Real>(y.begin(), y.end()));
    case LossKind::Mae: {
      require(pred.value().size() == y.size(), ErrorKind::ShapeMismatch, "mae needs one target per output");
      num::Tensor<Real> target(pred.shape());
      for (std::size_t i = 0; i < y.size(); ++i) target[i] = static_cast<Real>(y[i]);
      return num::l1_loss(pred, pred.tape->constant(std::move(target)));
    }
  }
  fail(ErrorKind::InvalidValue, "unknown loss kind");
}

/// Sums over graphs; `accuracy()` and `mae()` pool every scored row.
struct EvalResult {
  double loss_sum = 0;
  std::size_t graphs = 0;
  std::size_t correct = 0;
  std::size_t scored = 0;
  double abs_err = 0;

  double loss() const { return graphs ? loss_sum / static_cast<double>(graphs) : 0.0; }
  double accuracy() const { return scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0; }
  double mae() const { return scored ? abs_err / static_cast<double>(scored) : 0.0; }
  /// Accuracy for classification losses, MAE for regression.
  double metric(LossKind kind) const { return kind == LossKind::Mae ? mae() : accuracy(); }
};

namespace detail {

template <std::floating_point Real>
void score(EvalResult& r, const num::Tensor<Real>& out, const Labels& labels, LossKind kind) {
  const auto& y = labels.values;
  if (kind == LossKind::Xent) {
    const std::size_t rows = out.dim(0), c = out.dim(1);
    for (std::size_t i = 0; i < rows; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j) {
        if (out(i, j) > out(i, best)) best = j;
      }
      r.correct += best == static_cast<std::size_t>(y[i]) ? 1 : 0;
    }
    r.scored += rows;
  } else if (kind == LossKind::Bce) {
    for (std::size_t i = 0; i < out.size(); ++i) r.correct += (out[i] > 0) == (y[i] > 0.5) ? 1 : 0;
    r.scored += out.size();
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) r.abs_err += std::abs(static_cast<double>(out[i]) - y[i]);
    r.scored += out.size();
  }
}

// Forward (and optionally backward) on one sample. Gradients are added to
// `grads` when it is non-null.
template <std::floating_point Real>
double run_sample(const Sample& s, const ParamSet& ps, const LayerConfig& c, LossKind kind, const RunMode& mode,
                  EvalResult* eval, ParamSet* grads) {
  num::Tape<Real> tape;
  const Bound<Real> bound(tape, ps);
  const auto out = model_forward(s.input(), features_of(tape, s.graph), bound, c, mode);
  const auto loss = task_loss(out, s.graph.labels(), kind);
  if (eval) {
    eval->loss_sum += static_cast<double>(loss.value().item());
    ++eval->graphs;
    score(*eval, out.value(), s.graph.labels(), kind);
  }
  if (grads) {
    const auto g = gradients_of(bound, num::backward(tape, loss));
    for (const auto& [name, t] : g) {
      auto it = grads->find(name);
      if (it == grads->end()) {
        grads->emplace(name, t);
        continue;
      }
      for (std::size_t i = 0; i < t.size(); ++i) it->second[i] += t[i];
    }
  }
  return static_cast<double>(loss.value().item());
}

inline double run_sample(const Sample& s, const ParamSet& ps, const LayerConfig& c, LossKind kind,
                         const RunMode& mode, EvalResult* eval, ParamSet* grads) {
  if (c.precision == Precision::F32) return run_sample<float>(s, ps, c, kind, mode, eval, grads);
  return run_sample<double>(s, ps, c, kind, mode, eval, grads);
}

}  // namespace detail

/// Checks that a config can consume the dataset's features and labels.
inline void check_compatible(const LayerConfig& c, const Dataset& ds, LossKind kind) {
  const std::size_t want = c.in_dim > 0 ? c.in_dim : c.l;
  for (const auto& s : ds.samples) {
    require(s.graph.features().dim(1) == want, ErrorKind::ConfigMismatch,
            "features have width " + std::to_string(s.graph.features().dim(1)) + ", model expects " +
                std::to_string(want));
    require(s.cache.dim() == c.d, ErrorKind::ConfigMismatch,
            "spectral cache has d=" + std::to_string(s.cache.dim()) + ", model expects d=" + std::to_string(c.d));
  }
  if (kind == LossKind::Xent) {
    const std::size_t outputs = c.out_dim > 0 ? c.out_dim : c.l;
    require(ds.num_classes <= outputs, ErrorKind::ConfigMismatch,
            std::to_string(ds.num_classes) + " classes but only " + std::to_string(outputs) + " outputs");
  }
}

/// Dropout off, parameters untouched.
inline EvalResult evaluate(const Checkpoint& ck, const Dataset& ds, const std::vector<std::size_t>& indices) {
  check_params(ck.params, ck.layer);
  check_compatible(ck.layer, ds, ck.train.loss);
  EvalResult r;
  for (auto i : indices) detail::run_sample(ds.samples.at(i), ck.params, ck.layer, ck.train.loss, RunMode{}, &r, nullptr);
  return r;
}

/// Accuracy of always predicting the most frequent training class.
inline double majority_baseline(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<std::size_t> counts(std::max<std::size_t>(ds.num_classes, 1), 0);
  for (auto i : ds.split.train) {
    for (double v : ds.samples[i].graph.labels().values) ++counts.at(static_cast<std::size_t>(v));
  }
  const auto major = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::size_t hit = 0, total = 0;
  for (auto i : indices) {
    for (double v : ds.samples[i].graph.labels().values) {
      hit += v == major ? 1 : 0;
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

struct AdamState {
  ParamSet m, v;
  std::size_t step = 0;
};

/// p <- p (1 - lr wd), then the bias-corrected Adam update; the setagg phi
/// weights are clipped afterwards when `layer` is given.
inline void adam_step(ParamSet& ps, const ParamSet& grads, AdamState& st, const TrainConfig& t,
                      const LayerConfig* layer = nullptr) {
  ++st.step;
  const double c1 = 1.0 - std::pow(t.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(t.beta2, static_cast<double>(st.step));
  for (auto& [name, p] : ps) {
    auto git = grads.find(name);
    require(git != grads.end() && git->second.shape() == p.shape(), ErrorKind::ShapeMismatch,
            "missing or misshapen gradient for " + name);
    const auto& g = git->second;
    auto& m = st.m.try_emplace(name, p.shape()).first->second;
    auto& v = st.v.try_emplace(name, p.shape()).first->second;
    const double decay = 1.0 - t.lr * t.weight_decay;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = t.beta1 * m[i] + (1.0 - t.beta1) * g[i];
      v[i] = t.beta2 * v[i] + (1.0 - t.beta2) * g[i] * g[i];
      p[i] = p[i] * decay - t.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + t.eps);
    }
  }
  if (layer) clip_phi(ps, *layer);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_metric = 0;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  std::string metric;  // "accuracy" or "mae"
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_metric = 0;
  double test_loss = 0;
  double test_metric = 0;
  double majority_baseline = std::numeric_limits<double>::quiet_NaN();
  std::size_t param_count = 0;
  double wall_time_s = 0;
};

/// Equality of everything a run determines; wall time is excluded.
inline bool same_results(const MetricsReport& a, const MetricsReport& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  if (a.seed != b.seed || a.metric != b.metric || a.epochs.size() != b.epochs.size() || a.best_epoch != b.best_epoch ||
      !eq(a.best_val_metric, b.best_val_metric) || !eq(a.test_loss, b.test_loss) ||
      !eq(a.test_metric, b.test_metric) || !eq(a.majority_baseline, b.majority_baseline) ||
      a.param_count != b.param_count) {
    return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto &x = a.epochs[i], &y = b.epochs[i];
    if (x.epoch != y.epoch || !eq(x.train_loss, y.train_loss) || !eq(x.val_loss, y.val_loss) ||
        !eq(x.val_metric, y.val_metric)) {
      return false;
    }
  }
  return true;
}

inline void write_report(std::ostream& out, const MetricsReport& r) {
  auto f = [](double v) { return text::format_double(v); };
  out << "seed=" << r.seed << '\n'
      << "metric=" << r.metric << '\n'
      << "epochs=" << r.epochs.size() << '\n'
      << "best_epoch=" << r.best_epoch << '\n'
      << "best_val_" << r.metric << '=' << f(r.best_val_metric) << '\n'
      << "test_loss=" << f(r.test_loss) << '\n'
      << "test_" << r.metric << '=' << f(r.test_metric) << '\n';
  if (!std::isnan(r.majority_baseline)) out << "majority_baseline=" << f(r.majority_baseline) << '\n';
  out << "param_count=" << r.param_count << '\n' << "wall_time_s=" << f(r.wall_time_s) << '\n';
}

inline void write_epochs_csv(std::ostream& out, const MetricsReport& r) {
  out << "epoch,train_loss,val_loss,val_" << r.metric << '\n';
  for (const auto& e : r.epochs) {
    out << e.epoch << ',' << text::format_double(e.train_loss) << ',' << text::format_double(e.val_loss) << ','
        << text::format_double(e.val_metric) << '\n';
  }
}

/// Raised when a batch loss or update turns non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, Checkpoint last_good)
      : Error(ErrorKind::DivergenceDetected, message), last_good_(std::move(last_good)) {}

  const Checkpoint& last_good() const noexcept { return last_good_; }

 private:
  Checkpoint last_good_;
};

struct TrainResult {
  Checkpoint checkpoint;  // best validation epoch
  MetricsReport report;
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Starting parameters; drawn from the seed when empty.
  ParamSet init;
};

inline TrainResult train(const Dataset& ds, const LayerConfig& c, const TrainConfig& t, const TrainOptions& opts = {}) {
  validate(c);
  validate(t);
  require(!ds.split.train.empty() && !ds.split.val.empty(), ErrorKind::InvalidParams,
          "training needs nonempty train and val splits");
  check_compatible(c, ds, t.loss);
  const auto start = std::chrono::steady_clock::now();

  Checkpoint current{c, t, opts.init.empty() ? init_params(c, t.seed) : opts.init};
  check_params(current.params, c);
  Checkpoint best = current;
  AdamState adam;
  MetricsReport report;
  report.seed = t.seed;
  report.metric = t.loss == LossKind::Mae ? "mae" : "accuracy";
  report.param_count = param_count(c);
  const bool higher_better = t.loss != LossKind::Mae;
  double best_metric = 0, best_loss = 0;

  std::vector<std::size_t> order = ds.split.train;
  for (std::size_t epoch = 1; epoch <= t.epochs; ++epoch) {
    Rng shuffle_rng(hash_key({t.seed, epoch, 0x7368ULL}));
    order = ds.split.train;
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0;
    for (std::size_t b = 0; b < order.size(); b += t.batch) {
      const std::size_t e = std::min(order.size(), b + t.batch);
      ParamSet grads;
      double batch_loss = 0;
      for (std::size_t k = b; k < e; ++k) {
        const RunMode mode{true, hash_key({t.seed, epoch, order[k]})};
        batch_loss += detail::run_sample(ds.samples[order[k]], current.params, c, t.loss, mode, nullptr, &grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("non-finite training loss in epoch " + std::to_string(epoch), current);
      }
      const double inv = 1.0 / static_cast<double>(e - b);
      for (auto& [name, g] : grads) {
        for (auto& v : g.data()) v *= inv;
      }
      Checkpoint before = current;
      adam_step(current.params, grads, adam, t, &c);
      for (const auto& [name, p] : current.params) {
        for (double v : p.data()) {
          if (!std::isfinite(v)) throw DivergenceError("non-finite parameter " + name, std::move(before));
        }
      }
      loss_sum += batch_loss;
    }
    if (t.debug) {
      require(phi_within_clip(current.params, c), ErrorKind::InvalidValue, "phi weights escaped the clip bound");
    }
    const auto val = evaluate(current, ds, ds.split.val);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), val.loss(), val.metric(t.loss)};
    report.epochs.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
    const double m = rec.val_metric;
    const bool better = epoch == 1 || (higher_better ? m > best_metric : m < best_metric) ||
                        (m == best_metric && rec.val_loss < best_loss);
    if (better) {
      best = current;
      best_metric = m;
      best_loss = rec.val_loss;
      report.best_epoch = epoch;
    }
  }
  report.best_val_metric = best_metric;
  if (!ds.split.test.empty()) {
    const auto test = evaluate(best, ds, ds.split.test);
    report.test_loss = test.loss();
    report.test_metric = test.metric(t.loss);
    if (t.loss != LossKind::Mae) report.majority_baseline = majority_baseline(ds, ds.split.test);
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(best), std::move(report)};
}

/// Layer config for node classification on SBM graphs with k communities.
inline LayerConfig sbm_layer_config(std::size_t k) {
  LayerConfig c;
  c.in_dim = k + 1;
  c.out_dim = k;
  c.level = Level::Node;
  return c;
}

}  // namespace gmn
