// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gmn/tape.hpp"

namespace gmn::num {

struct FdReport {
  double max_rel_error = 0.0;    // over all coordinates of all inputs
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_input = 0;   // input holding the largest absolute deviation
  std::vector<double> per_input;  // relative error of each input on its own
};

/// Scalar-valued function of several tensors, evaluated on a fresh tape.
using FdFunction = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Compares reverse-mode gradients with central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. The relative error is
/// max_i |a_i - n_i| / max(|a|_inf, |n|_inf), and 0 when both vectors vanish.
inline FdReport fd_check(const FdFunction& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : inputs) vars.push_back(tape.leaf(x));
    const Var<double> out = f(tape, vars);
    const auto grads = backward(tape, out);
    for (const auto& v : vars) analytic.push_back(grads[v]);
  }
  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.leaf(x));
    return f(tape, vars).value().item();
  };

  FdReport report;
  std::vector<Tensor<double>> numeric;
  std::vector<Tensor<double>> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    Tensor<double> g(xs[k].shape());
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k][i];
      xs[k][i] = orig + h;
      const double fp = eval(xs);
      xs[k][i] = orig - h;
      const double fm = eval(xs);
      xs[k][i] = orig;
      g[i] = (fp - fm) / (2.0 * h);
    }
    numeric.push_back(std::move(g));
  }

  double scale = 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double local_scale = 0.0;
    double local_worst = 0.0;
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      local_scale = std::max({local_scale, std::abs(analytic[k][i]), std::abs(numeric[k][i])});
      local_worst = std::max(local_worst, std::abs(analytic[k][i] - numeric[k][i]));
    }
    report.per_input.push_back(local_scale > 0 ? local_worst / local_scale : 0.0);
    if (local_worst > worst) report.worst_input = k;
    worst = std::max(worst, local_worst);
    scale = std::max(scale, local_scale);
    report.coordinates += xs[k].size();
  }
  report.max_abs_error = worst;
  report.max_rel_error = scale > 0 ? worst / scale : 0.0;
  return report;
}

}  // namespace gmn::num
