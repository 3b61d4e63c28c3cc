// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gmn/config.hpp"
#include "gmn/generators.hpp"
#include "gmn/spectral.hpp"
#include "gmn/training.hpp"
#include "gmn/verify/robustness.hpp"

namespace gmn {

struct DataConfig {
  std::string source = "sbm";  // sbm | files
  std::string dir;             // preprocessed dataset; empty means <out>/data
  std::vector<std::string> files;
  std::size_t train = 200;     // split by index: first `train`, next `val`, rest test
  std::size_t val = 50;
  std::size_t graphs = 300;
  SbmParams sbm;
  std::uint64_t seed = 0;  // graph generation, independent of training seeds
  Normalization norm = Normalization::Sym;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{1000, 2000, 5000, 10000, 20000};
  double avg_degree = 5.0;
  std::size_t repeats = 3;
  double min_time = 1.0;
};

struct RobustnessConfig {
  std::vector<double> eps{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  std::vector<verify::NoiseKind> kinds{verify::NoiseKind::White, verify::NoiseKind::SignalDependent};
};

struct VerifyConfig {
  std::size_t equivariance_trials = 100;
  bool bench = true;
};

/// Everything a command needs. `explicit_keys` records "section.key" for
/// every setting made by a preset, file or flag, so data-derived defaults
/// never override them.
struct RunConfig {
  std::string preset;
  std::vector<std::uint64_t> seeds{0};
  bool concurrent = false;
  std::string checkpoint;  // empty means <out>/seed<first seed>/model.gmnckpt
  LayerConfig layer;
  TrainConfig train;
  DataConfig data;
  BenchConfig bench;
  RobustnessConfig robustness;
  VerifyConfig verify;
  std::set<std::string> explicit_keys;
};

namespace detail {

template <class T, class F>
std::vector<T> parse_list(std::string_view v, F&& one) {
  std::vector<T> out;
  if (text::trim(v).empty()) return out;
  for (const auto& part : text::split(v, ',')) out.push_back(one(text::trim(part)));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs, auto&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

inline std::string size_list(const std::vector<std::size_t>& xs) {
  return join(xs, [](std::size_t v) { return std::to_string(v); });
}

inline std::string real_list(const std::vector<double>& xs) {
  return join(xs, [](double v) { return text::format_double(v); });
}

inline bool apply_run(RunConfig& rc, std::string_view key, std::string_view v) {
  if (key == "preset") rc.preset = std::string(v);
  else if (key == "seeds") {
    rc.seeds = parse_list<std::uint64_t>(v, [&](std::string_view s) { return std::uint64_t{parse_size(s, key)}; });
    require(!rc.seeds.empty(), ErrorKind::InvalidValue, "seeds: need at least one seed");
  } else if (key == "concurrent") rc.concurrent = parse_bool(v, key);
  else if (key == "checkpoint") rc.checkpoint = std::string(v);
  else return false;
  return true;
}

inline bool apply_data(DataConfig& d, std::string_view key, std::string_view v) {
  if (key == "source") {
    require(v == "sbm" || v == "files", ErrorKind::InvalidValue, "source: expected sbm or files");
    d.source = std::string(v);
  } else if (key == "dir") d.dir = std::string(v);
  else if (key == "files") d.files = parse_list<std::string>(v, [](std::string_view s) { return std::string(s); });
  else if (key == "graphs") d.graphs = parse_size(v, key);
  else if (key == "train") d.train = parse_size(v, key);
  else if (key == "val") d.val = parse_size(v, key);
  else if (key == "n") d.sbm.n = parse_size(v, key);
  else if (key == "k") d.sbm.k = parse_size(v, key);
  else if (key == "p_in") d.sbm.p_in = parse_real(v, key);
  else if (key == "p_out") d.sbm.p_out = parse_real(v, key);
  else if (key == "seed") d.seed = parse_size(v, key);
  else if (key == "normalization") d.norm = parse_normalization(v);
  else return false;
  return true;
}

inline bool apply_bench(BenchConfig& b, std::string_view key, std::string_view v) {
  if (key == "sizes") b.sizes = parse_list<std::size_t>(v, [&](std::string_view s) { return parse_size(s, key); });
  else if (key == "avg_degree") b.avg_degree = parse_real(v, key);
  else if (key == "repeats") b.repeats = parse_size(v, key);
  else if (key == "min_time") {
    b.min_time = parse_real(v, key);
    require(b.min_time >= 0, ErrorKind::InvalidValue, "min_time: must be >= 0");
  }
  else return false;
  return true;
}

inline bool apply_robustness(RobustnessConfig& r, std::string_view key, std::string_view v) {
  if (key == "eps") r.eps = parse_list<double>(v, [&](std::string_view s) { return parse_real(s, key); });
  else if (key == "kinds") r.kinds = parse_list<verify::NoiseKind>(v, verify::parse_noise_kind);
  else return false;
  return true;
}

inline bool apply_verify(VerifyConfig& c, std::string_view key, std::string_view v) {
  if (key == "equivariance_trials") c.equivariance_trials = parse_size(v, key);
  else if (key == "bench") c.bench = parse_bool(v, key);
  else return false;
  return true;
}

inline const std::vector<std::string_view>& sections() {
  static const std::vector<std::string_view> s{"run", "model", "train", "data", "bench", "robustness", "verify"};
  return s;
}

}  // namespace detail

/// One "key=value" setting. `section` may be empty for flags, in which case
/// the key is looked up in every section and must be unambiguous.
struct Setting {
  std::string section;
  std::string key;
  std::string value;
  std::string origin;  // "file:<line>" or "flag"
};

/// Flat key=value text with optional [section] headers; '#' starts a comment.
inline std::vector<Setting> parse_config_text(std::string_view text, const std::string& source = "<config>") {
  std::vector<Setting> out;
  std::string section;  // keys before the first header are looked up like flags
  std::size_t line_no = 0;
  for (const auto& raw : text::split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::ParseError, where + ": unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      const auto& known = detail::sections();
      require(std::find(known.begin(), known.end(), section) != known.end(), ErrorKind::UnknownKey,
              where + ": unknown section [" + section + "]");
      continue;
    }
    const auto kv = text::key_value(line);
    require(kv.has_value(), ErrorKind::ParseError, where + ": expected key=value, got '" + std::string(line) + "'");
    out.push_back({section, std::string(text::trim(kv->first)), std::string(text::trim(kv->second)), where});
  }
  return out;
}

/// "--key=value" or "--section.key=value" (leading dashes optional).
inline Setting parse_flag(std::string_view flag) {
  while (!flag.empty() && flag.front() == '-') flag.remove_prefix(1);
  const auto kv = text::key_value(flag);
  require(kv.has_value(), ErrorKind::ParseError, "flag '" + std::string(flag) + "' is not key=value");
  Setting s{"", std::string(kv->first), std::string(kv->second), "flag"};
  if (const auto dot = s.key.find('.'); dot != std::string::npos) {
    s.section = s.key.substr(0, dot);
    s.key = s.key.substr(dot + 1);
  }
  return s;
}

namespace detail {

inline bool apply_in(RunConfig& rc, std::string_view section, std::string_view key, std::string_view v) {
  if (section == "run") return apply_run(rc, key, v);
  if (section == "model") {
    if (key == "lap_dim") return apply_kv(rc.layer, "d", v);
    return apply_kv(rc.layer, key, v);
  }
  if (section == "train") return apply_kv(rc.train, key, v);
  if (section == "data") return apply_data(rc.data, key, v);
  if (section == "bench") return apply_bench(rc.bench, key, v);
  if (section == "robustness") return apply_robustness(rc.robustness, key, v);
  if (section == "verify") return apply_verify(rc.verify, key, v);
  return false;
}

/// Trial application on a scratch copy, used to find which sections accept a key.
inline std::vector<std::string_view> sections_accepting(std::string_view key, std::string_view v) {
  std::vector<std::string_view> hits;
  for (auto s : sections()) {
    RunConfig scratch;
    try {
      if (apply_in(scratch, s, key, v)) hits.push_back(s);
    } catch (const Error&) {
      hits.push_back(s);  // key exists, value rejected; reported on the real pass
    }
  }
  return hits;
}

inline void apply_setting(RunConfig& rc, const Setting& s) {
  std::string section = s.section;
  if (section.empty()) {
    // "seed" is shorthand for a single training seed
    if (s.key == "seed") {
      rc.train.seed = parse_size(s.value, "seed");
      rc.seeds = {rc.train.seed};
      rc.explicit_keys.insert("train.seed");
      return;
    }
    const auto hits = sections_accepting(s.key, s.value);
    require(!hits.empty(), ErrorKind::UnknownKey, s.origin + ": unknown key '" + s.key + "'");
    require(hits.size() == 1, ErrorKind::UnknownKey,
            s.origin + ": key '" + s.key + "' is ambiguous, qualify it as <section>." + s.key);
    section = std::string(hits.front());
  }
  const auto& known = sections();
  require(std::find(known.begin(), known.end(), section) != known.end(), ErrorKind::UnknownKey,
          s.origin + ": unknown section '" + section + "'");
  const bool ok = [&] {
    try {
      return apply_in(rc, section, s.key, s.value);
    } catch (const Error& e) {
      fail(e.kind(), s.origin + ": " + e.message());
    }
  }();
  require(ok, ErrorKind::UnknownKey, s.origin + ": unknown key '" + s.key + "' in [" + section + "]");
  rc.explicit_keys.insert(section + "." + (s.key == "lap_dim" ? "d" : s.key));
  if (section == "train" && s.key == "seed") rc.seeds = {rc.train.seed};
}

}  // namespace detail

/// defaults <- preset <- file <- flags, later wins. The preset may be named
/// in the file or by a flag (the flag wins).
inline RunConfig build_run_config(const std::vector<Setting>& file, const std::vector<Setting>& flags) {
  RunConfig rc;
  for (const auto* list : {&file, &flags}) {
    for (const auto& s : *list) {
      if (s.key == "preset" && (s.section.empty() || s.section == "run")) rc.preset = s.value;
    }
  }
  if (!rc.preset.empty()) {
    apply_preset(rc.preset, rc.layer, rc.train);
    for (const auto& key : {"model.l", "model.local", "model.layers", "model.d", "model.dropout_ffn",
                            "model.dropout_local", "model.dropout_residual", "model.dropout_gmn", "model.level",
                            "model.in_dim", "model.out_dim", "train.batch", "train.lr", "train.weight_decay",
                            "train.loss"}) {
      rc.explicit_keys.insert(key);
    }
  }
  for (const auto* list : {&file, &flags}) {
    for (const auto& s : *list) detail::apply_setting(rc, s);
  }
  rc.train.seed = rc.seeds.front();
  validate(rc.layer);
  validate(rc.train);
  return rc;
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& flags) {
  std::vector<Setting> file;
  if (!path.empty()) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::IoError, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    file = parse_config_text(ss.str(), path);
  }
  std::vector<Setting> parsed;
  for (const auto& f : flags) parsed.push_back(parse_flag(f));
  return build_run_config(file, parsed);
}

/// Merged configuration in the same sectioned key=value form it is read from.
inline std::string echo(const RunConfig& rc) {
  std::ostringstream out;
  auto seeds = detail::join(rc.seeds, [](std::uint64_t v) { return std::to_string(v); });
  out << "[model]\n";
  for (const auto& [k, v] : to_kv(rc.layer)) out << k << '=' << v << '\n';
  out << "[train]\n";
  for (const auto& [k, v] : to_kv(rc.train)) out << k << '=' << v << '\n';
  // after [train], whose seed would otherwise reset the list
  out << "[run]\n";
  if (!rc.preset.empty()) out << "preset=" << rc.preset << '\n';
  out << "seeds=" << seeds << "\nconcurrent=" << (rc.concurrent ? 1 : 0) << "\ncheckpoint=" << rc.checkpoint << '\n';
  const auto& d = rc.data;
  out << "[data]\nsource=" << d.source << "\ndir=" << d.dir
      << "\nfiles=" << detail::join(d.files, [](const std::string& s) { return s; }) << "\ngraphs=" << d.graphs
      << "\ntrain=" << d.train << "\nval=" << d.val << "\nn=" << d.sbm.n << "\nk=" << d.sbm.k
      << "\np_in=" << text::format_double(d.sbm.p_in) << "\np_out=" << text::format_double(d.sbm.p_out) << "\nseed=" << d.seed
      << "\nnormalization=" << to_string(d.norm) << '\n';
  out << "[bench]\nsizes=" << detail::size_list(rc.bench.sizes)
      << "\navg_degree=" << text::format_double(rc.bench.avg_degree) << "\nrepeats=" << rc.bench.repeats
      << "\nmin_time=" << text::format_double(rc.bench.min_time) << '\n';
  out << "[robustness]\neps=" << detail::real_list(rc.robustness.eps) << "\nkinds="
      << detail::join(rc.robustness.kinds, [](verify::NoiseKind k) { return std::string(verify::to_string(k)); })
      << '\n';
  out << "[verify]\nequivariance_trials=" << rc.verify.equivariance_trials << "\nbench=" << (rc.verify.bench ? 1 : 0)
      << '\n';
  return out.str();
}

/// Fills model and loss settings the user left unset from the data: input
/// width, output width, prediction level, loss, and d from the caches.
inline void fit_to_data(RunConfig& rc, const Dataset& ds) {
  require(!ds.samples.empty(), ErrorKind::InvalidParams, "empty dataset");
  const auto& first = ds.samples.front();
  const auto task = ds.split.task != TaskKind::None ? ds.split.task : first.graph.task();
  auto unset = [&](const char* key) { return rc.explicit_keys.count(key) == 0; };
  if (unset("model.in_dim")) rc.layer.in_dim = first.graph.features().dim(1);
  if (unset("model.out_dim")) rc.layer.out_dim = ds.num_classes > 0 ? ds.num_classes : 1;
  if (unset("model.level")) rc.layer.level = task == TaskKind::NodeClass ? Level::Node : Level::Graph;
  if (unset("model.d")) rc.layer.d = first.cache.dim();
  if (unset("train.loss")) rc.train.loss = task == TaskKind::GraphRegression ? LossKind::Mae : LossKind::Xent;
  validate(rc.layer);
}

}  // namespace gmn
