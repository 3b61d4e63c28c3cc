// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gmn/graph_io.hpp"
#include "gmn/training.hpp"

namespace gmn {

// Directory layout:
//   dataset.txt        GMNDATA v1 graphs=<N> task=<kind>
//                      train <i,j,...> / val <...> / test <...>
//   g<i>.gmngraph      one graph per sample
//   g<i>.gmnspec       its spectral cache

inline std::string sample_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%05zu", i);
  return buf;
}

/// Every file written, relative to `dir`, in write order.
inline std::vector<std::string> save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto stem = sample_stem(i);
    save_graph((fs::path(dir) / (stem + ".gmngraph")).string(), ds.samples[i].graph);
    save_spectral((fs::path(dir) / (stem + ".gmnspec")).string(), ds.samples[i].cache);
    files.push_back(stem + ".gmngraph");
    files.push_back(stem + ".gmnspec");
  }
  const auto index = (fs::path(dir) / "dataset.txt").string();
  std::ofstream out(index);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + index);
  out << "GMNDATA v1 graphs=" << ds.samples.size() << " task=" << to_string(ds.split.task) << '\n';
  auto list = [&](const char* name, const std::vector<std::size_t>& idx) {
    out << name;
    for (std::size_t k = 0; k < idx.size(); ++k) out << (k ? ',' : ' ') << idx[k];
    out << '\n';
  };
  list("train", ds.split.train);
  list("val", ds.split.val);
  list("test", ds.split.test);
  files.push_back("dataset.txt");
  return files;
}

inline bool dataset_exists(const std::string& dir) {
  return std::filesystem::exists(std::filesystem::path(dir) / "dataset.txt");
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto index = (fs::path(dir) / "dataset.txt").string();
  std::ifstream in(index);
  require(static_cast<bool>(in), ErrorKind::IoError, "no preprocessed dataset at " + dir + " (run preprocess first)");
  text::LineReader reader(in, index);
  const auto header = reader.expect_line("GMNDATA header");
  const auto tokens = text::split_ws(header);
  text::check_magic(reader, tokens, "GMNDATA", "v1");
  std::size_t count = 0;
  DatasetSplit split;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const auto kv = text::key_value(tokens[i]);
    if (!kv) reader.error("malformed header token '" + std::string(tokens[i]) + "'");
    if (kv->first == "graphs") count = reader.parse_uint(kv->second, "graphs");
    else if (kv->first == "task") split.task = parse_task_kind(kv->second);
    else reader.error("unknown header field '" + std::string(kv->first) + "'");
  }
  for (auto* part : {&split.train, &split.val, &split.test}) {
    const auto line = reader.expect_line("split line");
    const auto fields = text::split_ws(line);
    if (fields.empty() || fields.size() > 2) reader.error("expected '<part> <i,j,...>'");
    if (fields.size() == 2) {
      for (const auto& t : text::split(fields[1], ',')) part->push_back(reader.parse_uint(t, "index"));
    }
  }
  require(is_valid_split(split, count), ErrorKind::ParseError, index + ": split does not partition the dataset");
  Dataset ds;
  ds.split = std::move(split);
  for (std::size_t i = 0; i < count; ++i) {
    const auto stem = (fs::path(dir) / sample_stem(i)).string();
    Sample s{load_graph(stem + ".gmngraph"), load_spectral(stem + ".gmnspec"), {}};
    require(s.cache.num_nodes() == s.graph.num_nodes(), ErrorKind::ShapeMismatch,
            stem + ": spectral cache and graph disagree on n");
    s.local = local_structure(s.graph);
    const auto task = s.graph.task();
    if (task == TaskKind::NodeClass || task == TaskKind::GraphClass) {
      for (double v : s.graph.labels().values) ds.num_classes = std::max(ds.num_classes, static_cast<std::size_t>(v) + 1);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace gmn
