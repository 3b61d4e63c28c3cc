// Copyright 2026 The gmn Authors
// SPDX-License-Identifier: Apache-2.0
//
// gmn <command> --config <path> [--key=value ...] [--seed N] [--out DIR]

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "gmn/dataset_io.hpp"
#include "gmn/run_config.hpp"
#include "gmn/verify/suite.hpp"

namespace fs = std::filesystem;
using namespace gmn;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// SHA-1 of "blob <size>\0<content>", the hash git gives a file.
std::string git_blob_sha1(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) == 1, ErrorKind::IoError,
          "sha1 failed");
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path.string());
  out << content;
}

class Run {
 public:
  Run(std::string command, std::string config_path, RunConfig rc, fs::path out)
      : command_(std::move(command)), config_path_(std::move(config_path)), rc_(std::move(rc)), out_(std::move(out)) {
    fs::create_directories(out_);
    log_.open(out_ / ("run." + command_ + ".log"));
    log_ << "# gmn " << command_ << '\n' << echo(rc_);
  }

  RunConfig& config() { return rc_; }
  const fs::path& out() const { return out_; }

  void say(const std::string& line) {
    std::cerr << line << '\n';
    log_ << line << '\n';
  }

  void input(const fs::path& path) { inputs_.push_back(path); }
  void output(const fs::path& path) { outputs_.push_back(path); }

  std::string data_dir() const { return rc_.data.dir.empty() ? (out_ / "data").string() : rc_.data.dir; }

  std::string checkpoint_path() const {
    if (!rc_.checkpoint.empty()) return rc_.checkpoint;
    return (out_ / ("seed" + std::to_string(rc_.seeds.front())) / "model.gmnckpt").string();
  }

  /// Config echo, seeds, content hashes of inputs and outputs, param count.
  void write_manifest(bool with_params) {
    std::ostringstream m;
    m << "command=" << command_ << '\n' << "config_file=" << config_path_ << '\n';
    m << "seeds=";
    for (std::size_t i = 0; i < rc_.seeds.size(); ++i) m << (i ? "," : "") << rc_.seeds[i];
    m << '\n';
    if (!config_path_.empty()) m << "input " << git_blob_sha1(read_file(config_path_)) << ' ' << config_path_ << '\n';
    for (const auto& p : inputs_) m << "input " << git_blob_sha1(read_file(p.string())) << ' ' << p.string() << '\n';
    for (const auto& p : outputs_) m << "output " << git_blob_sha1(read_file(p.string())) << ' ' << p.string() << '\n';
    if (with_params) {
      m << "param_count=" << param_count(rc_.layer) << '\n';
      for (const auto& [group, count] : param_breakdown(rc_.layer)) m << "param_count." << group << '=' << count << '\n';
    }
    m << "--- config ---\n" << echo(rc_);
    write_text(out_ / ("manifest." + command_ + ".txt"), m.str());
  }

 private:
  std::string command_;
  std::string config_path_;
  RunConfig rc_;
  fs::path out_;
  std::ofstream log_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

Dataset build_dataset(const RunConfig& rc) {
  const auto& d = rc.data;
  if (d.source == "sbm") {
    SbmTask task;
    task.graphs = d.graphs;
    task.train = d.train;
    task.val = d.val;
    task.params = d.sbm;
    return sbm_dataset(task, rc.layer.d, d.seed);
  }
  require(!d.files.empty(), ErrorKind::InvalidValue, "data.files: source=files needs at least one .gmngraph");
  require(d.train + d.val <= d.files.size(), ErrorKind::InvalidValue, "data.train + data.val exceed the file count");
  std::vector<Graph> graphs;
  DatasetSplit split;
  for (std::size_t i = 0; i < d.files.size(); ++i) {
    graphs.push_back(load_graph(d.files[i]));
    if (split.task == TaskKind::None) split.task = graphs.back().task();
    (i < d.train ? split.train : i < d.train + d.val ? split.val : split.test).push_back(i);
  }
  return make_dataset(std::move(graphs), std::move(split), rc.layer.d, d.norm);
}

Dataset load_data(Run& run) {
  const auto dir = run.data_dir();
  require(dataset_exists(dir), ErrorKind::IoError, "no preprocessed dataset in " + dir + "; run 'gmn preprocess' first");
  run.input(fs::path(dir) / "dataset.txt");
  auto ds = load_dataset(dir);
  fit_to_data(run.config(), ds);
  return ds;
}

int cmd_preprocess(Run& run) {
  const auto ds = build_dataset(run.config());
  const auto dir = run.data_dir();
  for (const auto& f : run.config().data.files) run.input(f);
  const auto written = save_dataset(dir, ds);
  run.output(fs::path(dir) / "dataset.txt");
  run.say("preprocessed " + std::to_string(ds.samples.size()) + " graphs (d=" + std::to_string(run.config().layer.d) +
          ") into " + dir + " (" + std::to_string(written.size()) + " files)");
  run.write_manifest(false);
  return kOk;
}

std::string report_text(const MetricsReport& r) {
  std::ostringstream out;
  write_report(out, r);
  return out.str();
}

int cmd_train(Run& run) {
  const auto ds = load_data(run);
  const auto& rc = run.config();
  std::vector<MetricsReport> reports(rc.seeds.size());
  std::vector<std::optional<Error>> errors(rc.seeds.size());
  auto one = [&](std::size_t i) {
    auto t = rc.train;
    t.seed = rc.seeds[i];
    const fs::path dir = run.out() / ("seed" + std::to_string(t.seed));
    try {
      TrainOptions opts;
      if (!rc.concurrent) {
        opts.on_epoch = [&](const EpochRecord& e) {
          run.say("seed " + std::to_string(t.seed) + " epoch " + std::to_string(e.epoch) +
                  " train_loss=" + text::format_double(e.train_loss) + " val_loss=" + text::format_double(e.val_loss) +
                  " val_metric=" + text::format_double(e.val_metric));
        };
      }
      const auto result = train(ds, rc.layer, t, opts);
      fs::create_directories(dir);
      save_checkpoint((dir / "model.gmnckpt").string(), result.checkpoint);
      std::ostringstream csv;
      write_epochs_csv(csv, result.report);
      write_text(dir / "metrics.csv", csv.str());
      write_text(dir / "report.txt", report_text(result.report));
      reports[i] = result.report;
    } catch (const DivergenceError& e) {
      fs::create_directories(dir);
      save_checkpoint((dir / "last_good.gmnckpt").string(), e.last_good());
      errors[i] = e;
    } catch (const Error& e) {
      errors[i] = e;
    }
  };
  if (rc.concurrent) {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < rc.seeds.size(); ++i) pool.emplace_back(one, i);
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t i = 0; i < rc.seeds.size(); ++i) one(i);
  }
  for (std::size_t i = 0; i < rc.seeds.size(); ++i) {
    const fs::path dir = run.out() / ("seed" + std::to_string(rc.seeds[i]));
    if (errors[i]) fail(errors[i]->kind(), "seed " + std::to_string(rc.seeds[i]) + ": " + errors[i]->message());
    for (const char* f : {"model.gmnckpt", "metrics.csv", "report.txt"}) run.output(dir / f);
  }

  double mean = 0, sq = 0;
  for (const auto& r : reports) mean += r.test_metric / static_cast<double>(reports.size());
  for (const auto& r : reports) sq += (r.test_metric - mean) * (r.test_metric - mean);
  const double sd = reports.size() > 1 ? std::sqrt(sq / static_cast<double>(reports.size() - 1)) : 0.0;
  std::ostringstream summary;
  summary << "seeds=" << reports.size() << '\n'
          << "metric=" << reports.front().metric << '\n'
          << "test_" << reports.front().metric << "_mean=" << text::format_double(mean) << '\n'
          << "test_" << reports.front().metric << "_std=" << text::format_double(sd) << '\n';
  for (const auto& r : reports) {
    summary << "seed" << r.seed << ".test_" << r.metric << '=' << text::format_double(r.test_metric)
            << " best_epoch=" << r.best_epoch << " wall_time_s=" << text::format_double(r.wall_time_s) << '\n';
  }
  write_text(run.out() / "summary.txt", summary.str());
  run.output(run.out() / "summary.txt");
  run.say(summary.str());
  run.write_manifest(true);
  return kOk;
}

int cmd_eval(Run& run) {
  const auto ds = load_data(run);
  const auto path = run.checkpoint_path();
  const auto ck = load_checkpoint(path);
  run.input(path);
  run.config().layer = ck.layer;
  run.config().train = ck.train;
  const auto& idx = ds.split.test.empty() ? ds.split.val : ds.split.test;
  const auto r = evaluate(ck, ds, idx);
  std::ostringstream out;
  out << "graphs=" << r.graphs << '\n'
      << "loss=" << text::format_double(r.loss()) << '\n'
      << (ck.train.loss == LossKind::Mae ? "mae=" : "accuracy=") << text::format_double(r.metric(ck.train.loss))
      << '\n';
  if (ck.train.loss != LossKind::Mae) out << "majority_baseline=" << text::format_double(majority_baseline(ds, idx)) << '\n';
  write_text(run.out() / "report.txt", out.str());
  run.output(run.out() / "report.txt");
  run.say(out.str());
  run.write_manifest(true);
  return kOk;
}

int cmd_verify(Run& run) {
  const auto& rc = run.config();
  verify::SuiteOptions o;
  o.layer = rc.layer;
  o.equivariance_trials = rc.verify.equivariance_trials;
  o.bench = rc.verify.bench;
  o.bench_options.ns = rc.bench.sizes;
  o.bench_options.avg_degree = rc.bench.avg_degree;
  o.bench_options.repeats = rc.bench.repeats;
  o.bench_options.min_time_s = rc.bench.min_time;
  o.bench_options.config = rc.layer;
  o.bench_options.config.level = Level::Node;
  o.bench_options.config.in_dim = 0;
  o.bench_options.config.out_dim = 0;
  o.seed = rc.seeds.front();
  std::ostringstream out;
  const auto reports = verify::run_suite(o);
  for (const auto& r : reports) verify::write_report(out, r);
  const bool pass = verify::all_pass(reports);
  out << "overall=" << (pass ? "PASS" : "FAIL") << '\n';
  write_text(run.out() / "report.txt", out.str());
  run.output(run.out() / "report.txt");
  run.say(out.str());
  run.write_manifest(false);
  if (!pass) {
    std::cerr << "=== gmn failure ===\ncommand=verify\nkind=PropertyFailure\nfailed=";
    bool first = true;
    for (const auto& r : reports) {
      if (!r.pass) std::cerr << (first ? "" : ",") << r.name, first = false;
    }
    std::cerr << "\n===\n";
  }
  return pass ? kOk : kFailure;
}

int cmd_bench(Run& run) {
  const auto& rc = run.config();
  verify::BenchOptions o;
  o.ns = rc.bench.sizes;
  o.avg_degree = rc.bench.avg_degree;
  o.repeats = rc.bench.repeats;
  o.min_time_s = rc.bench.min_time;
  o.config = rc.layer;
  o.config.level = Level::Node;
  o.config.in_dim = 0;
  o.config.out_dim = 0;
  o.seed = rc.seeds.front();
  const auto rows = verify::bench_scaling(o);
  std::optional<verify::PropertyReport> fit;
  if (rows.size() >= 2) fit = verify::scaling_report(rows);
  std::ostringstream csv, dat, report;
  verify::write_bench_csv(csv, rows, fit ? &*fit : nullptr);
  verify::write_bench_dat(dat, rows);
  if (fit) verify::write_report(report, *fit);
  write_text(run.out() / "bench.csv", csv.str());
  write_text(run.out() / "bench.dat", dat.str());
  write_text(run.out() / "bench.gp",
             "set xlabel 'nodes'\nset ylabel 'forward FLOPs'\nset y2label 'peak bytes'\nset y2tics\n"
             "set key left top\nset terminal pngcairo size 800,500\nset output 'bench.png'\n"
             "plot 'bench.dat' using 1:2 with linespoints title 'FLOPs', "
             "'bench.dat' using 1:3 axes x1y2 with linespoints title 'peak bytes'\n");
  write_text(run.out() / "report.txt", report.str());
  for (const char* f : {"bench.csv", "bench.dat", "bench.gp", "report.txt"}) run.output(run.out() / f);
  run.say(csv.str() + report.str());
  run.write_manifest(false);
  return fit && !fit->pass ? kFailure : kOk;
}

int cmd_robustness(Run& run) {
  const auto ds = load_data(run);
  const auto path = run.checkpoint_path();
  const auto ck = load_checkpoint(path);
  run.input(path);
  run.config().layer = ck.layer;
  run.config().train = ck.train;
  const auto& rc = run.config();
  const auto rows = verify::robustness_sweep(ck, ds, ds.split.test, rc.robustness.eps, rc.robustness.kinds,
                                             rc.seeds.front());
  std::ostringstream csv, dat;
  csv << "kind,eps,metric,loss\n";
  dat << "# eps metric (one block per kind)\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv << verify::to_string(r.kind) << ',' << text::format_double(r.eps) << ',' << text::format_double(r.metric)
        << ',' << text::format_double(r.loss) << '\n';
    if (i > 0 && rows[i - 1].kind != r.kind) dat << "\n\n";
    if (i == 0 || rows[i - 1].kind != r.kind) dat << "# " << verify::to_string(r.kind) << '\n';
    dat << r.eps << ' ' << r.metric << '\n';
  }
  write_text(run.out() / "robustness.csv", csv.str());
  write_text(run.out() / "robustness.dat", dat.str());
  for (const char* f : {"robustness.csv", "robustness.dat"}) run.output(run.out() / f);
  run.say(csv.str());
  run.write_manifest(true);
  return kOk;
}

void failure_block(const std::string& command, ErrorKind kind, const std::string& message) {
  std::cerr << "=== gmn failure ===\ncommand=" << command << "\nkind=" << to_string(kind) << "\nmessage=" << message
            << "\n===\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmn: preprocessing, training, evaluation, verification and benchmarks"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir = "gmn_out";
  std::optional<std::uint64_t> seed;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"preprocess", "build graphs and spectral caches"},
      {"train", "train one model per seed"},
      {"eval", "evaluate a checkpoint on the test split"},
      {"verify", "run the property suite; exit 1 if any property fails"},
      {"bench", "forward cost against graph size"},
      {"robustness", "evaluate a checkpoint under feature noise"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "sectioned key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "single seed (overrides seeds)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->allow_extras();
    sub->footer("Any config key may be overridden as --key=value or --section.key=value.");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  RunConfig rc;
  try {
    auto flags = sub->remaining();
    if (seed) flags.push_back("--seed=" + std::to_string(*seed));
    rc = load_run_config(config_path, flags);
  } catch (const Error& e) {
    failure_block(command, e.kind(), e.message());
    return kUsage;
  }

  try {
    Run run(command, config_path, std::move(rc), out_dir);
    if (command == "preprocess") return cmd_preprocess(run);
    if (command == "train") return cmd_train(run);
    if (command == "eval") return cmd_eval(run);
    if (command == "verify") return cmd_verify(run);
    if (command == "bench") return cmd_bench(run);
    return cmd_robustness(run);
  } catch (const Error& e) {
    failure_block(command, e.kind(), e.message());
    return kFailure;
  } catch (const std::exception& e) {
    failure_block(command, ErrorKind::IoError, e.what());
    return kFailure;
  }
}
