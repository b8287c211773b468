// Copyright 2026 The ema-gestures Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gestures/checkpoint.hpp"
#include "gestures/config.hpp"
#include "gestures/data_io.hpp"
#include "gestures/errors.hpp"
#include "gestures/evaluation.hpp"
#include "gestures/gradcheck.hpp"
#include "gestures/synthetic.hpp"
#include "gestures/training.hpp"
#include "gestures/visualize.hpp"

namespace fs = std::filesystem;
using namespace gestures;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Common {
  std::string out;
  std::string config;
  std::vector<std::string> overrides;
};

fs::path run_dir(const std::string& requested, const std::string& command) {
  fs::path dir;
  if (!requested.empty()) {
    dir = requested;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    std::ostringstream name;
    name << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
    dir = fs::path("runs") / name.str();
    for (int i = 1; fs::exists(dir); ++i) dir = fs::path("runs") / (name.str() + "-" + std::to_string(i));
  }
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError(path.string() + ": cannot write");
  os << text;
}

void write_command(const fs::path& dir, int argc, char** argv) {
  std::string line;
  for (int i = 0; i < argc; ++i) line += (i ? " " : "") + std::string(argv[i]);
  write_file(dir / "command.txt", line + "\n");
}

TrainConfig resolve_config(const Common& c, Task task) {
  TrainConfig config;
  config.task = task;
  if (!c.config.empty()) apply_key_values(config, read_key_values(c.config));
  KeyValues kv;
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  if (!kv.empty()) {
    KeyValues merged = to_key_values(config);
    if (!kv.count("kmeans.window") && kv.count("model.kernel")) merged.erase("kmeans.window");
    for (const auto& [k, v] : kv) merged[k] = v;
    config = TrainConfig{};
    apply_key_values(config, merged);
  }
  config.task = task;
  config.validate();
  return config;
}

Corpus load(const std::string& manifest, const std::string& labels) {
  std::optional<fs::path> label_path;
  if (!labels.empty()) {
    label_path = labels;
  } else if (fs::exists(fs::path(manifest).parent_path() / "labels.txt")) {
    label_path = fs::path(manifest).parent_path() / "labels.txt";
  }
  return load_corpus(manifest, label_path);
}

// --- synth-data -------------------------------------------------------------

struct SynthArgs {
  SyntheticOptions options;
  std::vector<std::string> merge;
  std::string out;
};

void write_truth(const fs::path& dir, const SyntheticCorpus& syn) {
  fs::create_directories(dir);
  const Tensor& W = syn.truth.W;
  std::ofstream os(dir / "W.txt");
  os << "W " << W.dim(0) << ' ' << W.dim(1) << ' ' << W.dim(2) << '\n';
  os.precision(17);
  for (Index i = 0; i < W.size(); ++i) os << W[i] << (i + 1 == W.size() ? '\n' : ' ');
  for (std::size_t u = 0; u < syn.corpus.size(); ++u)
    write_heatmap_csv(dir / ("H_" + syn.corpus[u].id + ".csv"), syn.truth.H[u]);
}

int cmd_synth(const SynthArgs& a, int argc, char** argv) {
  const fs::path dir = run_dir(a.out, "synth-data");
  write_command(dir, argc, argv);
  const SyntheticCorpus syn = generate_synthetic(a.options);
  save_corpus(dir, syn.corpus);
  write_truth(dir / "truth", syn);
  const SyntheticOptions& o = a.options;
  std::ostringstream snap;
  snap << "synth.gestures = " << o.gestures << "\nsynth.channels = " << o.channels << "\nsynth.kernel = " << o.kernel
       << "\nsynth.utterances = " << o.utterances << "\nsynth.min_length = " << o.min_length
       << "\nsynth.max_length = " << o.max_length << "\nsynth.noise = " << o.noise << "\nsynth.smoothing = " << o.smoothing << "\nsynth.seed = " << o.seed
       << "\nsynth.labels = " << (o.labels ? "true" : "false") << '\n';
  if (o.labels) {
    std::string symbols, merge;
    for (Index d = 0; d < o.gestures; ++d) symbols += (d ? "," : "") + std::string("g") + std::to_string(d);
    for (const auto& m : a.merge) merge += (merge.empty() ? "" : ",") + m;
    const std::string labels = "labels.alphabet = " + symbols + "\nlabels.merge = " + merge + "\n";
    snap << labels;
    write_file(dir / "labels.cfg", labels);
  }
  write_file(dir / "config.txt", snap.str());
  std::cout << "wrote " << syn.corpus.size() << " utterances to " << dir.string() << '\n';
  return kOk;
}

// --- training -----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string labels;
  std::vector<Index> sweep;
  bool quiet = false;
};

struct TrainOutcome {
  TrainResult result;
  EvalReport test;
};

TrainOutcome train_into(const fs::path& dir, const TrainConfig& config, const Corpus& corpus, bool quiet) {
  fs::create_directories(dir);
  write_file(dir / "config.txt", format_config(config));
  std::ofstream metrics(dir / "metrics.csv"), validation(dir / "validation.csv");
  TrainHooks hooks;
  hooks.metrics = &metrics;
  hooks.validation = &validation;
  hooks.progress = quiet ? nullptr : &std::cout;
  TrainOutcome out;
  out.result = config.task == Task::kJoint ? train_joint(config, corpus, hooks) : train_resynthesis(config, corpus, hooks);
  save_checkpoint(dir / "checkpoint.txt", out.result.best);
  save_corpus(dir / "test", out.result.test);
  EvalOptions opts;
  opts.beam_width = config.beam_width;
  out.test = evaluate(out.result.best, out.result.test, opts);
  write_eval_report(dir / "test_eval", out.test);
  if (!quiet) std::cout << "held-out split:\n" << format_summary(out.test);
  if (out.result.skipped_utterances)
    std::cout << "skipped " << out.result.skipped_utterances << " utterances too short for their labels\n";
  return out;
}

int cmd_train(const TrainArgs& a, Task task, int argc, char** argv) {
  TrainConfig config = resolve_config(a.common, task);
  const Corpus corpus = load(a.data, a.labels);
  const fs::path dir = run_dir(a.common.out, task == Task::kJoint ? "train-joint" : "train-resynth");
  write_command(dir, argc, argv);
  if (a.sweep.empty()) {
    const TrainOutcome out = train_into(dir, config, corpus, a.quiet);
    if (out.result.diverged) {
      std::cerr << "training diverged at " << out.result.divergence_reason
                << "; kept the last good checkpoint\n";
      return kNumeric;
    }
    return kOk;
  }
  write_file(dir / "config.txt", format_config(config));
  std::ofstream table(dir / "sweep.csv");
  table << "gestures,rec_pct,s1,s2,entropy,diverged\n";
  bool diverged = false;
  for (Index D : a.sweep) {
    TrainConfig c = config;
    c.model.gestures = D;
    c.validate();
    if (!a.quiet) std::cout << "== D = " << D << '\n';
    const TrainOutcome out = train_into(dir / ("D" + std::to_string(D)), c, corpus, a.quiet);
    table << D << ',' << out.test.mean_rec_percent() << ',' << out.test.mean_s1() << ',' << out.test.mean_s2()
          << ',' << out.test.mean_entropy() << ',' << (out.result.diverged ? 1 : 0) << '\n';
    diverged = diverged || out.result.diverged;
  }
  return diverged ? kNumeric : kOk;
}

// --- eval / viz / gradcheck --------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string labels;
  std::string out;
  Index beam_width = 0;
  bool no_beam = false;
};

int cmd_eval(const EvalArgs& a, int argc, char** argv) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Corpus corpus = load(a.data, a.labels);
  const fs::path dir = run_dir(a.out, "eval");
  write_command(dir, argc, argv);
  write_file(dir / "config.txt", format_config(ckpt.config));
  EvalOptions opts;
  opts.beam = !a.no_beam;
  opts.beam_width = a.beam_width > 0 ? a.beam_width : ckpt.config.beam_width;
  const EvalReport report = evaluate(ckpt, corpus, opts);
  write_eval_report(dir, report);
  std::cout << format_summary(report);
  return kOk;
}

struct VizArgs {
  std::string checkpoint;
  std::string data;
  std::string utterance;
  std::string alignment;
  std::string out;
  Index top_k = 4;
};

int cmd_viz(const VizArgs& a, int argc, char** argv) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Corpus corpus = load_corpus(a.data);
  const Utterance* utt = nullptr;
  for (const auto& u : corpus)
    if (a.utterance.empty() || u.id == a.utterance) {
      utt = &u;
      break;
    }
  if (!utt) throw DataError("utterance '" + a.utterance + "' not in " + a.data);
  const fs::path dir = run_dir(a.out, "viz");
  write_command(dir, argc, argv);
  write_file(dir / "config.txt", format_config(ckpt.config));
  VizOptions opts;
  opts.top_k = a.top_k;
  if (!a.alignment.empty()) opts.alignment = fs::path(a.alignment);
  const VizFiles files = run_viz(ckpt, *utt, dir, opts);
  std::cout << "utterance " << utt->id << ", top gestures:";
  for (Index d : files.gestures) std::cout << ' ' << d;
  std::cout << "\nwrote " << files.written.size() << " files to " << dir.string() << '\n';
  return kOk;
}

struct GradArgs {
  int points = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::string out;
};

int cmd_gradcheck(const GradArgs& a, int argc, char** argv) {
  const auto rows = run_gradcheck(standard_gradcheck_items(), a.points, a.seed, a.tolerance);
  print_gradcheck(std::cout, rows);
  if (!a.out.empty()) {
    const fs::path dir = run_dir(a.out, "gradcheck");
    write_command(dir, argc, argv);
    std::ofstream os(dir / "gradcheck.txt");
    print_gradcheck(os, rows);
    write_file(dir / "config.txt", "gradcheck.points = " + std::to_string(a.points) +
                                       "\ngradcheck.seed = " + std::to_string(a.seed) + "\n");
  }
  for (const auto& r : rows)
    if (!r.passed) return kNumeric;
  return kOk;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "override one key, e.g. --set optim.lr=5e-4")->take_all();
  app->add_option("--out", c.out, "output directory (default runs/<command>-<timestamp>)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutive sparse factorization of articulatory kinematics"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "generate a synthetic corpus with known gestures");
  s->add_option("--gestures", synth.options.gestures, "number of planted gestures");
  s->add_option("--channels", synth.options.channels);
  s->add_option("--kernel", synth.options.kernel, "gesture length in frames");
  s->add_option("--utterances", synth.options.utterances);
  s->add_option("--min-length", synth.options.min_length);
  s->add_option("--max-length", synth.options.max_length);
  s->add_option("--noise", synth.options.noise, "Gaussian noise standard deviation");
  s->add_option("--smoothing", synth.options.smoothing, "Gesture low-pass width in frames")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.options.seed);
  s->add_flag("--labels", synth.options.labels, "write gesture-order label sequences");
  s->add_option("--merge", synth.merge, "label merge pairs such as g1:g0 (written to labels.cfg)")
      ->delimiter(',');
  s->add_option("--out", synth.out);

  TrainArgs resynth, joint;
  auto* tr = app.add_subcommand("train-resynth", "train the sparse resynthesis model");
  tr->add_option("--data", resynth.data, "manifest.csv")->required()->check(CLI::ExistingFile);
  tr->add_option("--labels", resynth.labels)->check(CLI::ExistingFile);
  tr->add_option("--sweep", resynth.sweep, "comma-separated gesture counts")->delimiter(',');
  tr->add_flag("--quiet", resynth.quiet);
  add_common(tr, resynth.common);

  auto* tj = app.add_subcommand("train-joint", "train resynthesis jointly with CTC recognition");
  tj->add_option("--data", joint.data, "manifest.csv")->required()->check(CLI::ExistingFile);
  tj->add_option("--labels", joint.labels)->check(CLI::ExistingFile);
  tj->add_flag("--quiet", joint.quiet);
  add_common(tj, joint.common);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "manifest.csv")->required()->check(CLI::ExistingFile);
  e->add_option("--labels", ev.labels)->check(CLI::ExistingFile);
  e->add_option("--beam-width", ev.beam_width);
  e->add_flag("--no-beam", ev.no_beam, "greedy decoding only");
  e->add_option("--out", ev.out);

  VizArgs viz;
  auto* v = app.add_subcommand("viz", "gestural-score heatmap, gesture and trace plots");
  v->add_option("--checkpoint", viz.checkpoint)->required()->check(CLI::ExistingFile);
  v->add_option("--data", viz.data, "manifest.csv")->required()->check(CLI::ExistingFile);
  v->add_option("--utt", viz.utterance, "utterance id (default: first)");
  v->add_option("--top-k", viz.top_k)->check(CLI::NonNegativeNumber);
  v->add_option("--alignment", viz.alignment, "'start end label' lines in seconds")->check(CLI::ExistingFile);
  v->add_option("--out", viz.out);

  GradArgs grad;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every operator and loss");
  g->add_option("--points", grad.points)->check(CLI::PositiveNumber);
  g->add_option("--seed", grad.seed);
  g->add_option("--tolerance", grad.tolerance);
  g->add_option("--out", grad.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, argc, argv);
    if (tr->parsed()) return cmd_train(resynth, Task::kResynthesis, argc, argv);
    if (tj->parsed()) return cmd_train(joint, Task::kJoint, argc, argv);
    if (e->parsed()) return cmd_eval(ev, argc, argv);
    if (v->parsed()) return cmd_viz(viz, argc, argv);
    if (g->parsed()) return cmd_gradcheck(grad, argc, argv);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kConfig;
  } catch (const CtcInfeasibleError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const ShapeError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return kNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
