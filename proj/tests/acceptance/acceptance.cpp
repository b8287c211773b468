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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails. Criterion names given on the
// command line restrict the run to those criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gestures/ctc.hpp"
#include "gestures/evaluation.hpp"
#include "gestures/factorization.hpp"
#include "gestures/gradcheck.hpp"
#include "gestures/objectives.hpp"
#include "gestures/synthetic.hpp"
#include "gestures/training.hpp"
#include "oracles.hpp"

using namespace gestures;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------
// Training setups
// ---------------------------------------------------------------------------

constexpr long kRecoverySteps = 2000;
constexpr long kSweepSteps = 5000;  // long enough for D=16 to settle

TrainConfig recovery_config(Index D, std::uint64_t seed, long steps = kRecoverySteps) {
  TrainConfig c;
  c.model.gestures = D;
  c.lr = 1.25e-2;
  c.lr_decay_every = 1000;
  c.epochs = 1000;
  c.max_steps = steps;
  c.seed = seed;
  return c;
}

SyntheticOptions toy_corpus_options() {
  SyntheticOptions o;
  o.gestures = 5;
  o.labels = true;
  o.utterances = 150;
  o.min_length = 150;
  o.max_length = 300;
  return o;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.task = Task::kJoint;
  c.model.gestures = 5;
  c.alphabet = "g0,g1,g2,g3,g4";
  c.recognizer.front_channels = 32;
  c.recognizer.context_channels = 64;
  c.recognizer.projection_width = 64;
  c.lr = 1e-2;
  c.lr_decay_every = 1000;
  c.epochs = 1000;
  c.max_steps = 1200;
  return c;
}

struct HeldOut {
  double rec = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

HeldOut held_out(TrainResult& r) {
  EvalOptions opts;
  opts.greedy = false;
  opts.beam = false;
  const EvalReport rep = evaluate(r.best, r.test, opts);
  return {rep.mean_rec_percent(), rep.mean_s1(), rep.mean_s2()};
}

// Shared across the recovery, ablation and D-sweep criteria.
struct RecoveryCache {
  using Key = std::tuple<Index, std::uint64_t, long>;
  std::optional<SyntheticCorpus> corpus;
  std::map<Key, HeldOut> runs;
  std::map<Key, double> seconds;

  const Corpus& data() {
    if (!corpus) corpus = generate_synthetic(SyntheticOptions{});
    return corpus->corpus;
  }

  HeldOut run(Index D, std::uint64_t seed, long steps = kRecoverySteps) {
    const Key key{D, seed, steps};
    if (auto it = runs.find(key); it != runs.end()) return it->second;
    const Corpus& c = data();
    const auto start = Clock::now();
    TrainResult r = train_resynthesis(recovery_config(D, seed, steps), c);
    const HeldOut h = held_out(r);
    seconds[key] = seconds_since(start);
    std::cout << "  D=" << D << " seed=" << seed << " steps=" << steps << ": rec " << h.rec << "% S1 " << h.s1 << " S2 " << h.s2
              << " (" << seconds[key] << " s)" << std::endl;
    return runs[key] = h;
  }
};

RecoveryCache recovery;

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto rows = run_gradcheck(standard_gradcheck_items(), 100, 0, 1e-4);
  const double t = seconds_since(start);
  bool ok = t < 120.0;
  double worst = 0.0;
  std::string failed;
  for (const auto& r : rows) {
    worst = std::max(worst, r.max_relative_error);
    if (!r.passed) {
      ok = false;
      failed += " " + r.name;
    }
  }
  return {ok, fmt("%.0f operators, max rel err %.3g < 1e-4, %.1f s < 120 s", static_cast<double>(rows.size()),
                  worst, t) +
                  (failed.empty() ? "" : "; failing:" + failed)};
}

Outcome synthesis_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index T = std::uniform_int_distribution<Index>(1, 8)(rng);
    const Index D = std::uniform_int_distribution<Index>(1, 4)(rng);
    const Index C = std::uniform_int_distribution<Index>(1, 4)(rng);
    const Index L = std::uniform_int_distribution<Index>(1, 32)(rng);
    const Tensor W = oracle::random_tensor({T, C, D}, rng);
    const Tensor H = oracle::random_tensor({D, L}, rng, 0.0, 1.0);
    const Tensor fast = decode(H.reshaped({1, D, L}), W, Tensor(), Alignment::kCausal);
    const Tensor ref = oracle::synthesis(W, H);
    worst = std::max(worst, (fast.reshaped({C, L}).data() - ref.data()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (convolutive_synthesis(W, H).data() - ref.data()).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(start);
  return {worst <= 1e-12 && t < 5.0, fmt("50 instances, max abs diff %.3g <= 1e-12, %.2f s < 5 s", worst, t)};
}

gestures::RowMatrix random_log_probs(Index t, Index K, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  RowMatrix lp(t, K);
  for (Index i = 0; i < t; ++i) {
    for (Index k = 0; k < K; ++k) lp(i, k) = u(rng);
    const double m = lp.row(i).maxCoeff();
    lp.row(i).array() -= m + std::log((lp.row(i).array() - m).exp().sum());
  }
  return lp;
}

Outcome ctc_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(102);
  double worst = 0.0;
  int checked = 0;
  while (checked < 200) {
    const Index t = std::uniform_int_distribution<Index>(1, 6)(rng);
    const Index K = std::uniform_int_distribution<Index>(2, 4)(rng);  // blank + up to 3 symbols
    const Index len = std::uniform_int_distribution<Index>(0, 3)(rng);
    std::vector<int> target;
    for (Index i = 0; i < len; ++i)
      target.push_back(std::uniform_int_distribution<int>(1, static_cast<int>(K) - 1)(rng));
    if (ctc_min_frames(target) > t) continue;
    const RowMatrix lp = random_log_probs(t, K, rng);
    const double p = oracle::ctc_probability(lp.array().exp().matrix(), target);
    worst = std::max(worst, std::abs(ctc_loss(lp, target, false).loss + std::log(p)));
    ++checked;
  }

  int beam_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index t = std::uniform_int_distribution<Index>(1, 5)(rng);
    const Index K = std::uniform_int_distribution<Index>(2, 4)(rng);
    const RowMatrix lp = random_log_probs(t, K, rng);
    double best = -1.0;
    std::vector<int> argmax;
    for (const auto& [prefix, p] : oracle::prefix_marginals(lp.array().exp().matrix()))
      if (p > best * (1 + 1e-12)) {
        best = p;
        argmax = prefix;
      }
    if (beam_search(lp, 1000).labels != argmax) ++beam_mismatch;
  }
  const double t = seconds_since(start);
  return {worst <= 1e-9 && beam_mismatch == 0 && t < 30.0,
          fmt("200 losses, max |diff| %.3g <= 1e-9; beam argmax mismatches %.0f/100; %.2f s < 30 s", worst,
              beam_mismatch, t)};
}

Outcome sparseness_algebra() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double lo = 1.0, hi = 0.0, scale_err = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const Index n = 2 + trial % 60;
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = std::pow(u(rng), 1 + trial % 7);
    const double h = hoyer_sparseness(v);
    lo = std::min(lo, h);
    hi = std::max(hi, h);
    for (double c : {1e-6, 0.37, 3.0, 1e6}) {
      const Eigen::VectorXd cv = c * v;
      scale_err = std::max(scale_err, std::abs(hoyer_sparseness(cv) - h));
    }
  }
  int inexact = 0;
  for (Index n = 2; n <= 200; ++n) {
    for (double a : {1e-9, 0.3, 1.0, 7.0, 1e9}) {
      if (hoyer_sparseness(Eigen::VectorXd::Constant(n, a)) != 0.0) ++inexact;
      for (Index k : {Index{0}, n / 2, n - 1}) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e(k) = a;
        if (hoyer_sparseness(e) != 1.0) ++inexact;
      }
    }
  }
  double entropy_err = 0.0;
  for (Index D = 2; D <= 80; ++D) {
    RowMatrix H = RowMatrix::Zero(D, D + 3);
    for (Index d = 0; d < D; ++d) H(d, (3 * d) % (D + 3)) = 1.0 + static_cast<double>(d);
    const double expect = std::log(static_cast<double>(D)) / static_cast<double>(D);
    entropy_err = std::max(entropy_err, std::abs(entropy_of_sparseness(H) - expect));
  }
  const bool ok = lo >= 0.0 && hi <= 1.0 && scale_err <= 1e-12 && inexact == 0 && entropy_err <= 1e-12;
  return {ok, fmt("range [%.3g, %.3g]; scale err %.3g <= 1e-12; inexact one-hot/constant %.0f; ", lo, hi, scale_err,
                  inexact) +
                  fmt("entropy ln(D)/D err %.3g <= 1e-12", entropy_err)};
}

Outcome synthetic_recovery() {
  recovery.data();
  const HeldOut h = recovery.run(8, 0);
  const double t = recovery.seconds[{8, 0, kRecoverySteps}];
  const bool ok = h.rec <= 15.0 && h.s1 >= 0.85 && h.s2 >= 0.80 && t < 900.0;
  return {ok, fmt("held-out rec %.2f%% <= 15, S1 %.4f >= 0.85, S2 %.4f >= 0.80, ", h.rec, h.s1, h.s2) +
                  fmt("%.0f s < 900 s", t)};
}

Outcome ablation() {
  const Corpus& c = recovery.data();
  const HeldOut with = recovery.run(8, 0);
  TrainConfig cfg = recovery_config(8, 0);
  cfg.loss.lambda1 = cfg.loss.lambda2 = cfg.loss.lambda3 = 0.0;
  TrainResult r = train_resynthesis(cfg, c);
  const HeldOut without = held_out(r);
  const bool ok = without.rec < with.rec && without.s1 < with.s1;
  return {ok, fmt("lambda=0: rec %.2f%% vs %.2f%%, S1 %.4f vs %.4f (both must be lower)", without.rec, with.rec,
                  without.s1, with.s1)};
}

Outcome d_sweep() {
  int ordered = 0;
  std::string table;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const double r4 = recovery.run(4, seed, kSweepSteps).rec;
    const double r8 = recovery.run(8, seed, kSweepSteps).rec;
    const double r16 = recovery.run(16, seed, kSweepSteps).rec;
    if (r4 >= r8 && r8 >= r16) ++ordered;
    table += fmt(" seed %.0f: %.2f/%.2f/%.2f;", static_cast<double>(seed), r4, r8, r16);
  }
  return {ordered >= 2, fmt("rec%% at D=4/8/16:", 0) + table + fmt(" non-increasing in %.0f/3 seeds", ordered)};
}

void seed_all(std::vector<BatchNormState*> norms) {
  for (BatchNormState* bn : norms) bn->seed_running_stats();
}

Outcome toy_joint() {
  const SyntheticCorpus syn = generate_synthetic(toy_corpus_options());
  const TrainConfig cfg = toy_config();
  const auto start = Clock::now();
  TrainResult r = train_joint(cfg, syn.corpus);
  const double t = seconds_since(start);
  if (r.diverged) return {false, "training diverged: " + r.divergence_reason};

  double best_per = std::numeric_limits<double>::infinity();
  bool identity_equal = true;
  for (const ValidationRow& row : r.validation) {
    best_per = std::min(best_per, *row.per);
    if (*row.per_v != *row.per) identity_equal = false;
  }

  EvalOptions opts;
  opts.greedy = true;
  opts.beam = true;

  // untrained model: fresh weights, running statistics at mean 0 / variance 1
  Checkpoint baseline = r.best;
  baseline.model = make_gesture_model(cfg.model, cfg.seed);
  seed_all(baseline.model.norms());
  baseline.recognizer = make_recognizer(r.best.recognizer->shape, cfg.seed + 1);
  seed_all(baseline.recognizer->norms());
  EvalOptions greedy_only;
  greedy_only.beam = false;
  const double base_per = summarize(evaluate(baseline, r.validation_set, greedy_only).greedy).per;

  // planted two-way merge on the trained model
  Checkpoint merged = r.best;
  merged.config.merge = "g1:g0";
  merged.alphabet = make_alphabet(merged.config);
  const EvalReport mrep = evaluate(merged, r.validation_set, opts);
  bool merged_ok = true;
  for (const auto* rows : {&mrep.greedy, &mrep.beam})
    for (const PerRow& row : *rows)
      if (row.per_v > row.per) merged_ok = false;
  const PerSummary mg = summarize(mrep.greedy);

  const bool ok = best_per < 50.0 && base_per > 90.0 && identity_equal && merged_ok && t < 1800.0;
  return {ok, fmt("best validation PER %.2f%% < 50, untrained PER %.2f%% > 90, %.0f s < 1800 s; ", best_per, base_per,
                  t) +
                  std::string("PER-V == PER on every validation row: ") + (identity_equal ? "yes" : "no") +
                  fmt("; merged g1:g0 PER-V %.2f%% <= PER %.2f%% on every row: ", mg.per_v, mg.per) +
                  (merged_ok ? "yes" : "no")};
}

Outcome determinism() {
  const SyntheticCorpus syn = generate_synthetic(toy_corpus_options());
  TrainConfig joint = toy_config();
  joint.max_steps = 30;
  TrainConfig resynth = joint;
  resynth.task = Task::kResynthesis;

  std::ostringstream a, b, c, d;
  train_resynthesis(resynth, syn.corpus, {&a, nullptr, nullptr});
  train_resynthesis(resynth, syn.corpus, {&b, nullptr, nullptr});
  train_joint(joint, syn.corpus, {&c, nullptr, nullptr});
  train_joint(joint, syn.corpus, {&d, nullptr, nullptr});
  const bool same_r = !a.str().empty() && a.str() == b.str();
  const bool same_j = !c.str().empty() && c.str() == d.str();
  return {same_r && same_j, std::string("resynthesis metrics ") + (same_r ? "identical" : "differ") +
                                ", joint metrics " + (same_j ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient_suite", gradient_suite},
      {"synthesis_oracle", synthesis_oracle},
      {"ctc_oracle", ctc_oracle},
      {"sparseness_algebra", sparseness_algebra},
      {"synthetic_recovery", synthetic_recovery},
      {"ablation", ablation},
      {"d_sweep", d_sweep},
      {"toy_joint", toy_joint},
      {"determinism", determinism},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
