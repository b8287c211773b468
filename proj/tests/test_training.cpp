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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "gestures/checkpoint.hpp"
#include "gestures/evaluation.hpp"
#include "gestures/synthetic.hpp"
#include "gestures/training.hpp"
#include "oracles.hpp"

using namespace gestures;
namespace fs = std::filesystem;

namespace {

Parameter scalar_param(double x, bool decay = true) {
  Parameter p{"x", Tensor({1}, x), Tensor({1}), decay};
  return p;
}

// Minimizes 0.5 * a * (x - c)^2 with both implementations side by side.
double adam_gap(int steps, double wd, bool decoupled) {
  const double a = 3.0, c = 0.7, lr = 0.05;
  Parameter p = scalar_param(-1.2);
  AdamState state;
  oracle::ScalarAdam ref{lr};
  double x = -1.2;
  double gap = 0.0;
  for (int i = 0; i < steps; ++i) {
    p.grad[0] = a * (p.value[0] - c);
    REQUIRE(adam_step({&p}, state, lr, wd, decoupled));
    const double g = a * (x - c);
    if (decoupled) {
      const double updated = ref.step(x, g);
      x = updated - lr * wd * updated;
    } else {
      x = ref.step(x, g + wd * x);
    }
    gap = std::max(gap, std::abs(p.value[0] - x));
  }
  return gap;
}

SyntheticOptions tiny_synthetic(bool labels = false) {
  SyntheticOptions o;
  o.gestures = 3;
  o.channels = 4;
  o.kernel = 7;
  o.utterances = 20;
  o.min_length = 60;
  o.max_length = 90;
  o.mean_gap = 20.0;
  o.labels = labels;
  o.seed = 4;
  return o;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.channels = 4;
  c.model.gestures = 3;
  c.model.kernel = 7;
  c.model.encoder_hidden = 6;
  c.model.encoder_kernel1 = 5;
  c.model.encoder_kernel2 = 3;
  c.kmeans_window = 7;
  c.batch_size = 4;
  c.segment_len = 32;
  c.epochs = 2;
  c.lr = 3e-3;
  c.recognizer.input_features = 3;
  c.recognizer.front_channels = 6;
  c.recognizer.context_channels = 6;
  c.recognizer.projection_width = 6;
  c.recognizer.dilations = {1, 2};
  c.alphabet = "g0,g1,g2";
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gestures_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("adam matches the scalar reference") {
  CHECK(adam_gap(10, 0.0, false) < 1e-14);
  CHECK(adam_gap(100, 0.0, false) < 1e-12);
  CHECK(adam_gap(100, 0.01, false) < 1e-12);
  CHECK(adam_gap(100, 0.01, true) < 1e-12);
}

TEST_CASE("adam rejects non-finite gradients and honours decay exemptions") {
  Parameter p = scalar_param(2.0);
  AdamState state;
  p.grad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(adam_step({&p}, state, 0.1, 0.0));
  CHECK(p.value[0] == 2.0);
  CHECK(state.step == 0);
  CHECK_THROWS_AS(adam_step({&p}, state, 0.0, 0.0), std::invalid_argument);

  // zero gradient: only weight decay moves a decayed parameter
  Parameter decayed = scalar_param(2.0), exempt = scalar_param(2.0, false);
  AdamState s2;
  CHECK(adam_step({&decayed, &exempt}, s2, 0.1, 0.5, true));
  CHECK(decayed.value[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  CHECK(exempt.value[0] == 2.0);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.lr = 1e-3;
  c.lr_decay_every = 5;
  c.lr_decay_factor = 5.0;
  CHECK(lr_at(0, c) == 1e-3);
  CHECK(lr_at(4, c) == 1e-3);
  CHECK(lr_at(5, c) == doctest::Approx(2e-4));
  CHECK(lr_at(12, c) == doctest::Approx(4e-5));
  CHECK_THROWS_AS(lr_at(-1, c), std::invalid_argument);
}

TEST_CASE("segment sampling and batching") {
  Utterance u;
  u.id = "u";
  u.frames = Tensor({2, 10});
  for (Index t = 0; t < 10; ++t) u.frames(0, t) = u.frames(1, t) = static_cast<double>(t + 1);
  std::mt19937_64 rng(1), before = rng;
  const Segment whole = sample_segment(u, 0, rng);
  CHECK(rng == before);
  CHECK(whole.valid == 10);
  CHECK(whole.frames.dim(1) == 10);

  for (int i = 0; i < 50; ++i) {
    const Segment s = sample_segment(u, 4, rng);
    CHECK(s.valid == 4);
    CHECK(s.start >= 0);
    CHECK(s.start <= 6);
    CHECK(s.frames(0, 0) == static_cast<double>(s.start + 1));
  }
  const Segment padded = sample_segment(u, 15, rng);
  CHECK(padded.valid == 10);
  CHECK(padded.frames.dim(1) == 15);
  CHECK(padded.frames(1, 9) == 10.0);
  CHECK(padded.frames(1, 14) == 0.0);

  const Batch b = make_batch({whole, padded});
  CHECK(b.X.shape() == Shape{2, 2, 15});
  CHECK(b.lengths == std::vector<Index>{10, 10});
  CHECK(b.X(0, 0, 12) == 0.0);
  CHECK_THROWS_AS(make_batch({}), ShapeError);
}

TEST_CASE("metrics and validation csv layout") {
  std::ostringstream os;
  write_metrics_header(os);
  MetricsRow r;
  r.step = 3;
  r.epoch = 1;
  r.lr = 0.001;
  r.loss.rec = 0.5;
  r.loss.total = -1.25;
  write_metrics_row(os, r);
  r.val_per = 40.0;
  r.val_per_v = 30.0;
  r.loss.ctc = 2.0;
  write_metrics_row(os, r);
  CHECK(os.str() ==
        "step,epoch,lr,rec,s1,s2,entropy,ctc,total,val_per,val_per_v\n"
        "3,1,0.001,0.5,0,0,0,,-1.25,,\n"
        "3,1,0.001,0.5,0,0,0,2,-1.25,40,30\n");
  std::ostringstream vs;
  write_validation_header(vs);
  CHECK(vs.str() == "epoch,step,val_rec_pct,val_s1,val_s2,val_entropy,val_per,val_per_v\n");
}

TEST_CASE("resynthesis training is deterministic and logs every step") {
  const SyntheticCorpus syn = generate_synthetic(tiny_synthetic());
  const TrainConfig cfg = tiny_config();
  std::ostringstream m1, m2;
  const TrainResult a = train_resynthesis(cfg, syn.corpus, {&m1, nullptr, nullptr});
  const TrainResult b = train_resynthesis(cfg, syn.corpus, {&m2, nullptr, nullptr});
  CHECK_FALSE(a.diverged);
  CHECK(a.train.size() + a.validation_set.size() == 16);
  CHECK(a.test.size() == 4);
  CHECK(a.validation.size() == 2);
  CHECK(a.metrics.size() == 2 * 4);  // 14 fitting utterances in batches of 4
  CHECK(m1.str() == m2.str());
  const fs::path dir = temp_dir("determinism");
  save_checkpoint(dir / "a.txt", a.best);
  save_checkpoint(dir / "b.txt", b.best);
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));

  TrainConfig other = cfg;
  other.seed = 1;
  const TrainResult c = train_resynthesis(other, syn.corpus);
  CHECK(c.metrics.back().loss.total != a.metrics.back().loss.total);
}

TEST_CASE("joint training with zero sequence weight follows the resynthesis path") {
  const SyntheticCorpus syn = generate_synthetic(tiny_synthetic(true));
  TrainConfig cfg = tiny_config();
  cfg.task = Task::kJoint;
  cfg.epochs = 1;
  cfg.loss.lambda4 = 0.0;
  const TrainResult r = train_joint(cfg, syn.corpus);
  REQUIRE_FALSE(r.diverged);
  REQUIRE(r.best.recognizer.has_value());
  for (const MetricsRow& row : r.metrics) {
    REQUIRE(row.loss.ctc.has_value());
    LossWeights w = cfg.loss;
    CHECK(std::abs(row.loss.total - row.loss.recompute_total(w)) < 1e-9);
  }
  CHECK(r.metrics.back().val_per.has_value());
  Corpus unlabeled = syn.corpus;
  unlabeled[3].labels.reset();
  CHECK_THROWS_AS(train_joint(cfg, unlabeled), DataError);
}

TEST_CASE("an exploding learning rate is reported as divergence") {
  const SyntheticCorpus syn = generate_synthetic(tiny_synthetic());
  TrainConfig cfg = tiny_config();
  cfg.lr = 1e300;
  cfg.epochs = 5;
  const TrainResult r = train_resynthesis(cfg, syn.corpus);
  CHECK(r.diverged);
  CHECK_FALSE(r.divergence_reason.empty());
}

TEST_CASE("checkpoint round trip is bit exact") {
  const SyntheticCorpus syn = generate_synthetic(tiny_synthetic(true));
  TrainConfig cfg = tiny_config();
  cfg.task = Task::kJoint;
  cfg.epochs = 1;
  cfg.merge = "g1:g0";
  const TrainResult r = train_joint(cfg, syn.corpus);
  REQUIRE_FALSE(r.diverged);
  const fs::path dir = temp_dir("checkpoint");
  save_checkpoint(dir / "ckpt.txt", r.best);
  Checkpoint loaded = load_checkpoint(dir / "ckpt.txt");
  save_checkpoint(dir / "again.txt", loaded);
  CHECK(slurp(dir / "ckpt.txt") == slurp(dir / "again.txt"));
  CHECK(loaded.step == r.best.step);
  CHECK(loaded.alphabet->merged("g1") == "g0");
  CHECK((loaded.norm.mean - r.best.norm.mean).cwiseAbs().maxCoeff() == 0.0);

  Checkpoint original = r.best;
  const EvalReport e1 = evaluate(original, r.test);
  const EvalReport e2 = evaluate(loaded, r.test);
  REQUIRE(e1.resynthesis.size() == e2.resynthesis.size());
  for (std::size_t i = 0; i < e1.resynthesis.size(); ++i)
    CHECK(e1.resynthesis[i].rec_percent == e2.resynthesis[i].rec_percent);

  std::ofstream(dir / "bad.txt") << "not a checkpoint\n";
  CHECK_THROWS(load_checkpoint(dir / "bad.txt"));
  std::string text = slurp(dir / "ckpt.txt");
  text.replace(text.find("tensor decoder.W"), 16, "tensor decoder.X");
  std::ofstream(dir / "renamed.txt") << text;
  CHECK_THROWS(load_checkpoint(dir / "renamed.txt"));
}
