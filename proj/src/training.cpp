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

#include "gestures/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "gestures/errors.hpp"
#include "gestures/evaluation.hpp"
#include "gestures/factorization.hpp"
#include "gestures/recognizer.hpp"

namespace gestures {
namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<Parameter*> concat(std::vector<Parameter*> a, const std::vector<Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

bool finite(const LossReport& r) {
  return std::isfinite(r.total) && std::isfinite(r.rec) && (!r.ctc || std::isfinite(*r.ctc));
}

struct Session {
  const TrainConfig& config;
  bool joint;
  const TrainHooks& hooks;
  TrainResult result;

  NormStats norm;
  Corpus fit;  // normalized
  Corpus val;  // normalized
  std::optional<LabelAlphabet> alphabet;
  std::vector<std::vector<int>> fit_targets;

  GestureModel model;
  std::optional<RecognizerParams> recognizer;
  AdamState adam;
  std::mt19937_64 rng;

  bool have_best = false;
  double best_primary = std::numeric_limits<double>::infinity();
  double best_secondary = std::numeric_limits<double>::infinity();

  Session(const TrainConfig& c, bool j, const TrainHooks& h) : config(c), joint(j), hooks(h), rng(c.seed) {}

  void prepare(const Corpus& corpus) {
    config.validate();
    Split split = split_corpus(corpus, config.train_ratio, config.seed);
    const Index n_train = static_cast<Index>(split.train.size());
    const Index n_val = std::clamp<Index>(
        static_cast<Index>(std::floor(static_cast<double>(n_train) * config.validation_fraction + 1e-9)), 1,
        n_train - 1);
    Corpus raw_fit(split.train.begin(), split.train.end() - n_val);
    Corpus raw_val(split.train.end() - n_val, split.train.end());

    if (joint) {
      alphabet = make_alphabet(config);
      Corpus kept;
      for (auto& utt : raw_fit) {
        if (!utt.labels || utt.labels->empty())
          throw DataError(utt.id + ": joint training needs a non-empty label sequence");
        std::vector<int> target = alphabet->encode(*utt.labels);
        if (ctc_min_frames(target) > utt.length()) {
          ++result.skipped_utterances;
          continue;
        }
        fit_targets.push_back(std::move(target));
        kept.push_back(std::move(utt));
      }
      raw_fit = std::move(kept);
      if (static_cast<Index>(raw_fit.size()) < 1) throw DataError("joint training: no feasible utterances");
    }

    norm = compute_norm_stats(split.train);
    fit = normalize(raw_fit, norm);
    val = normalize(raw_val, norm);
    result.train = std::move(raw_fit);
    result.validation_set = std::move(raw_val);
    result.test = std::move(split.test);

    for (const auto& utt : fit)
      if (utt.channels() != config.model.channels)
        throw DataError(utt.id + ": " + std::to_string(utt.channels()) + " channels, model expects " +
                        std::to_string(config.model.channels));

    model = make_gesture_model(config.model, config.seed);
    model.decoder.W.value = kmeans_dictionary(fit, config.model.gestures, config.kmeans_window,
                                              config.kmeans_stride, config.seed,
                                              config.kmeans_max_iterations, config.kmeans_tolerance);
    if (joint) {
      RecognizerShape shape = config.recognizer;
      shape.input_features = config.model.gestures;
      shape.classes = alphabet->classes();
      recognizer = make_recognizer(shape, config.seed + 1);
    }
  }

  std::vector<Parameter*> parameters() {
    auto p = model.parameters();
    if (recognizer) p = concat(std::move(p), recognizer->parameters());
    return p;
  }

  Checkpoint snapshot(long step, Index epoch) const {
    Checkpoint c;
    c.config = config;
    c.config.task = joint ? Task::kJoint : Task::kResynthesis;
    c.norm = norm;
    c.model = model;
    c.recognizer = recognizer;
    c.alphabet = alphabet;
    c.step = step;
    c.epoch = epoch;
    return c;
  }

  ValidationRow validate(long step, Index epoch) {
    EvalOptions opts;
    opts.beam = false;
    RecognizerParams* rec = recognizer ? &*recognizer : nullptr;
    const EvalReport report = evaluate_normalized(model, rec, alphabet ? &*alphabet : nullptr, val, opts);
    ValidationRow row;
    row.epoch = epoch;
    row.step = step;
    row.rec_percent = report.mean_rec_percent();
    row.s1 = report.mean_s1();
    row.s2 = report.mean_s2();
    row.entropy = report.mean_entropy();
    if (rec && !report.greedy.empty()) {
      const PerSummary s = summarize(report.greedy);
      row.per = s.per;
      row.per_v = s.per_v;
    }
    return row;
  }

  void consider_best(const ValidationRow& row, long step, Index epoch) {
    const double primary = row.per ? *row.per : row.rec_percent;
    const double secondary = row.per ? row.rec_percent : 0.0;
    if (!std::isfinite(primary)) return;
    if (!have_best || primary < best_primary || (primary == best_primary && secondary < best_secondary)) {
      have_best = true;
      best_primary = primary;
      best_secondary = secondary;
      result.best = snapshot(step, epoch);
    }
  }

  LossReport train_step(const Batch& batch, double lr) {
    model.set_mode(NormMode::kTraining);
    if (recognizer) recognizer->set_mode(NormMode::kTraining);
    const auto params = parameters();
    for (Parameter* p : params) p->zero_grad();

    Tape tape;
    const Var X = tape.constant(batch.X);
    const ModelOutputs out = model_forward(tape, X, model, batch.lengths);
    const LossTerms terms = resynthesis_terms(tape, out.X_hat, batch.X, out.H, batch.lengths, config.loss.reconstruction);
    LossReport report;
    Var total;
    if (recognizer) {
      const Var lp = recognize(tape, out.H, *recognizer, batch.lengths);
      const Var ctc = ctc_loss(tape, lp, batch.targets, batch.lengths);
      total = joint_objective(tape, terms, ctc, config.loss, &report);
    } else {
      total = resynthesis_objective(tape, terms, config.loss, &report);
    }
    if (!finite(report)) throw NumericError("non-finite loss");
    tape.backward(total);
    if (!adam_step(params, adam, lr, config.weight_decay, config.decoupled_weight_decay))
      throw NumericError("non-finite gradient");
    if (config.renormalize_gestures) model.decoder.renormalize();
    return report;
  }

  void emit(const MetricsRow& row) {
    if (hooks.metrics) write_metrics_row(*hooks.metrics, row);
    result.metrics.push_back(row);
  }

  void run() {
    if (hooks.metrics) write_metrics_header(*hooks.metrics);
    if (hooks.validation) write_validation_header(*hooks.validation);
    const Index segment = joint ? 0 : config.segment_len;
    const Index n = static_cast<Index>(fit.size());
    std::vector<Index> order(static_cast<std::size_t>(n));
    long step = 0;
    result.best = snapshot(0, 0);
    for (Index epoch = 0; epoch < config.epochs; ++epoch) {
      if (config.max_steps > 0 && step >= config.max_steps) break;
      const double lr = lr_at(epoch, config);
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), rng);
      std::optional<MetricsRow> pending;
      for (Index b0 = 0; b0 < n; b0 += config.batch_size) {
        if (config.max_steps > 0 && step >= config.max_steps) break;
        std::vector<Segment> segments;
        std::vector<std::vector<int>> targets;
        for (Index i = b0; i < std::min(n, b0 + config.batch_size); ++i) {
          const auto u = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
          segments.push_back(sample_segment(fit[u], segment, rng));
          if (joint) targets.push_back(fit_targets[u]);
        }
        Batch batch = make_batch(segments);
        batch.targets = std::move(targets);
        LossReport report;
        try {
          report = train_step(batch, lr);
        } catch (const NumericError& e) {
          if (pending) emit(*pending);
          result.diverged = true;
          result.divergence_reason = "step " + std::to_string(step + 1) + ": " + e.what();
          return;
        }
        ++step;
        if (pending) emit(*pending);
        pending = MetricsRow{step, epoch, lr, report, std::nullopt, std::nullopt};
      }
      if (!pending) break;
      const ValidationRow vrow = validate(step, epoch);
      pending->val_per = vrow.per;
      pending->val_per_v = vrow.per_v;
      emit(*pending);
      result.validation.push_back(vrow);
      if (hooks.validation) write_validation_row(*hooks.validation, vrow);
      if (hooks.progress) {
        *hooks.progress << "epoch " << epoch << " step " << step << " lr " << lr << " loss "
                        << pending->loss.total << " val_rec% " << vrow.rec_percent << " val_s1 " << vrow.s1
                        << " val_s2 " << vrow.s2;
        if (vrow.per) *hooks.progress << " val_per " << *vrow.per;
        *hooks.progress << std::endl;
      }
      consider_best(vrow, step, epoch);
    }
  }
};

TrainResult train(const TrainConfig& config, const Corpus& corpus, bool joint, const TrainHooks& hooks) {
  Session s(config, joint, hooks);
  s.prepare(corpus);
  s.run();
  return std::move(s.result);
}

}  // namespace

bool adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr, double weight_decay,
               bool decoupled, const AdamOptions& o) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (const Parameter* p : params) {
    if (p->grad.shape() != p->value.shape())
      throw ShapeError("adam_step: gradient shape mismatch for '" + p->name + "'");
    if (!p->grad.data().allFinite()) return false;
  }
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const bool decay = p.decay && weight_decay != 0.0;
    Eigen::VectorXd g = p.grad.data();
    if (decay && !decoupled) g += weight_decay * p.value.data();
    auto& m = state.m[i].data();
    auto& v = state.v[i].data();
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
    auto& w = p.value.data();
    const auto m_hat = m / bc1;
    const auto v_hat = v / bc2;
    w.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + o.epsilon);
    if (decay && decoupled) w -= lr * weight_decay * w;
  }
  return true;
}

double lr_at(Index epoch, const TrainConfig& config) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  return config.lr / std::pow(config.lr_decay_factor, static_cast<double>(epoch / config.lr_decay_every));
}

Segment sample_segment(const Utterance& utt, Index len, std::mt19937_64& rng) {
  const Index t = utt.length(), C = utt.channels();
  if (t < 1) throw DataError(utt.id + ": empty utterance");
  Segment s;
  if (len == 0) {
    s.frames = utt.frames;
    s.valid = t;
    return s;
  }
  if (t >= len) {
    s.start = std::uniform_int_distribution<Index>(0, t - len)(rng);
    s.valid = len;
    s.frames = Tensor::from_matrix(utt.frames.matrix().middleCols(s.start, len));
  } else {
    s.valid = t;
    s.frames = Tensor({C, len});
    s.frames.matrix().leftCols(t) = utt.frames.matrix();
  }
  return s;
}

Batch make_batch(const std::vector<Segment>& segments) {
  if (segments.empty()) throw ShapeError("make_batch: no segments");
  const Index C = segments.front().frames.dim(0);
  Index L = 0;
  for (const auto& s : segments) {
    if (s.frames.dim(0) != C) throw ShapeError("make_batch: channel mismatch");
    L = std::max(L, s.frames.dim(1));
  }
  Batch b;
  b.X = Tensor({static_cast<Index>(segments.size()), C, L});
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    b.X.slice(static_cast<Index>(i)).leftCols(s.frames.dim(1)) = s.frames.matrix();
    b.lengths.push_back(s.valid);
  }
  return b;
}

void write_metrics_header(std::ostream& os) {
  os << "step,epoch,lr,rec,s1,s2,entropy,ctc,total,val_per,val_per_v\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  os << r.step << ',' << r.epoch << ',' << fmt(r.lr) << ',' << fmt(r.loss.rec) << ',' << fmt(r.loss.s1) << ','
     << fmt(r.loss.s2) << ',' << fmt(r.loss.entropy) << ',' << fmt(r.loss.ctc) << ',' << fmt(r.loss.total) << ','
     << fmt(r.val_per) << ',' << fmt(r.val_per_v) << '\n';
}

void write_validation_header(std::ostream& os) {
  os << "epoch,step,val_rec_pct,val_s1,val_s2,val_entropy,val_per,val_per_v\n";
}

void write_validation_row(std::ostream& os, const ValidationRow& r) {
  os << r.epoch << ',' << r.step << ',' << fmt(r.rec_percent) << ',' << fmt(r.s1) << ',' << fmt(r.s2) << ','
     << fmt(r.entropy) << ',' << fmt(r.per) << ',' << fmt(r.per_v) << '\n';
}

TrainResult train_resynthesis(const TrainConfig& config, const Corpus& corpus, const TrainHooks& hooks) {
  return train(config, corpus, false, hooks);
}

TrainResult train_joint(const TrainConfig& config, const Corpus& corpus, const TrainHooks& hooks) {
  return train(config, corpus, true, hooks);
}

}  // namespace gestures
