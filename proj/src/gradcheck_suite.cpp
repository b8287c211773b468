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

#include <algorithm>
#include <memory>

#include "gestures/ctc.hpp"
#include "gestures/factorization.hpp"
#include "gestures/gradcheck.hpp"
#include "gestures/objectives.hpp"
#include "gestures/ops.hpp"
#include "gestures/recognizer.hpp"

namespace gestures {
namespace {

using Build = std::function<Var(Tape&)>;

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Values with |x| in [0.1, 1] and a random sign, away from kinks at zero.
Tensor away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  Tensor t = uniform(shape, rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (Index i = 0; i < t.size(); ++i)
    if (flip(rng)) t[i] = -t[i];
  return t;
}

Index pick(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

Parameter param(std::string name, Tensor value) {
  Parameter p{std::move(name), std::move(value), Tensor(), true};
  p.zero_grad();
  return p;
}

// Reduces a tensor to a scalar through a fixed random projection.
Var project(Tape& tape, Var x, std::shared_ptr<const Tensor> r) {
  const Tensor& v = tape.value(x);
  const double s = v.data().dot(r->data());
  return tape.record("project", Tensor({1}, s), {x}, [x, r](Tape& t, const Tensor& go) {
    Tensor g = *r;
    g.data() *= go[0];
    t.accumulate(x, g);
  });
}

// Compares Parameter gradients from one backward pass against central
// differences of the same graph rebuilt on fresh tapes.
double check(const std::vector<Parameter*>& params, const Build& build, std::mt19937_64& rng,
             Index max_coordinates = 0) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<Tensor> point, analytic;
  for (Parameter* p : params) {
    point.push_back(p->value);
    analytic.push_back(p->grad);
  }
  ScalarFunction f = [&](const std::vector<Tensor>& x) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = x[i];
    Tape tape;
    return tape.value(build(tape))[0];
  };
  FiniteDifferenceOptions options;
  options.max_coordinates = max_coordinates;
  options.seed = rng();
  const double err = finite_difference_check(f, point, analytic, options);
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = point[i];
  return err;
}

std::vector<Index> random_lengths(std::mt19937_64& rng, Index B, Index L, Index min_len) {
  std::vector<Index> lengths(static_cast<std::size_t>(B));
  for (auto& n : lengths) n = pick(rng, min_len, L);
  lengths[0] = L;
  return lengths;
}

double conv_item(std::mt19937_64& rng) {
  const Index B = pick(rng, 1, 3), Cin = pick(rng, 1, 4), Cout = pick(rng, 1, 4), L = pick(rng, 2, 9);
  const Index K = pick(rng, 1, 6);
  Conv1dOptions opt;
  opt.dilation = pick(rng, 1, 2);
  Parameter x = param("x", uniform({B, Cin, L}, rng));
  Parameter k = param("k", uniform({K, Cin, Cout}, rng));
  Parameter b = param("b", uniform({Cout}, rng));
  auto r = std::make_shared<const Tensor>(uniform({B, Cout, L}, rng));
  return check({&x, &k, &b},
               [&](Tape& t) {
                 return project(t, conv1d(t, t.parameter(x), t.parameter(k), t.parameter(b), opt), r);
               },
               rng);
}

double relu_item(std::mt19937_64& rng) {
  const Index n = pick(rng, 2, 6);
  Parameter x = param("x", away_from_zero({2, n, 5}, rng));
  auto r = std::make_shared<const Tensor>(uniform({2, n, 5}, rng));
  return check({&x}, [&](Tape& t) { return project(t, relu(t, t.parameter(x)), r); }, rng);
}

double batchnorm_item(std::mt19937_64& rng, bool training) {
  const Index B = pick(rng, 2, 3), C = pick(rng, 1, 4), L = pick(rng, 3, 8);
  BatchNormState bn = make_batchnorm(C, "bn");
  bn.gamma.value = uniform({C}, rng, 0.5, 1.5);
  bn.beta.value = uniform({C}, rng);
  bn.mode = training ? NormMode::kTraining : NormMode::kInference;
  if (!training) {
    bn.running_mean = uniform({C}, rng).data();
    bn.running_var = uniform({C}, rng, 0.5, 2.0).data();
    bn.stats_ready = true;
  }
  const std::vector<Index> lengths = random_lengths(rng, B, L, 2);
  Parameter x = param("x", uniform({B, C, L}, rng, -2.0, 2.0));
  auto r = std::make_shared<const Tensor>(uniform({B, C, L}, rng));
  return check({&x, &bn.gamma, &bn.beta},
               [&](Tape& t) { return project(t, batchnorm1d(t, t.parameter(x), bn, lengths), r); }, rng);
}

double log_softmax_item(std::mt19937_64& rng) {
  const Index K = pick(rng, 2, 6), L = pick(rng, 1, 5);
  Parameter x = param("x", uniform({2, K, L}, rng, -3.0, 3.0));
  auto r = std::make_shared<const Tensor>(uniform({2, K, L}, rng));
  return check({&x}, [&](Tape& t) { return project(t, log_softmax_channels(t, t.parameter(x)), r); }, rng);
}

struct ScoreCase {
  Parameter H;
  std::vector<Index> lengths;
};

ScoreCase score_case(std::mt19937_64& rng) {
  const Index B = pick(rng, 1, 3), D = pick(rng, 2, 5), L = pick(rng, 3, 10);
  return {param("H", uniform({B, D, L}, rng, 0.05, 1.0)), random_lengths(rng, B, L, 2)};
}

double reconstruction_item(std::mt19937_64& rng) {
  const Index B = 2, C = pick(rng, 1, 4), L = pick(rng, 2, 8);
  const std::vector<Index> lengths = random_lengths(rng, B, L, 1);
  Parameter X_hat = param("X_hat", uniform({B, C, L}, rng));
  const Tensor X = uniform({B, C, L}, rng);
  double worst = 0.0;
  for (RecLoss kind : {RecLoss::kMse, RecLoss::kSse, RecLoss::kNorm}) {
    worst = std::max(worst, check({&X_hat}, [&](Tape& t) {
      return masked_reconstruction(t, t.parameter(X_hat), X, kind, lengths);
    }, rng));
  }
  return worst;
}

template <typename Fn>
double score_item(std::mt19937_64& rng, Fn fn) {
  ScoreCase s = score_case(rng);
  return check({&s.H}, [&](Tape& t) { return fn(t, t.parameter(s.H), Lengths(s.lengths)); }, rng);
}

double objective_item(std::mt19937_64& rng, bool joint) {
  const Index B = 2, C = 3, D = pick(rng, 2, 4), L = pick(rng, 4, 8), K = 3;
  const std::vector<Index> lengths = random_lengths(rng, B, L, 4);
  Parameter H = param("H", uniform({B, D, L}, rng, 0.05, 1.0));
  Parameter X_hat = param("X_hat", uniform({B, C, L}, rng));
  Parameter logits = param("logits", uniform({B, K, L}, rng, -2.0, 2.0));
  const Tensor X = uniform({B, C, L}, rng);
  const std::vector<std::vector<int>> targets = {{1, 2}, {2}};
  LossWeights w{uniform({1}, rng, 0.5, 2.0)[0], uniform({1}, rng, 0.5, 2.0)[0], uniform({1}, rng, 0.5, 2.0)[0],
                uniform({1}, rng, 0.5, 2.0)[0]};
  std::vector<Parameter*> params = {&H, &X_hat};
  if (joint) params.push_back(&logits);
  return check(params,
               [&](Tape& t) {
                 const LossTerms terms = resynthesis_terms(t, t.parameter(X_hat), X, t.parameter(H), lengths);
                 if (!joint) return resynthesis_objective(t, terms, w);
                 const Var lp = log_softmax_channels(t, t.parameter(logits));
                 return joint_objective(t, terms, ctc_loss(t, lp, targets, lengths), w);
               },
               rng);
}

double ctc_item(std::mt19937_64& rng) {
  const Index B = 2, K = pick(rng, 2, 4), L = pick(rng, 4, 8);
  const std::vector<Index> lengths = random_lengths(rng, B, L, 4);
  std::vector<std::vector<int>> targets(B);
  for (auto& tgt : targets) {
    const Index n = pick(rng, 0, 2);
    for (Index i = 0; i < n; ++i) tgt.push_back(static_cast<int>(pick(rng, 1, K - 1)));
  }
  Parameter logits = param("logits", uniform({B, K, L}, rng, -2.0, 2.0));
  return check({&logits},
               [&](Tape& t) { return ctc_loss(t, log_softmax_channels(t, t.parameter(logits)), targets, lengths); },
               rng);
}

double decode_item(std::mt19937_64& rng) {
  const Index B = 2, C = pick(rng, 1, 3), D = pick(rng, 1, 3), T = pick(rng, 1, 6), L = pick(rng, 2, 9);
  GestureDictionary dict{param("W", uniform({T, C, D}, rng)), param("bias", uniform({C}, rng))};
  Parameter H = param("H", uniform({B, D, L}, rng, 0.0, 1.0));
  const Alignment align = pick(rng, 0, 1) ? Alignment::kCausal : Alignment::kSame;
  auto r = std::make_shared<const Tensor>(uniform({B, C, L}, rng));
  return check({&H, &dict.W, &dict.bias},
               [&](Tape& t) { return project(t, decode(t, t.parameter(H), dict, align), r); }, rng);
}

ModelShape tiny_shape(std::mt19937_64& rng) {
  ModelShape s;
  s.channels = 3;
  s.gestures = pick(rng, 2, 3);
  s.kernel = pick(rng, 3, 5);
  s.encoder_hidden = 4;
  s.encoder_kernel1 = 3;
  s.encoder_kernel2 = 3;
  return s;
}

double model_item(std::mt19937_64& rng, bool joint) {
  const ModelShape shape = tiny_shape(rng);
  GestureModel model = make_gesture_model(shape, rng());
  model.decoder.W.value = uniform(model.decoder.W.value.shape(), rng, -0.5, 0.5);
  const Index B = 2, L = pick(rng, 6, 9);
  const std::vector<Index> lengths = random_lengths(rng, B, L, 5);
  const Tensor X = uniform({B, shape.channels, L}, rng, -2.0, 2.0);
  LossWeights w{1.0, 1.0, 1.0, 1.0};
  std::vector<Parameter*> params = model.parameters();
  RecognizerParams rec;
  const std::vector<std::vector<int>> targets = {{1, 2}, {1}};
  if (joint) {
    RecognizerShape rs;
    rs.input_features = shape.gestures;
    rs.classes = 3;
    rs.front_layers = 1;
    rs.front_kernel = 3;
    rs.front_channels = 3;
    rs.dilations = {1, 2};
    rs.context_kernel = 3;
    rs.context_channels = 3;
    rs.projection_layers = 1;
    rs.projection_width = 3;
    rec = make_recognizer(rs, rng());
    for (Parameter* p : rec.parameters()) params.push_back(p);
  }
  return check(params,
               [&](Tape& t) {
                 const Var x = t.constant(X);
                 const ModelOutputs out = model_forward(t, x, model, lengths);
                 const LossTerms terms = resynthesis_terms(t, out.X_hat, X, out.H, lengths);
                 if (!joint) return resynthesis_objective(t, terms, w);
                 const Var lp = recognize(t, out.H, rec, lengths);
                 return joint_objective(t, terms, ctc_loss(t, lp, targets, lengths), w);
               },
               rng, 6);
}

}  // namespace

std::vector<GradCheckItem> standard_gradcheck_items() {
  return {
      {"conv1d", conv_item},
      {"relu", relu_item},
      {"batchnorm1d/training", [](std::mt19937_64& r) { return batchnorm_item(r, true); }},
      {"batchnorm1d/inference", [](std::mt19937_64& r) { return batchnorm_item(r, false); }},
      {"log_softmax", log_softmax_item},
      {"decode", decode_item},
      {"loss/reconstruction", reconstruction_item},
      {"loss/time_sparsity",
       [](std::mt19937_64& r) {
         return score_item(r, [](Tape& t, Var h, Lengths l) { return batch_time_sparsity(t, h, l); });
       }},
      {"loss/channel_sparsity",
       [](std::mt19937_64& r) {
         return score_item(r, [](Tape& t, Var h, Lengths l) { return batch_channel_sparsity(t, h, l); });
       }},
      {"loss/entropy",
       [](std::mt19937_64& r) {
         return score_item(r, [](Tape& t, Var h, Lengths l) { return batch_entropy(t, h, l); });
       }},
      {"loss/resynthesis", [](std::mt19937_64& r) { return objective_item(r, false); }},
      {"loss/joint", [](std::mt19937_64& r) { return objective_item(r, true); }},
      {"ctc", ctc_item},
      {"model/resynthesis", [](std::mt19937_64& r) { return model_item(r, false); }},
      {"model/joint", [](std::mt19937_64& r) { return model_item(r, true); }},
  };
}

}  // namespace gestures
