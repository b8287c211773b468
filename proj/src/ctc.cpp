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

#include "gestures/ctc.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <tuple>

namespace gestures {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

LabelAlphabet::LabelAlphabet(std::vector<std::string> symbols, std::map<std::string, std::string> merge)
    : symbols_(std::move(symbols)), merge_(std::move(merge)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty() || symbols_[i] == "<blank>")
      throw DataError("LabelAlphabet: invalid symbol '" + symbols_[i] + "'");
    if (!index_.emplace(symbols_[i], static_cast<int>(i) + 1).second)
      throw DataError("LabelAlphabet: duplicate symbol '" + symbols_[i] + "'");
  }
  for (const auto& [from, to] : merge_) {
    if (!contains(from) || !contains(to))
      throw DataError("LabelAlphabet: merge entry " + from + "->" + to + " outside the alphabet");
    if (merged(to) != to)
      throw DataError("LabelAlphabet: merge map is not idempotent at '" + to + "'");
  }
}

LabelAlphabet LabelAlphabet::cmu39() {
  std::vector<std::string> phones = {"aa", "ae", "ah", "ao", "aw", "ay", "b",  "ch", "d",  "dh",
                                     "eh", "er", "ey", "f",  "g",  "hh", "ih", "iy", "jh", "k",
                                     "l",  "m",  "n",  "ng", "ow", "oy", "p",  "r",  "s",  "sh",
                                     "t",  "th", "uh", "uw", "v",  "w",  "y",  "z",  "zh"};
  const std::vector<std::vector<std::string>> tuples = {
      {"p", "b", "m"}, {"t", "d", "n"}, {"ch", "jh"}, {"f", "v"},
      {"sh", "zh"},    {"k", "g", "ng"}, {"s", "z"},  {"th", "dh"}};
  std::map<std::string, std::string> merge;
  for (const auto& group : tuples)
    for (const auto& s : group) merge[s] = group.front();
  return LabelAlphabet(std::move(phones), std::move(merge));
}

int LabelAlphabet::index_of(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw DataError("unknown phone symbol '" + symbol + "'");
  return it->second;
}

const std::string& LabelAlphabet::symbol(int index) const {
  if (index < 1 || index > static_cast<int>(symbols_.size()))
    throw DataError("label index " + std::to_string(index) + " outside the alphabet");
  return symbols_[static_cast<std::size_t>(index - 1)];
}

const std::string& LabelAlphabet::merged(const std::string& symbol) const {
  auto it = merge_.find(symbol);
  return it == merge_.end() ? symbol : it->second;
}

std::vector<int> LabelAlphabet::encode(const PhonemeSequence& seq) const {
  std::vector<int> out;
  out.reserve(seq.size());
  for (const auto& s : seq) out.push_back(index_of(s));
  return out;
}

PhonemeSequence LabelAlphabet::decode(const std::vector<int>& labels) const {
  PhonemeSequence out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(symbol(l));
  return out;
}

PhonemeSequence LabelAlphabet::merge(const PhonemeSequence& seq) const {
  PhonemeSequence out;
  out.reserve(seq.size());
  for (const auto& s : seq) out.push_back(merged(s));
  return out;
}

Index ctc_min_frames(const std::vector<int>& target) {
  Index n = static_cast<Index>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

CtcResult ctc_loss(const Eigen::Ref<const RowMatrix>& log_probs, const std::vector<int>& target,
                   bool with_grad) {
  for (Index t = 0; t < log_probs.rows(); ++t) {
    const double mx = log_probs.row(t).maxCoeff();
    const double lse = mx + std::log((log_probs.row(t).array() - mx).exp().sum());
    if (!(std::abs(lse) < 1e-8))
      throw std::invalid_argument("ctc_loss: frame " + std::to_string(t) +
                                  " is not log-softmax normalized");
  }
  return ctc_loss_unchecked(log_probs, target, with_grad);
}

CtcResult ctc_loss_unchecked(const Eigen::Ref<const RowMatrix>& lp, const std::vector<int>& target,
                             bool with_grad) {
  const Index T = lp.rows(), K = lp.cols();
  if (T < 1) throw ShapeError("ctc_loss: no frames");
  for (int l : target)
    if (l < 1 || l >= K) throw std::invalid_argument("ctc_loss: target label outside [1, K)");
  if (T < ctc_min_frames(target))
    throw CtcInfeasibleError("ctc_loss: " + std::to_string(T) + " frames cannot align a target needing " +
                             std::to_string(ctc_min_frames(target)));

  // Blank-interleaved extended target.
  const Index S = 2 * static_cast<Index>(target.size()) + 1;
  std::vector<int> ext(static_cast<std::size_t>(S), kBlank);
  for (std::size_t u = 0; u < target.size(); ++u) ext[2 * u + 1] = target[u];
  auto skip_allowed = [&](Index s) {  // may jump from s-2 to s
    return s >= 2 && ext[static_cast<std::size_t>(s)] != kBlank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  RowMatrix alpha = RowMatrix::Constant(T, S, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (S > 1) alpha(0, 1) = lp(0, ext[1]);
  for (Index t = 1; t < T; ++t)
    for (Index s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (skip_allowed(s)) a = log_add(a, alpha(t - 1, s - 2));
      if (a != kNegInf) alpha(t, s) = a + lp(t, ext[static_cast<std::size_t>(s)]);
    }
  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, alpha(T - 1, S - 2));
  if (!std::isfinite(log_p)) throw NumericError("ctc_loss: target has zero probability");

  CtcResult r;
  r.loss = -log_p;
  if (!with_grad) return r;

  RowMatrix beta = RowMatrix::Constant(T, S, kNegInf);
  beta(T - 1, S - 1) = lp(T - 1, ext[static_cast<std::size_t>(S - 1)]);
  if (S > 1) beta(T - 1, S - 2) = lp(T - 1, ext[static_cast<std::size_t>(S - 2)]);
  for (Index t = T - 2; t >= 0; --t)
    for (Index s = 0; s < S; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < S && skip_allowed(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      if (b != kNegInf) beta(t, s) = b + lp(t, ext[static_cast<std::size_t>(s)]);
    }

  // d(-ln P)/d lp[t,k] = -sum_{s: ext_s = k} alpha_t(s) beta_t(s) / (y_t(k) P)
  r.grad = RowMatrix::Zero(T, K);
  RowMatrix occupancy = RowMatrix::Constant(T, K, kNegInf);
  for (Index t = 0; t < T; ++t)
    for (Index s = 0; s < S; ++s) {
      const int k = ext[static_cast<std::size_t>(s)];
      occupancy(t, k) = log_add(occupancy(t, k), alpha(t, s) + beta(t, s));
    }
  for (Index t = 0; t < T; ++t)
    for (Index k = 0; k < K; ++k)
      if (occupancy(t, k) != kNegInf) r.grad(t, k) = -std::exp(occupancy(t, k) - lp(t, k) - log_p);
  return r;
}

Var ctc_loss(Tape& tape, Var log_probs, const std::vector<std::vector<int>>& targets, Lengths lengths) {
  const Tensor& lp = tape.value(log_probs);
  require_rank(lp, 3, "ctc_loss log_probs");
  const Index B = lp.dim(0), L = lp.dim(2);
  if (static_cast<Index>(targets.size()) != B) throw ShapeError("ctc_loss: one target per element");
  if (!lengths.empty() && static_cast<Index>(lengths.size()) != B)
    throw ShapeError("ctc_loss: lengths size does not match batch");
  auto grad = std::make_shared<Tensor>(lp.shape());
  double total = 0.0;
  for (Index b = 0; b < B; ++b) {
    const Index n = lengths.empty() ? L : lengths[static_cast<std::size_t>(b)];
    const RowMatrix frames = lp.slice(b).leftCols(n).transpose();
    CtcResult r = ctc_loss(frames, targets[static_cast<std::size_t>(b)]);
    total += r.loss;
    grad->slice(b).leftCols(n) = r.grad.transpose() / static_cast<double>(B);
  }
  return tape.record("ctc_loss", Tensor({1}, total / static_cast<double>(B)), {log_probs},
                     [grad, log_probs](Tape& t, const Tensor& go) {
                       Tensor gi = *grad;
                       gi.data() *= go[0];
                       t.accumulate(log_probs, gi);
                     });
}

std::vector<int> greedy_decode(const Eigen::Ref<const RowMatrix>& log_probs) {
  std::vector<int> out;
  int prev = -1;
  for (Index t = 0; t < log_probs.rows(); ++t) {
    Index best = 0;
    log_probs.row(t).maxCoeff(&best);  // first maximum on ties
    const int k = static_cast<int>(best);
    if (k != kBlank && k != prev) out.push_back(k);
    prev = k;
  }
  return out;
}

BeamHypothesis beam_search(const Eigen::Ref<const RowMatrix>& lp, Index width) {
  if (width < 1) throw std::invalid_argument("beam_search: width must be >= 1");
  struct Score {
    double blank = kNegInf;
    double label = kNegInf;
    double total() const { return log_add(blank, label); }
  };
  using Beam = std::map<std::vector<int>, Score>;
  Beam beam;
  beam[{}] = Score{0.0, kNegInf};
  const Index K = lp.cols();

  for (Index t = 0; t < lp.rows(); ++t) {
    Beam next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      Score& same = next[prefix];
      same.blank = log_add(same.blank, total + lp(t, kBlank));
      for (int k = 1; k < K; ++k) {
        std::vector<int> extended = prefix;
        extended.push_back(k);
        Score& ext = next[extended];
        if (!prefix.empty() && prefix.back() == k) {
          // A repeat needs an intervening blank; without one it stays on prefix.
          ext.label = log_add(ext.label, score.blank + lp(t, k));
          Score& stay = next[prefix];
          stay.label = log_add(stay.label, score.label + lp(t, k));
        } else {
          ext.label = log_add(ext.label, total + lp(t, k));
        }
      }
    }
    std::vector<std::pair<std::vector<int>, Score>> ranked(next.begin(), next.end());
    // std::map order is lexicographic, so a stable sort on score keeps ties ordered.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second.total() > b.second.total(); });
    if (static_cast<Index>(ranked.size()) > width) ranked.resize(static_cast<std::size_t>(width));
    beam = Beam(ranked.begin(), ranked.end());
  }

  BeamHypothesis best{{}, kNegInf};
  bool first = true;
  for (const auto& [prefix, score] : beam) {
    if (first || score.total() > best.log_prob) {
      best = {prefix, score.total()};
      first = false;
    }
  }
  return best;
}

std::vector<int> beam_decode(const Eigen::Ref<const RowMatrix>& log_probs, Index width) {
  return beam_search(log_probs, width).labels;
}

PerResult phoneme_error_rate(const std::vector<PhonemeSequence>& refs,
                             const std::vector<PhonemeSequence>& hyps, const LabelAlphabet& alphabet,
                             bool merge) {
  if (refs.size() != hyps.size()) throw std::invalid_argument("phoneme_error_rate: list sizes differ");
  PerResult r;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (merge) {
      r.edits += edit_distance(alphabet.merge(refs[i]), alphabet.merge(hyps[i]));
    } else {
      r.edits += edit_distance(refs[i], hyps[i]);
    }
    r.ref_length += static_cast<Index>(refs[i].size());
  }
  if (r.ref_length == 0) throw std::invalid_argument("phoneme_error_rate: empty references");
  r.percent = 100.0 * static_cast<double>(r.edits) / static_cast<double>(r.ref_length);
  return r;
}

}  // namespace gestures
