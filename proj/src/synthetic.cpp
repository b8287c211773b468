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

#include "gestures/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "gestures/factorization.hpp"
#include "gestures/objectives.hpp"

namespace gestures {
namespace {

// Low-pass filtered noise under a Hann taper, unit RMS per gesture.
Tensor smooth_gestures(Index T, Index C, Index D, double width, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index half = std::max<Index>(1, static_cast<Index>(std::ceil(3.0 * width)));
  Eigen::VectorXd taps(2 * half + 1);
  for (Index k = -half; k <= half; ++k)
    taps[k + half] = std::exp(-0.5 * static_cast<double>(k * k) / (width * width));
  taps /= taps.sum();

  Tensor W({T, C, D});
  for (Index d = 0; d < D; ++d) {
    for (Index c = 0; c < C; ++c) {
      Eigen::VectorXd raw(T + 2 * half);
      for (Index i = 0; i < raw.size(); ++i) raw[i] = normal(rng);
      for (Index i = 0; i < T; ++i) {
        const double hann = std::sin(std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(T + 1));
        W(i, c, d) = hann * hann * taps.dot(raw.segment(i, 2 * half + 1));
      }
    }
    double sq = 0.0;
    for (Index i = 0; i < T; ++i)
      for (Index c = 0; c < C; ++c) sq += W(i, c, d) * W(i, c, d);
    const double scale = 1.0 / std::sqrt(sq / static_cast<double>(T * C));
    for (Index i = 0; i < T; ++i)
      for (Index c = 0; c < C; ++c) W(i, c, d) *= scale;
  }
  return W;
}

struct Onset {
  Index frame;
  Index gesture;
};

Tensor impulse_scores(Index D, Index t, Index refractory, const SyntheticOptions& o,
                      std::mt19937_64& rng, std::vector<Onset>& onsets) {
  std::exponential_distribution<double> gap(1.0 / std::max(1.0, o.mean_gap - static_cast<double>(refractory)));
  std::exponential_distribution<double> first(1.0 / o.mean_gap);
  std::uniform_real_distribution<double> amp(o.min_amplitude, o.max_amplitude);
  Tensor H({D, t});
  onsets.clear();
  for (Index d = 0; d < D; ++d) {
    Index pos = static_cast<Index>(first(rng));
    while (pos < t) {
      H(d, pos) = amp(rng);
      onsets.push_back({pos, d});
      pos += refractory + static_cast<Index>(gap(rng));
    }
  }
  std::sort(onsets.begin(), onsets.end(),
            [](const Onset& a, const Onset& b) { return std::tie(a.frame, a.gesture) < std::tie(b.frame, b.gesture); });
  return H;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& o) {
  if (o.gestures < 1 || o.channels < 1 || o.kernel < 1 || o.utterances < 1)
    throw std::invalid_argument("generate_synthetic: extents must be positive");
  if (o.min_length < 2 || o.max_length < o.min_length)
    throw std::invalid_argument("generate_synthetic: need 2 <= min_length <= max_length");
  if (o.noise < 0.0) throw std::invalid_argument("generate_synthetic: noise must be >= 0");
  if (!(o.smoothing > 0.0)) throw std::invalid_argument("generate_synthetic: smoothing must be > 0");

  std::mt19937_64 rng(o.seed);
  SyntheticCorpus out;
  out.truth.noise = o.noise;
  out.truth.W = smooth_gestures(o.kernel, o.channels, o.gestures, o.smoothing, rng);
  std::uniform_int_distribution<Index> length(o.min_length, o.max_length);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Index refractory = (o.kernel + 1) / 2;

  for (Index u = 0; u < o.utterances; ++u) {
    const Index t = length(rng);
    std::vector<Onset> onsets;
    Tensor H;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      H = impulse_scores(o.gestures, t, refractory, o, rng, onsets);
      ok = time_sparsity(H.matrix()) >= o.min_time_sparsity &&
           (o.gestures < 2 || channel_sparsity(H.matrix()) >= o.min_channel_sparsity);
    }
    if (!ok)
      throw DataError("generate_synthetic: cannot meet sparsity bounds for t=" + std::to_string(t));

    Tensor clean = convolutive_synthesis(out.truth.W, H);
    Tensor X = clean;
    if (o.noise > 0.0)
      for (Index i = 0; i < X.size(); ++i) X[i] += o.noise * noise(rng);

    Utterance utt;
    char id[32];
    std::snprintf(id, sizeof(id), "syn%04ld", static_cast<long>(u));
    utt.id = id;
    utt.frames = std::move(X);
    if (o.labels) {
      PhonemeSequence seq;
      for (const Onset& on : onsets) seq.push_back("g" + std::to_string(on.gesture));
      utt.labels = std::move(seq);
    }
    out.corpus.push_back(std::move(utt));
    out.truth.H.push_back(std::move(H));
    out.truth.clean.push_back(std::move(clean));
  }
  return out;
}

LabelAlphabet synthetic_alphabet(Index gestures, const std::vector<std::pair<Index, Index>>& merge) {
  std::vector<std::string> symbols;
  for (Index d = 0; d < gestures; ++d) symbols.push_back("g" + std::to_string(d));
  std::map<std::string, std::string> m;
  for (auto [from, to] : merge) m["g" + std::to_string(from)] = "g" + std::to_string(to);
  return LabelAlphabet(std::move(symbols), std::move(m));
}

}  // namespace gestures
