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

#pragma once

#include <cstdint>
#include <vector>

#include "gestures/ctc.hpp"
#include "gestures/data_io.hpp"
#include "gestures/tensor.hpp"

namespace gestures {

// Ground-truth corpus X = sum_i W*(i) H*->i + noise with smooth random
// gestures and sparse impulse-train scores.
struct SyntheticOptions {
  Index gestures = 8;
  Index channels = kEmaChannelCount;
  Index kernel = 41;
  Index utterances = 200;
  Index min_length = 400;
  Index max_length = 800;
  double noise = 0.01;
  std::uint64_t seed = 0;
  double mean_gap = 120.0;  // mean frames between onsets of one gesture
  double smoothing = 0.8;   // Gaussian low-pass width in frames
  double min_amplitude = 0.5;
  double max_amplitude = 2.0;
  bool labels = false;      // gesture ids in onset order
  double min_time_sparsity = 0.92;
  double min_channel_sparsity = 0.90;
};

struct SyntheticTruth {
  Tensor W;                // T x C x D*
  std::vector<Tensor> H;   // D* x t per utterance
  std::vector<Tensor> clean;  // noiseless C x t per utterance
  double noise = 0.0;
};

struct SyntheticCorpus {
  Corpus corpus;
  SyntheticTruth truth;
};

/// Throws DataError when the sparsity bounds cannot be met (tiny t).
SyntheticCorpus generate_synthetic(const SyntheticOptions& options);

/// Symbols g0..g{D-1}; `merge` pairs are (from, to) class merges.
LabelAlphabet synthetic_alphabet(Index gestures,
                                 const std::vector<std::pair<Index, Index>>& merge = {});

}  // namespace gestures
