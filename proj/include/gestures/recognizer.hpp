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

#include "gestures/factorization.hpp"
#include "gestures/ops.hpp"
#include "gestures/tape.hpp"

namespace gestures {

// Frame-level phone classifier. Convolutional front end, a dilated temporal
// convolution stack in place of a recurrent body, pointwise projections and
// a per-frame log-softmax over blank + phones.
struct RecognizerShape {
  Index input_features = kEmaChannelCount;
  Index classes = 40;  // phones + blank
  Index front_layers = 3;
  Index front_kernel = 5;
  Index front_channels = 64;
  std::vector<Index> dilations = {1, 2, 4, 8};
  Index context_kernel = 5;
  Index context_channels = 256;
  Index projection_layers = 2;
  Index projection_width = 128;
};

struct RecognizerParams {
  RecognizerShape shape;
  std::vector<Conv1dLayer> front;
  std::vector<BatchNormState> front_norms;
  std::vector<Conv1dLayer> context;
  std::vector<BatchNormState> context_norms;
  std::vector<Conv1dLayer> projection;
  Conv1dLayer output;

  std::vector<Parameter*> parameters();
  std::vector<BatchNormState*> norms();
  void set_mode(NormMode mode);
};

RecognizerParams make_recognizer(const RecognizerShape& shape, std::uint64_t seed);

/// B x F x t features -> B x classes x t log-probabilities, length preserved.
Var recognize(Tape& tape, Var input, RecognizerParams& params, Lengths lengths = {});
Tensor recognize(const Tensor& input, RecognizerParams& params, Lengths lengths = {});

/// Frames x classes log-probabilities of batch element b, first n frames.
RowMatrix frame_log_probs(const Tensor& log_probs, Index b, Index n);

}  // namespace gestures
