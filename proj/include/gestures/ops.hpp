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

#include <span>
#include <string>
#include <vector>

#include "gestures/tape.hpp"
#include "gestures/tensor.hpp"

namespace gestures {

/// Number of valid frames per batch element; an empty span means "all".
using Lengths = std::span<const Index>;

struct Padding {
  Index left = 0;
  Index right = 0;
};

/// Length-preserving padding for stride 1: floor((span-1)/2) on the left,
/// ceil((span-1)/2) on the right, span = dilation*(K-1)+1.
Padding same_padding(Index kernel_size, Index dilation = 1);
/// All padding on the left: output frame t only sees inputs <= t.
Padding causal_padding(Index kernel_size, Index dilation = 1);

struct Conv1dOptions {
  Index dilation = 1;
  bool same = true;
  Padding padding;  // used when same == false
};

// ---------------------------------------------------------------------------
// conv1d
//
// input  B x Cin x L, kernel K x Cin x Cout, bias Cout (or empty)
// out[b,co,t] = bias[co] + sum_{k,ci} kernel[k,ci,co] * in_pad[b,ci,t + k*dilation]
// Cross-correlation, no kernel flip.
// ---------------------------------------------------------------------------

struct Conv1dCache {
  Tensor input;
  Tensor kernel;
  bool has_bias = false;
  Conv1dOptions options;
  bool valid() const { return !input.empty() && !kernel.empty(); }
};

struct Conv1dGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;  // empty when the forward had no bias
};

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              const Conv1dOptions& options = {}, Conv1dCache* cache = nullptr);
Conv1dGrads conv1d_backward(const Tensor& grad_out, const Conv1dCache& cache);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

// ---------------------------------------------------------------------------
// Batch normalization over (batch, time) per channel.
// ---------------------------------------------------------------------------

enum class NormMode { kTraining, kInference };

struct BatchNormState {
  Parameter gamma;
  Parameter beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  NormMode mode = NormMode::kTraining;
  // False until a training-mode forward updated the running statistics.
  bool stats_ready = false;

  Index channels() const { return gamma.value.size(); }
  /// Marks running statistics as mean 0 / variance 1 so inference is allowed.
  void seed_running_stats();
};

BatchNormState make_batchnorm(Index channels, const std::string& name);

struct BatchNormCache {
  Tensor normalized;
  Eigen::VectorXd inv_std;
  Eigen::VectorXd gamma;
  std::vector<Index> lengths;
  bool training = true;
  bool valid() const { return !normalized.empty(); }
};

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

/// Statistics are taken over the valid frames given by `lengths`; frames past
/// a length are still transformed with those statistics.
Tensor batchnorm1d(const Tensor& input, BatchNormState& state, Lengths lengths = {},
                   BatchNormCache* cache = nullptr);
BatchNormGrads batchnorm1d_backward(const Tensor& grad_out, const BatchNormCache& cache);

// ---------------------------------------------------------------------------
// Taped operators.
// ---------------------------------------------------------------------------

Var conv1d(Tape& tape, Var input, Var kernel, Var bias, const Conv1dOptions& options = {});
Var relu(Tape& tape, Var input);
Var batchnorm1d(Tape& tape, Var input, BatchNormState& state, Lengths lengths = {});
/// Zeroes frames t >= lengths[b] of a B x C x L tensor.
Var mask_frames(Tape& tape, Var input, Lengths lengths);
/// Log-softmax over the channel axis of a B x K x L tensor.
Var log_softmax_channels(Tape& tape, Var input);
/// Maps a gesture dictionary W (T x C x D, forward-time order) onto the
/// cross-correlation kernel (T x D x C) that synthesizes C channels from D
/// activations: kernel[k,d,c] = W[T-1-k,c,d].
Var dictionary_kernel(Tape& tape, Var dictionary);
/// sum_i coeffs[i] * inputs[i] over single-element tensors.
Var weighted_sum(Tape& tape, const std::vector<Var>& inputs, const std::vector<double>& coeffs);

Tensor dictionary_to_kernel(const Tensor& dictionary);
Tensor kernel_to_dictionary(const Tensor& kernel);
Tensor mask_frames(const Tensor& input, Lengths lengths);
Tensor log_softmax_channels(const Tensor& input);

}  // namespace gestures
