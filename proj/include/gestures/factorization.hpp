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
#include <random>
#include <string>
#include <vector>

#include "gestures/data_io.hpp"
#include "gestures/ops.hpp"
#include "gestures/tape.hpp"
#include "gestures/tensor.hpp"

namespace gestures {

struct ModelShape {
  Index channels = kEmaChannelCount;
  Index gestures = 40;
  Index kernel = 41;  // gesture length in frames
  Index encoder_hidden = 64;
  Index encoder_kernel1 = 15;
  Index encoder_kernel2 = 5;
  bool decoder_bias = true;
};

struct Conv1dLayer {
  Parameter kernel;  // K x Cin x Cout
  Parameter bias;    // Cout, or empty
  Conv1dOptions options;

  bool has_bias() const { return !bias.value.empty(); }
};

/// Uniform(-1/sqrt(K*Cin), 1/sqrt(K*Cin)) weights and bias.
Conv1dLayer make_conv_layer(const std::string& name, Index kernel_size, Index in_channels,
                            Index out_channels, std::mt19937_64& rng, bool bias = true,
                            Index dilation = 1);
Var apply(Tape& tape, Var input, Conv1dLayer& layer);

struct EncoderParams {
  Conv1dLayer conv1;
  BatchNormState bn1;
  Conv1dLayer conv2;
  BatchNormState bn2;

  Index receptive_field() const {
    return conv1.kernel.value.dim(0) + conv2.kernel.value.dim(0) - 1;
  }
};

// Gestures in forward-time order: W[i, c, d] is channel c of gesture d,
// i frames after its onset. No sign constraint.
struct GestureDictionary {
  Parameter W;     // T x C x D
  Parameter bias;  // C, or empty

  Index length() const { return W.value.dim(0); }
  Index channels() const { return W.value.dim(1); }
  Index gestures() const { return W.value.dim(2); }
  bool has_bias() const { return !bias.value.empty(); }
  /// Rescales each gesture to unit Frobenius norm (zero gestures untouched).
  void renormalize();
};

enum class Alignment {
  kSame,    // length-preserving, centred; the trained decoder
  kCausal,  // X[t] = sum_i W(i) H[t - i], the shifted-column sum
};

struct GestureModel {
  ModelShape shape;
  EncoderParams encoder;
  GestureDictionary decoder;

  std::vector<Parameter*> parameters();
  std::vector<BatchNormState*> norms();
  void set_mode(NormMode mode);
};

GestureModel make_gesture_model(const ModelShape& shape, std::uint64_t seed);

/// H = relu(bn2(conv2(bn1(conv1(X))))), B x D x t. Frames past `lengths`
/// are zeroed after each normalization, which makes a padded element score
/// exactly like its unpadded self.
Var encode(Tape& tape, Var X, EncoderParams& encoder, Lengths lengths = {});
Tensor encode(const Tensor& X, EncoderParams& encoder, Lengths lengths = {});

/// Single convolution of H with the gesture dictionary, B x C x t.
Var decode(Tape& tape, Var H, GestureDictionary& dictionary, Alignment alignment = Alignment::kSame);
Tensor decode(const Tensor& H, const Tensor& W, const Tensor& bias,
              Alignment alignment = Alignment::kSame);

/// Literal shifted-column sum X[c,t] = sum_{i,d} W[i,c,d] H[d,t-i] with
/// H[., k<0] = 0, evaluated by plain loops. H is D x t, result C x t.
Tensor convolutive_synthesis(const Tensor& W, const Tensor& H);

struct ModelOutputs {
  Var H;
  Var X_hat;
};

ModelOutputs model_forward(Tape& tape, Var X, GestureModel& model, Lengths lengths = {});

// ---------------------------------------------------------------------------
// k-means dictionary initialization
// ---------------------------------------------------------------------------

struct KMeansOptions {
  Index clusters = 8;
  Index max_iterations = 300;
  double tolerance = 1e-6;  // stop once no center moves farther than this
  std::uint64_t seed = 0;
};

struct KMeansResult {
  RowMatrix centers;             // clusters x dim
  std::vector<Index> assignment;
  std::vector<double> objective;  // within-cluster sum of squares per iteration
  Index iterations = 0;
  bool converged = false;
};

/// k-means++ seeding followed by Lloyd iterations on the rows of `points`.
/// Throws DataError when there are fewer distinct rows than clusters.
KMeansResult kmeans(const Eigen::Ref<const RowMatrix>& points, const KMeansOptions& options);

/// Flattened supervectors (window*C values, frame-major) of every window of
/// every utterance.
RowMatrix window_supervectors(const Corpus& corpus, Index window, Index stride);

/// Clusters all windows into `gestures` centers and returns them as a T x C x D
/// dictionary, center d becoming gesture d.
Tensor kmeans_dictionary(const Corpus& corpus, Index gestures, Index window, Index stride,
                         std::uint64_t seed, Index max_iterations = 300, double tolerance = 1e-6);

}  // namespace gestures
