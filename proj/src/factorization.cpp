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

#include "gestures/factorization.hpp"

#include <cmath>

namespace gestures {

Conv1dLayer make_conv_layer(const std::string& name, Index kernel_size, Index in_channels,
                            Index out_channels, std::mt19937_64& rng, bool bias, Index dilation) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_size * in_channels));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Conv1dLayer layer;
  layer.kernel.name = name + ".kernel";
  layer.kernel.value = Tensor({kernel_size, in_channels, out_channels});
  for (Index i = 0; i < layer.kernel.value.size(); ++i) layer.kernel.value[i] = dist(rng);
  layer.kernel.zero_grad();
  if (bias) {
    layer.bias.name = name + ".bias";
    layer.bias.value = Tensor({out_channels});
    for (Index i = 0; i < out_channels; ++i) layer.bias.value[i] = dist(rng);
    layer.bias.decay = false;
    layer.bias.zero_grad();
  }
  layer.options.dilation = dilation;
  return layer;
}

Var apply(Tape& tape, Var input, Conv1dLayer& layer) {
  Var kernel = tape.parameter(layer.kernel);
  Var bias = layer.has_bias() ? tape.parameter(layer.bias) : Var{};
  return conv1d(tape, input, kernel, bias, layer.options);
}

void GestureDictionary::renormalize() {
  Tensor& w = W.value;
  const Index T = w.dim(0), C = w.dim(1), D = w.dim(2);
  for (Index d = 0; d < D; ++d) {
    double sq = 0.0;
    for (Index i = 0; i < T; ++i)
      for (Index c = 0; c < C; ++c) sq += w(i, c, d) * w(i, c, d);
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (Index i = 0; i < T; ++i)
      for (Index c = 0; c < C; ++c) w(i, c, d) *= inv;
  }
}

std::vector<Parameter*> GestureModel::parameters() {
  std::vector<Parameter*> p{&encoder.conv1.kernel};
  if (encoder.conv1.has_bias()) p.push_back(&encoder.conv1.bias);
  p.push_back(&encoder.bn1.gamma);
  p.push_back(&encoder.bn1.beta);
  p.push_back(&encoder.conv2.kernel);
  if (encoder.conv2.has_bias()) p.push_back(&encoder.conv2.bias);
  p.push_back(&encoder.bn2.gamma);
  p.push_back(&encoder.bn2.beta);
  p.push_back(&decoder.W);
  if (decoder.has_bias()) p.push_back(&decoder.bias);
  return p;
}

std::vector<BatchNormState*> GestureModel::norms() { return {&encoder.bn1, &encoder.bn2}; }

void GestureModel::set_mode(NormMode mode) {
  for (BatchNormState* bn : norms()) bn->mode = mode;
}

GestureModel make_gesture_model(const ModelShape& shape, std::uint64_t seed) {
  if (shape.channels < 1 || shape.gestures < 1 || shape.kernel < 1 || shape.encoder_hidden < 1)
    throw ShapeError("make_gesture_model: all extents must be positive");
  std::mt19937_64 rng(seed);
  GestureModel m;
  m.shape = shape;
  m.encoder.conv1 = make_conv_layer("encoder.conv1", shape.encoder_kernel1, shape.channels,
                                    shape.encoder_hidden, rng);
  m.encoder.bn1 = make_batchnorm(shape.encoder_hidden, "encoder.bn1");
  m.encoder.conv2 = make_conv_layer("encoder.conv2", shape.encoder_kernel2, shape.encoder_hidden,
                                    shape.gestures, rng);
  m.encoder.bn2 = make_batchnorm(shape.gestures, "encoder.bn2");
  // Decoder kernel drawn like a conv layer mapping D -> C channels.
  Conv1dLayer dec = make_conv_layer("decoder", shape.kernel, shape.gestures, shape.channels, rng,
                                    shape.decoder_bias);
  m.decoder.W = Parameter{"decoder.W", kernel_to_dictionary(dec.kernel.value), Tensor(), true};
  m.decoder.W.zero_grad();
  if (shape.decoder_bias) {
    m.decoder.bias = Parameter{"decoder.bias", dec.bias.value, Tensor(), false};
    m.decoder.bias.zero_grad();
  }
  return m;
}

Var encode(Tape& tape, Var X, EncoderParams& encoder, Lengths lengths) {
  const Tensor& x = tape.value(X);
  require_rank(x, 3, "encode input");
  if (x.dim(1) != encoder.conv1.kernel.value.dim(1))
    throw ShapeError("encode: model expects " + std::to_string(encoder.conv1.kernel.value.dim(1)) +
                     " channels, input has " + std::to_string(x.dim(1)));
  Var h = apply(tape, X, encoder.conv1);
  h = batchnorm1d(tape, h, encoder.bn1, lengths);
  h = mask_frames(tape, h, lengths);
  h = apply(tape, h, encoder.conv2);
  h = batchnorm1d(tape, h, encoder.bn2, lengths);
  h = relu(tape, h);
  return mask_frames(tape, h, lengths);
}

Tensor encode(const Tensor& X, EncoderParams& encoder, Lengths lengths) {
  require_rank(X, 3, "encode input");
  if (X.dim(1) != encoder.conv1.kernel.value.dim(1))
    throw ShapeError("encode: model expects " + std::to_string(encoder.conv1.kernel.value.dim(1)) +
                     " channels, input has " + std::to_string(X.dim(1)));
  Tensor h = conv1d(X, encoder.conv1.kernel.value, encoder.conv1.bias.value, encoder.conv1.options);
  h = mask_frames(batchnorm1d(h, encoder.bn1, lengths), lengths);
  h = conv1d(h, encoder.conv2.kernel.value, encoder.conv2.bias.value, encoder.conv2.options);
  return mask_frames(relu(batchnorm1d(h, encoder.bn2, lengths)), lengths);
}

namespace {

Conv1dOptions decoder_options(Alignment alignment, Index T) {
  Conv1dOptions o;
  if (alignment == Alignment::kCausal) {
    o.same = false;
    o.padding = causal_padding(T);
  }
  return o;
}

}  // namespace

Var decode(Tape& tape, Var H, GestureDictionary& dictionary, Alignment alignment) {
  const Tensor& h = tape.value(H);
  require_rank(h, 3, "decode input");
  if (h.dim(1) != dictionary.gestures())
    throw ShapeError("decode: dictionary has " + std::to_string(dictionary.gestures()) +
                     " gestures, scores have " + std::to_string(h.dim(1)));
  Var kernel = dictionary_kernel(tape, tape.parameter(dictionary.W));
  Var bias = dictionary.has_bias() ? tape.parameter(dictionary.bias) : Var{};
  return conv1d(tape, H, kernel, bias, decoder_options(alignment, dictionary.length()));
}

Tensor decode(const Tensor& H, const Tensor& W, const Tensor& bias, Alignment alignment) {
  require_rank(H, 3, "decode input");
  require_rank(W, 3, "decode dictionary");
  if (H.dim(1) != W.dim(2))
    throw ShapeError("decode: dictionary has " + std::to_string(W.dim(2)) + " gestures, scores have " +
                     std::to_string(H.dim(1)));
  return conv1d(H, dictionary_to_kernel(W), bias, decoder_options(alignment, W.dim(0)));
}

Tensor convolutive_synthesis(const Tensor& W, const Tensor& H) {
  require_rank(W, 3, "convolutive_synthesis W");
  require_rank(H, 2, "convolutive_synthesis H");
  const Index T = W.dim(0), C = W.dim(1), D = W.dim(2), t = H.dim(1);
  if (H.dim(0) != D) throw ShapeError("convolutive_synthesis: gesture count mismatch");
  Tensor X({C, t});
  for (Index c = 0; c < C; ++c)
    for (Index tau = 0; tau < t; ++tau) {
      double acc = 0.0;
      for (Index i = 0; i < T && i <= tau; ++i)
        for (Index d = 0; d < D; ++d) acc += W(i, c, d) * H(d, tau - i);
      X(c, tau) = acc;
    }
  return X;
}

ModelOutputs model_forward(Tape& tape, Var X, GestureModel& model, Lengths lengths) {
  Var H = encode(tape, X, model.encoder, lengths);
  Var X_hat = decode(tape, H, model.decoder, Alignment::kSame);
  return {H, X_hat};
}

}  // namespace gestures
