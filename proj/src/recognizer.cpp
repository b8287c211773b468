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

#include "gestures/recognizer.hpp"

#include <string>

namespace gestures {

std::vector<Parameter*> RecognizerParams::parameters() {
  std::vector<Parameter*> p;
  auto add_conv = [&p](Conv1dLayer& l) {
    p.push_back(&l.kernel);
    if (l.has_bias()) p.push_back(&l.bias);
  };
  for (std::size_t i = 0; i < front.size(); ++i) {
    add_conv(front[i]);
    p.push_back(&front_norms[i].gamma);
    p.push_back(&front_norms[i].beta);
  }
  for (std::size_t i = 0; i < context.size(); ++i) {
    add_conv(context[i]);
    p.push_back(&context_norms[i].gamma);
    p.push_back(&context_norms[i].beta);
  }
  for (auto& l : projection) add_conv(l);
  add_conv(output);
  return p;
}

std::vector<BatchNormState*> RecognizerParams::norms() {
  std::vector<BatchNormState*> n;
  for (auto& bn : front_norms) n.push_back(&bn);
  for (auto& bn : context_norms) n.push_back(&bn);
  return n;
}

void RecognizerParams::set_mode(NormMode mode) {
  for (BatchNormState* bn : norms()) bn->mode = mode;
}

RecognizerParams make_recognizer(const RecognizerShape& shape, std::uint64_t seed) {
  if (shape.input_features < 1 || shape.classes < 2)
    throw ShapeError("make_recognizer: need features and at least one phone class");
  std::mt19937_64 rng(seed);
  RecognizerParams r;
  r.shape = shape;
  Index in = shape.input_features;
  for (Index i = 0; i < shape.front_layers; ++i) {
    const std::string name = "recognizer.front" + std::to_string(i);
    r.front.push_back(make_conv_layer(name, shape.front_kernel, in, shape.front_channels, rng));
    r.front_norms.push_back(make_batchnorm(shape.front_channels, name + ".bn"));
    in = shape.front_channels;
  }
  for (std::size_t i = 0; i < shape.dilations.size(); ++i) {
    const std::string name = "recognizer.context" + std::to_string(i);
    r.context.push_back(make_conv_layer(name, shape.context_kernel, in, shape.context_channels, rng,
                                        true, shape.dilations[i]));
    r.context_norms.push_back(make_batchnorm(shape.context_channels, name + ".bn"));
    in = shape.context_channels;
  }
  for (Index i = 0; i < shape.projection_layers; ++i) {
    r.projection.push_back(make_conv_layer("recognizer.proj" + std::to_string(i), 1, in,
                                           shape.projection_width, rng));
    in = shape.projection_width;
  }
  r.output = make_conv_layer("recognizer.output", 1, in, shape.classes, rng);
  return r;
}

Var recognize(Tape& tape, Var input, RecognizerParams& params, Lengths lengths) {
  const Tensor& x = tape.value(input);
  require_rank(x, 3, "recognize input");
  if (x.dim(1) != params.shape.input_features)
    throw ShapeError("recognize: expects " + std::to_string(params.shape.input_features) +
                     " features, input has " + std::to_string(x.dim(1)));
  Var h = input;
  for (std::size_t i = 0; i < params.front.size(); ++i) {
    h = apply(tape, h, params.front[i]);
    h = mask_frames(tape, relu(tape, batchnorm1d(tape, h, params.front_norms[i], lengths)), lengths);
  }
  for (std::size_t i = 0; i < params.context.size(); ++i) {
    h = apply(tape, h, params.context[i]);
    h = mask_frames(tape, relu(tape, batchnorm1d(tape, h, params.context_norms[i], lengths)), lengths);
  }
  for (auto& layer : params.projection) h = relu(tape, apply(tape, h, layer));
  return log_softmax_channels(tape, apply(tape, h, params.output));
}

Tensor recognize(const Tensor& input, RecognizerParams& params, Lengths lengths) {
  require_rank(input, 3, "recognize input");
  if (input.dim(1) != params.shape.input_features)
    throw ShapeError("recognize: expects " + std::to_string(params.shape.input_features) +
                     " features, input has " + std::to_string(input.dim(1)));
  auto conv = [](const Tensor& x, const Conv1dLayer& l) {
    return conv1d(x, l.kernel.value, l.bias.value, l.options);
  };
  Tensor h = input;
  for (std::size_t i = 0; i < params.front.size(); ++i)
    h = mask_frames(relu(batchnorm1d(conv(h, params.front[i]), params.front_norms[i], lengths)), lengths);
  for (std::size_t i = 0; i < params.context.size(); ++i)
    h = mask_frames(relu(batchnorm1d(conv(h, params.context[i]), params.context_norms[i], lengths)),
                    lengths);
  for (const auto& layer : params.projection) h = relu(conv(h, layer));
  return log_softmax_channels(conv(h, params.output));
}

RowMatrix frame_log_probs(const Tensor& log_probs, Index b, Index n) {
  return log_probs.slice(b).leftCols(n).transpose();
}

}  // namespace gestures
