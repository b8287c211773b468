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

#include "gestures/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace gestures {
namespace {

Index valid_length(Lengths lengths, Index b, Index full) {
  if (lengths.empty()) return full;
  Index n = lengths[static_cast<std::size_t>(b)];
  if (n < 0 || n > full) throw ShapeError("frame length out of range");
  return n;
}

void check_lengths(Lengths lengths, Index batch, const char* where) {
  if (!lengths.empty() && static_cast<Index>(lengths.size()) != batch)
    throw ShapeError(std::string(where) + ": lengths size does not match batch");
}

Padding resolve_padding(const Conv1dOptions& o, Index kernel_size) {
  if (o.dilation < 1) throw ShapeError("conv1d: dilation must be >= 1");
  return o.same ? same_padding(kernel_size, o.dilation) : o.padding;
}

// cols((k*Cin + ci), t) = in_pad(ci, t + k*dilation)
void im2col(const ConstRowMatrixMap& in, Index K, Index dilation, Padding pad, Index out_len,
            RowMatrix& cols) {
  const Index cin = in.rows(), len = in.cols();
  cols.setZero(K * cin, out_len);
  for (Index k = 0; k < K; ++k) {
    const Index shift = k * dilation - pad.left;
    const Index lo = std::max<Index>(0, -shift);
    const Index hi = std::min<Index>(out_len, len - shift);
    if (hi <= lo) continue;
    for (Index ci = 0; ci < cin; ++ci)
      cols.row(k * cin + ci).segment(lo, hi - lo) = in.row(ci).segment(lo + shift, hi - lo);
  }
}

void col2im_add(const RowMatrix& cols, Index K, Index dilation, Padding pad, RowMatrixMap& grad_in) {
  const Index cin = grad_in.rows(), len = grad_in.cols(), out_len = cols.cols();
  for (Index k = 0; k < K; ++k) {
    const Index shift = k * dilation - pad.left;
    const Index lo = std::max<Index>(0, -shift);
    const Index hi = std::min<Index>(out_len, len - shift);
    if (hi <= lo) continue;
    for (Index ci = 0; ci < cin; ++ci)
      grad_in.row(ci).segment(lo + shift, hi - lo) += cols.row(k * cin + ci).segment(lo, hi - lo);
  }
}

}  // namespace

Padding same_padding(Index kernel_size, Index dilation) {
  const Index span = dilation * (kernel_size - 1);
  return {span / 2, span - span / 2};
}

Padding causal_padding(Index kernel_size, Index dilation) {
  return {dilation * (kernel_size - 1), 0};
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              const Conv1dOptions& options, Conv1dCache* cache) {
  require_rank(input, 3, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  const Index B = input.dim(0), cin = input.dim(1), L = input.dim(2);
  const Index K = kernel.dim(0), cout = kernel.dim(2);
  if (kernel.dim(1) != cin)
    throw ShapeError("conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                     " input channels, input has " + std::to_string(cin));
  const bool has_bias = !bias.empty();
  if (has_bias) require_shape(bias, {cout}, "conv1d bias");
  const Padding pad = resolve_padding(options, K);
  const Index out_len = L + pad.left + pad.right - options.dilation * (K - 1);
  if (out_len <= 0) throw ShapeError("conv1d: input too short for kernel");

  Tensor out({B, cout, out_len});
  ConstRowMatrixMap kmat(kernel.data().data(), K * cin, cout);
  RowMatrix cols;
  for (Index b = 0; b < B; ++b) {
    im2col(input.slice(b), K, options.dilation, pad, out_len, cols);
    auto o = out.slice(b);
    o.noalias() = kmat.transpose() * cols;
    if (has_bias) o.colwise() += bias.data();
  }
  if (cache) *cache = Conv1dCache{input, kernel, has_bias, options};
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Conv1dCache& cache) {
  if (!cache.valid()) throw TapeError("conv1d_backward: stale or empty cache");
  const Tensor& input = cache.input;
  const Tensor& kernel = cache.kernel;
  const Index B = input.dim(0), cin = input.dim(1);
  const Index K = kernel.dim(0), cout = kernel.dim(2);
  const Padding pad = resolve_padding(cache.options, K);
  const Index out_len = input.dim(2) + pad.left + pad.right - cache.options.dilation * (K - 1);
  require_shape(grad_out, {B, cout, out_len}, "conv1d_backward grad_out");

  Conv1dGrads g{Tensor(input.shape()), Tensor(kernel.shape()),
                cache.has_bias ? Tensor({cout}) : Tensor()};
  ConstRowMatrixMap kmat(kernel.data().data(), K * cin, cout);
  RowMatrixMap gk(g.kernel.data().data(), K * cin, cout);
  RowMatrix cols, gcols;
  for (Index b = 0; b < B; ++b) {
    auto go = grad_out.slice(b);
    im2col(input.slice(b), K, cache.options.dilation, pad, out_len, cols);
    gk.noalias() += cols * go.transpose();
    gcols.noalias() = kmat * go;
    auto gi = g.input.slice(b);
    col2im_add(gcols, K, cache.options.dilation, pad, gi);
    if (cache.has_bias) g.bias.data() += go.rowwise().sum();
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  out.data() = input.data().cwiseMax(0.0);
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
  if (!grad_out.same_shape(input)) throw ShapeError("relu_backward: shape mismatch");
  Tensor g = grad_out;
  g.data() = (input.data().array() > 0.0).select(grad_out.data(), 0.0);
  return g;
}

void BatchNormState::seed_running_stats() {
  running_mean.setZero(channels());
  running_var.setOnes(channels());
  stats_ready = true;
}

BatchNormState make_batchnorm(Index channels, const std::string& name) {
  BatchNormState s;
  s.gamma = Parameter{name + ".gamma", Tensor({channels}, 1.0), Tensor({channels}), false};
  s.beta = Parameter{name + ".beta", Tensor({channels}, 0.0), Tensor({channels}), false};
  s.running_mean.setZero(channels);
  s.running_var.setOnes(channels);
  return s;
}

Tensor batchnorm1d(const Tensor& input, BatchNormState& state, Lengths lengths,
                   BatchNormCache* cache) {
  require_rank(input, 3, "batchnorm1d input");
  const Index B = input.dim(0), C = input.dim(1), L = input.dim(2);
  if (C != state.channels())
    throw ShapeError("batchnorm1d: state has " + std::to_string(state.channels()) +
                     " channels, input has " + std::to_string(C));
  check_lengths(lengths, B, "batchnorm1d");
  const bool training = state.mode == NormMode::kTraining;

  Eigen::VectorXd mean(C), inv_std(C);
  if (training) {
    Index n = 0;
    for (Index b = 0; b < B; ++b) n += valid_length(lengths, b, L);
    if (n < 2) throw ShapeError("batchnorm1d: training mode needs at least 2 frames per channel");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(C), sq = Eigen::VectorXd::Zero(C);
    for (Index b = 0; b < B; ++b)
      sum += input.slice(b).leftCols(valid_length(lengths, b, L)).rowwise().sum();
    mean = sum / static_cast<double>(n);
    for (Index b = 0; b < B; ++b) {
      auto x = input.slice(b).leftCols(valid_length(lengths, b, L));
      sq += (x.colwise() - mean).array().square().matrix().rowwise().sum();
    }
    const Eigen::VectorXd var = sq / static_cast<double>(n);
    inv_std = (var.array() + state.epsilon).rsqrt();
    const double m = state.momentum;
    state.running_mean = (1.0 - m) * state.running_mean + m * mean;
    state.running_var =
        (1.0 - m) * state.running_var + m * var * (static_cast<double>(n) / static_cast<double>(n - 1));
    state.stats_ready = true;
  } else {
    if (!state.stats_ready)
      throw std::logic_error("batchnorm1d: inference before running statistics were estimated");
    mean = state.running_mean;
    inv_std = (state.running_var.array() + state.epsilon).rsqrt();
  }

  Tensor normalized(input.shape());
  Tensor out(input.shape());
  const Eigen::VectorXd& gamma = state.gamma.value.data();
  const Eigen::VectorXd& beta = state.beta.value.data();
  for (Index b = 0; b < B; ++b) {
    auto xh = normalized.slice(b);
    xh = (input.slice(b).colwise() - mean).array().colwise() * inv_std.array();
    out.slice(b) = (xh.array().colwise() * gamma.array()).colwise() + beta.array();
  }
  ensure_finite(out, "batchnorm1d");
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->gamma = gamma;
    cache->lengths.assign(lengths.begin(), lengths.end());
    cache->training = training;
  }
  return out;
}

BatchNormGrads batchnorm1d_backward(const Tensor& grad_out, const BatchNormCache& cache) {
  if (!cache.valid()) throw TapeError("batchnorm1d_backward: stale or empty cache");
  const Tensor& xh = cache.normalized;
  require_shape(grad_out, xh.shape(), "batchnorm1d_backward grad_out");
  const Index B = xh.dim(0), C = xh.dim(1), L = xh.dim(2);
  const Lengths lengths(cache.lengths);

  BatchNormGrads g{Tensor(xh.shape()), Tensor({C}), Tensor({C})};
  Eigen::VectorXd sum_dy = Eigen::VectorXd::Zero(C), sum_dy_xh = Eigen::VectorXd::Zero(C);
  for (Index b = 0; b < B; ++b) {
    sum_dy += grad_out.slice(b).rowwise().sum();
    sum_dy_xh += grad_out.slice(b).cwiseProduct(xh.slice(b)).rowwise().sum();
  }
  g.gamma.data() = sum_dy_xh;
  g.beta.data() = sum_dy;

  const Eigen::ArrayXd scale = cache.gamma.array() * cache.inv_std.array();
  if (!cache.training) {
    for (Index b = 0; b < B; ++b)
      g.input.slice(b) = grad_out.slice(b).array().colwise() * scale;
    return g;
  }
  Index n = 0;
  for (Index b = 0; b < B; ++b) n += valid_length(lengths, b, L);
  const Eigen::ArrayXd a = cache.gamma.array() * sum_dy.array() / static_cast<double>(n);
  const Eigen::ArrayXd c = cache.gamma.array() * sum_dy_xh.array() / static_cast<double>(n);
  for (Index b = 0; b < B; ++b) {
    auto gi = g.input.slice(b);
    gi = grad_out.slice(b).array().colwise() * cache.gamma.array();
    const Index valid = valid_length(lengths, b, L);
    auto head = gi.leftCols(valid);
    head = (head.array().colwise() - a) - xh.slice(b).leftCols(valid).array().colwise() * c;
    gi = gi.array().colwise() * cache.inv_std.array();
  }
  return g;
}

Tensor mask_frames(const Tensor& input, Lengths lengths) {
  require_rank(input, 3, "mask_frames");
  check_lengths(lengths, input.dim(0), "mask_frames");
  Tensor out = input;
  if (lengths.empty()) return out;
  const Index L = input.dim(2);
  for (Index b = 0; b < input.dim(0); ++b) {
    const Index valid = valid_length(lengths, b, L);
    out.slice(b).rightCols(L - valid).setZero();
  }
  return out;
}

Tensor log_softmax_channels(const Tensor& input) {
  require_rank(input, 3, "log_softmax_channels");
  Tensor out(input.shape());
  for (Index b = 0; b < input.dim(0); ++b) {
    auto x = input.slice(b);
    const Eigen::RowVectorXd mx = x.colwise().maxCoeff();
    RowMatrix shifted = x.rowwise() - mx;
    const Eigen::RowVectorXd lse = shifted.array().exp().colwise().sum().log();
    out.slice(b) = shifted.rowwise() - lse;
  }
  return out;
}

Tensor dictionary_to_kernel(const Tensor& dictionary) {
  require_rank(dictionary, 3, "dictionary_to_kernel");
  const Index T = dictionary.dim(0), C = dictionary.dim(1), D = dictionary.dim(2);
  Tensor kernel({T, D, C});
  for (Index k = 0; k < T; ++k) kernel.slice(k) = dictionary.slice(T - 1 - k).transpose();
  return kernel;
}

Tensor kernel_to_dictionary(const Tensor& kernel) {
  require_rank(kernel, 3, "kernel_to_dictionary");
  const Index T = kernel.dim(0), D = kernel.dim(1), C = kernel.dim(2);
  Tensor dictionary({T, C, D});
  for (Index i = 0; i < T; ++i) dictionary.slice(i) = kernel.slice(T - 1 - i).transpose();
  return dictionary;
}

// ---------------------------------------------------------------------------

Var conv1d(Tape& tape, Var input, Var kernel, Var bias, const Conv1dOptions& options) {
  auto cache = std::make_shared<Conv1dCache>();
  Tensor out = conv1d(tape.value(input), tape.value(kernel), bias.valid() ? tape.value(bias) : Tensor(),
                      options, cache.get());
  return tape.record("conv1d", std::move(out), {input, kernel, bias},
                     [cache, input, kernel, bias](Tape& t, const Tensor& g) {
                       Conv1dGrads grads = conv1d_backward(g, *cache);
                       t.accumulate(input, grads.input);
                       t.accumulate(kernel, grads.kernel);
                       if (bias.valid()) t.accumulate(bias, grads.bias);
                     });
}

Var relu(Tape& tape, Var input) {
  return tape.record("relu", relu(tape.value(input)), {input}, [input](Tape& t, const Tensor& g) {
    t.accumulate(input, relu_backward(g, t.value(input)));
  });
}

Var batchnorm1d(Tape& tape, Var input, BatchNormState& state, Lengths lengths) {
  auto cache = std::make_shared<BatchNormCache>();
  Tensor out = batchnorm1d(tape.value(input), state, lengths, cache.get());
  Var gamma = tape.parameter(state.gamma);
  Var beta = tape.parameter(state.beta);
  return tape.record("batchnorm1d", std::move(out), {input, gamma, beta},
                     [cache, input, gamma, beta](Tape& t, const Tensor& g) {
                       BatchNormGrads grads = batchnorm1d_backward(g, *cache);
                       t.accumulate(input, grads.input);
                       t.accumulate(gamma, grads.gamma);
                       t.accumulate(beta, grads.beta);
                     });
}

Var mask_frames(Tape& tape, Var input, Lengths lengths) {
  if (lengths.empty()) return input;
  std::vector<Index> lens(lengths.begin(), lengths.end());
  return tape.record("mask_frames", mask_frames(tape.value(input), lengths), {input},
                     [input, lens](Tape& t, const Tensor& g) {
                       t.accumulate(input, mask_frames(g, Lengths(lens)));
                     });
}

Var log_softmax_channels(Tape& tape, Var input) {
  Tensor out = log_softmax_channels(tape.value(input));
  auto probs = std::make_shared<Tensor>(out);
  probs->data() = probs->data().array().exp();
  return tape.record("log_softmax", std::move(out), {input}, [probs, input](Tape& t, const Tensor& g) {
    Tensor gi(g.shape());
    for (Index b = 0; b < g.dim(0); ++b) {
      const Eigen::RowVectorXd s = g.slice(b).colwise().sum();
      gi.slice(b) = g.slice(b) - RowMatrix(probs->slice(b).array().rowwise() * s.array());
    }
    t.accumulate(input, gi);
  });
}

Var dictionary_kernel(Tape& tape, Var dictionary) {
  return tape.record("dictionary_kernel", dictionary_to_kernel(tape.value(dictionary)), {dictionary},
                     [dictionary](Tape& t, const Tensor& g) {
                       t.accumulate(dictionary, kernel_to_dictionary(g));
                     });
}

Var weighted_sum(Tape& tape, const std::vector<Var>& inputs, const std::vector<double>& coeffs) {
  if (inputs.size() != coeffs.size()) throw ShapeError("weighted_sum: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (tape.value(inputs[i]).size() != 1) throw ShapeError("weighted_sum: inputs must be scalars");
    total += coeffs[i] * tape.value(inputs[i])[0];
  }
  return tape.record("weighted_sum", Tensor({1}, total), inputs,
                     [inputs, coeffs](Tape& t, const Tensor& g) {
                       for (std::size_t i = 0; i < inputs.size(); ++i)
                         t.accumulate(inputs[i], Tensor({1}, coeffs[i] * g[0]));
                     });
}

}  // namespace gestures
