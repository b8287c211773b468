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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "gestures/tensor.hpp"

namespace gestures {

/// A trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Biases and normalization affine terms are excluded from weight decay.
  bool decay = true;

  void zero_grad() { grad = Tensor(value.shape()); }
};

/// Handle to a value slot of a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Reverse-mode record of executed operators. Each operator stores a closure
// over the forward intermediates its adjoint needs; backward() replays them in
// reverse execution order and then releases them, so the tape can be
// differentiated exactly once per forward pass.
class Tape {
 public:
  using Backward = std::function<void(Tape& tape, const Tensor& grad_out)>;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var parameter(Parameter& p);

  /// Appends an operator record. The closure is kept only when some input
  /// requires a gradient.
  Var record(std::string op, Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(std::string op, Tensor value, const std::vector<Var>& inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of the last backward() output with respect to v (zeros if unreached).
  Tensor grad(Var v) const;

  /// Adds g into the gradient slot of v; a no-op for constants.
  void accumulate(Var v, const Tensor& g);
  /// Mutable gradient buffer for in-place accumulation (zero-initialized).
  Tensor& grad_buffer(Var v);

  /// Seeds d(output)=1 for a single-element output and propagates. Parameter
  /// leaves have their gradients added into Parameter::grad.
  void backward(Var output);

  bool differentiated() const { return differentiated_; }
  std::size_t num_ops() const { return records_.size(); }
  const std::string& op_name(std::size_t i) const { return records_.at(i).name; }
  void clear();

 private:
  struct Slot {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
  };
  struct Record {
    std::string name;
    std::size_t output;
    Backward backward;
  };

  Slot& slot(Var v);
  const Slot& slot(Var v) const;
  Var push(Tensor value, bool requires_grad);
  void check_recordable() const;

  std::vector<Slot> slots_;
  std::vector<Record> records_;
  std::vector<std::pair<std::size_t, Parameter*>> parameters_;
  bool differentiated_ = false;
};

}  // namespace gestures
