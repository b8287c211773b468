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

#include "gestures/tape.hpp"

#include <utility>

namespace gestures {

Var Tape::push(Tensor value, bool requires_grad) {
  check_recordable();
  Slot s;
  s.value = std::move(value);
  s.requires_grad = requires_grad;
  slots_.push_back(std::move(s));
  return Var{slots_.size() - 1};
}

void Tape::check_recordable() const {
  if (differentiated_)
    throw TapeError("tape already differentiated; clear() before recording a new forward pass");
}

Var Tape::constant(Tensor value) { return push(std::move(value), false); }

Var Tape::variable(Tensor value) { return push(std::move(value), true); }

Var Tape::parameter(Parameter& p) {
  Var v = push(p.value, true);
  parameters_.emplace_back(v.id, &p);
  return v;
}

Var Tape::record(std::string op, Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(op), std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(std::string op, Tensor value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs)
    if (in.valid() && slot(in).requires_grad) needs = true;
  Var out = push(std::move(value), needs);
  records_.push_back(Record{std::move(op), out.id, needs ? std::move(backward) : Backward{}});
  return out;
}

Tape::Slot& Tape::slot(Var v) {
  if (v.id >= slots_.size()) throw TapeError("invalid tape variable");
  return slots_[v.id];
}

const Tape::Slot& Tape::slot(Var v) const {
  if (v.id >= slots_.size()) throw TapeError("invalid tape variable");
  return slots_[v.id];
}

const Tensor& Tape::value(Var v) const { return slot(v).value; }

bool Tape::requires_grad(Var v) const { return slot(v).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Slot& s = slot(v);
  if (s.has_grad) return s.grad;
  return Tensor(s.value.shape());
}

Tensor& Tape::grad_buffer(Var v) {
  Slot& s = slot(v);
  if (!s.has_grad) {
    s.grad = Tensor(s.value.shape());
    s.has_grad = true;
  }
  return s.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!v.valid()) return;
  Slot& s = slot(v);
  if (!s.requires_grad) return;
  if (!g.same_shape(s.value))
    throw ShapeError("gradient shape " + shape_string(g.shape()) + " does not match value " +
                     shape_string(s.value.shape()));
  grad_buffer(v).data() += g.data();
}

void Tape::backward(Var output) {
  if (differentiated_) throw TapeError("second backward pass without a new forward pass");
  Slot& out = slot(output);
  if (out.value.size() != 1) throw ShapeError("backward() needs a single-element output");
  differentiated_ = true;
  if (!out.requires_grad) return;
  grad_buffer(output).data().setOnes();

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->backward) continue;
    Slot& s = slots_[it->output];
    if (s.has_grad) it->backward(*this, s.grad);
    it->backward = nullptr;  // releases cached intermediates
  }
  for (auto& [id, p] : parameters_) {
    const Slot& s = slots_[id];
    if (!s.has_grad) continue;
    if (p->grad.empty() || !p->grad.same_shape(p->value)) p->zero_grad();
    p->grad.data() += s.grad.data();
  }
}

void Tape::clear() {
  slots_.clear();
  records_.clear();
  parameters_.clear();
  differentiated_ = false;
}

}  // namespace gestures
