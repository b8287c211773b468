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

#include "gestures/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace gestures {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_ = Eigen::VectorXd::Constant(shape_size(shape_), fill);
  if (!std::isfinite(fill)) throw NumericError("non-finite fill value");
}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size())
    throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  ensure_finite(*this, "Tensor construction");
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape),
             Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                                               static_cast<Index>(values.size())))) {}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  ensure_finite(t, "Tensor::from_matrix");
  return t;
}

RowMatrixMap Tensor::matrix() {
  require_rank(*this, 2, "Tensor::matrix");
  return RowMatrixMap(data_.data(), shape_[0], shape_[1]);
}

ConstRowMatrixMap Tensor::matrix() const {
  require_rank(*this, 2, "Tensor::matrix");
  return ConstRowMatrixMap(data_.data(), shape_[0], shape_[1]);
}

RowMatrixMap Tensor::slice(Index i) {
  require_rank(*this, 3, "Tensor::slice");
  return RowMatrixMap(data_.data() + i * shape_[1] * shape_[2], shape_[1], shape_[2]);
}

ConstRowMatrixMap Tensor::slice(Index i) const {
  require_rank(*this, 3, "Tensor::slice");
  return ConstRowMatrixMap(data_.data() + i * shape_[1] * shape_[2], shape_[1], shape_[2]);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void ensure_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError(where + ": non-finite value");
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& where) {
  if (t.shape() != expected)
    throw ShapeError(where + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
}

void require_rank(const Tensor& t, Index rank, const std::string& where) {
  if (t.rank() != rank)
    throw ShapeError(where + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(t.shape()));
}

}  // namespace gestures
